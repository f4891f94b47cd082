/*
 * Copyright (c) 2026 The attnq Authors. All Rights Reserved
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Brute-force reference computations. These recompute attention for every
// sequence (and, for the Kronecker forms, materialize (d*d_h)^2 matrices), so
// they are meant for small instances only.

#include "attnq/objectives.hpp"
#include "attnq/op_counter.hpp"

#include <cstddef>
#include <vector>

namespace attnq {

/// Oracle dimension caps.
inline constexpr Eigen::Index kOracleMaxD = 16;
inline constexpr Eigen::Index kOracleMaxDh = 4;
inline constexpr std::size_t kDefaultKronBudget = std::size_t{1} << 16;

/// Projection perturbed by an objective of the given kind (Other acts on W_V).
Projection projection_for(ProjectionKind kind);

/// Mean over sequences of ||SA(perturbed) - SA(full precision)||_F^2, where the
/// projection selected by `kind` is replaced by W + delta_w.
double exact_error(const AttentionHead &head, const std::vector<CalibSequence> &seqs, ProjectionKind kind,
                   const Matrix &delta_w);

/// Mean over sequences of ||SA(quantized) - SA(reference)||_F^2 with every
/// projection taken from `quantized`.
double attention_error(const AttentionHead &reference, const AttentionHead &quantized,
                       const std::vector<CalibSequence> &seqs);

/// First-order estimate of exact_error for Query/Key: the attention change is
/// linearized row by row through the softmax Jacobian, so
/// dA_l = (d logits_l / sqrt(d_h)) * J(a_l).
double taylor_error(const AttentionHead &head, const std::vector<CalibSequence> &seqs, ProjectionKind kind,
                    const Matrix &delta_w);

/// Mean ||K dW X||_F^2 (Query) or ||Q dW X||_F^2 (Key).
double projection_surrogate(const AttentionHead &head, const std::vector<CalibSequence> &seqs,
                            ProjectionKind kind, const Matrix &delta_w);

/// dw^T E[X X^T (x) K^T K] dw with the expectation of the Kronecker product
/// assembled explicitly per sequence.
double kron_exact_query_loss(const AttentionHead &head, const std::vector<CalibSequence> &seqs,
                             const Matrix &delta_w, std::size_t budget = kDefaultKronBudget);

/// dw^T (M_X (x) M_K) dw with the Kronecker product materialized.
double kron_quadratic_form(const Matrix &m_x, const Matrix &m_k, const Matrix &delta_w,
                           std::size_t budget = kDefaultKronBudget);

struct OracleReport
{
  double exact_error = 0;
  double taylor_error = 0;
  /// ||K dW X||_F^2
  double surrogate_loss = 0;
  /// sum_l ||V^T J(a_l)||_F^2
  double bound_factor = 0;
  double relative_gap = 0;
  /// bound_factor * surrogate_loss / d_h
  double bound = 0;
  bool holds = true;
};

/// Checks taylor_error <= bound_factor * surrogate / d_h on one sequence for a
/// query perturbation.
OracleReport upper_bound_check(const AttentionHead &head, const CalibSequence &seq, const Matrix &delta_w);

/// Query perturbation maximizing taylor_error / surrogate_loss on one sequence,
/// found by power iteration on the generalized Rayleigh quotient.
Matrix tightest_query_direction(const AttentionHead &head, const CalibSequence &seq, int iterations = 500);

struct JointCost
{
  double error = 0;
  OpCounter ops;
};

/// Pre-softmax error when W_Q and W_K are perturbed jointly,
/// mean ||dQ K^T + Q dK^T + dQ dK^T||_F^2, with the work counted.
JointCost joint_qk_cost_demo(const AttentionHead &head, const std::vector<CalibSequence> &seqs,
                             const Matrix &delta_wq, const Matrix &delta_wk);

} // namespace attnq
