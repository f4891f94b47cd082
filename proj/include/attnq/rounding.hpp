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

// Learned rounding under a trace-form loss. Each weight is soft-quantized as
//
//   W~ = s * (clamp(floor(W / s) + z + h(B), 0, 2^n - 1) - z)
//
// where h is a rectified sigmoid of the continuous logits B. The objective is
// the reconstruction loss on W - W~ plus lambda * sum(1 - |2h - 1|^beta).

#include "attnq/objectives.hpp"
#include "attnq/quantizer.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace attnq {

struct RectifiedSigmoid
{
  double zeta = 1.1;
  double gamma = -0.1;

  double operator()(double b) const;
  /// dh/db; zero where the stretched sigmoid is clamped.
  double derivative(double b) const;
  /// Logit b with h(b) = target for target in [0, 1).
  double inverse(double target) const;
};

struct SoftQuantConfig
{
  int iterations = 2000;
  double learning_rate = 0.015;
  double lambda = 1.5;
  double beta_start = 20.0;
  double beta_end = 2.0;
  /// Fraction of iterations over which beta is annealed linearly; held afterwards.
  double anneal_fraction = 0.8;
  RectifiedSigmoid stretch{};
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// Recorded in reports. The optimizer itself draws no random numbers.
  std::uint64_t seed = 0;

  void validate() const;
  double beta_at(int iteration) const;
};

struct LossTerms
{
  double total = 0;
  double reconstruction = 0;
  double regularizer = 0;
};

struct RoundingState
{
  Matrix b;
  double lambda = 1.5;
  double beta = 20.0;
  int iteration = 0;
  std::vector<LossTerms> loss_trace;
};

/// h(B) elementwise.
Matrix rounding_offsets(const RoundingState &state, const RectifiedSigmoid &h);

/// Soft-quantized weights for base weights `w`.
Matrix soft_quantize(const Matrix &w, const QuantSpec &spec, const RoundingState &state,
                     const RectifiedSigmoid &h = {});

struct RegularizerValue
{
  double value = 0;
  Matrix gradient; // d value / d b
};

RegularizerValue rounding_regularizer(const RoundingState &state, const RectifiedSigmoid &h = {});

/// Logits that make soft_quantize(w) reproduce w wherever w lies inside the grid.
RoundingState initial_rounding_state(const Matrix &w, const QuantSpec &spec, const SoftQuantConfig &cfg);

/// Total objective and its gradient with respect to state.b.
struct ObjectiveValue
{
  LossTerms terms;
  Matrix gradient;
};
ObjectiveValue rounding_objective(const Matrix &target, const Matrix &base, const QuantSpec &spec,
                                  const LossContext &ctx, const RoundingState &state,
                                  const RectifiedSigmoid &h, OpCounter *counter = nullptr);

/// Hard assignment: floor(w / s) + z + [h >= 0.5], clamped to the grid.
QuantizedWeight harden(const Matrix &base, const QuantSpec &spec, const RoundingState &state,
                       const RectifiedSigmoid &h = {});

struct RoundingResult
{
  QuantizedWeight quantized;
  RoundingState state;
};

/// Optimizes the rounding of `base` towards `target` with Adam. `base` is the
/// weight the grid is anchored to (e.g. OPTQ-compensated weights); `target` is
/// the full-precision weight the loss measures against. With zero iterations
/// the result is rtn_quantize(base, spec).
RoundingResult optimize_rounding(const Matrix &target, const Matrix &base, const QuantSpec &spec,
                                 const LossContext &ctx, const SoftQuantConfig &cfg,
                                 OpCounter *iteration_counter = nullptr);

inline QuantizedWeight optimize_rounding(const Matrix &w, const QuantSpec &spec, const LossContext &ctx,
                                         const SoftQuantConfig &cfg)
{
  return optimize_rounding(w, w, spec, ctx, cfg).quantized;
}

/// iteration,total,reconstruction,regularizer
void write_loss_trace_csv(std::ostream &os, const std::vector<LossTerms> &trace, bool header = true);

} // namespace attnq
