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

// Single-head attention model used as the quantization target.

#include "attnq/linalg.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace attnq {

enum class Projection
{
  Query,
  Key,
  Value
};

std::string_view to_string(Projection p);

/// One attention head: three d_h x d projections acting on d x L token columns.
struct AttentionHead
{
  Eigen::Index d = 0;
  Eigen::Index d_h = 0;
  Matrix w_q;
  Matrix w_k;
  Matrix w_v;

  /// Throws ShapeError/NumericalError on any broken invariant.
  void validate() const;

  const Matrix &weight(Projection p) const;
  Matrix &weight(Projection p);

  /// Copy of this head with one projection replaced.
  AttentionHead with_weight(Projection p, Matrix w) const;
};

/// Calibration input: d x L, one token per column.
struct CalibSequence
{
  Matrix x;

  Eigen::Index length() const { return x.cols(); }
};

struct AttentionTrace
{
  Matrix q;  // L x d_h
  Matrix k;  // L x d_h
  Matrix v;  // L x d_h
  Matrix a;  // L x L, row-stochastic
  Matrix sa; // L x d_h
};

/// Logit scale 1/sqrt(d_h).
double logit_scale(const AttentionHead &head);

AttentionTrace attention_forward(const AttentionHead &head, const CalibSequence &seq);

struct SyntheticSet
{
  AttentionHead head;
  /// Token covariance factor: every token is mixing * z with z ~ N(0, I).
  Matrix mixing;
  std::vector<CalibSequence> sequences;
};

/// Gaussian head (entries scaled by 1/sqrt(d)) and i.i.d. Gaussian token
/// sequences, reproducible for a given seed. Tokens share one random channel
/// covariance (mixing * mixing^T, mixing entries N(0, 1/d)) so that E[X X^T]
/// is anisotropic, as activations in trained models are.
SyntheticSet generate_synthetic(std::uint64_t seed, Eigen::Index d, Eigen::Index d_h,
                                Eigen::Index length, std::size_t n_sequences);

/// Throws unless every sequence has `d` rows and a common, nonzero length.
Eigen::Index check_sequences(const std::vector<CalibSequence> &seqs, Eigen::Index d);

} // namespace attnq
