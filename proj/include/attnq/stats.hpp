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

// Calibration statistics computed once before quantization. Every refined loss
// touches only these four matrices, so its cost does not depend on how many
// calibration sequences were used.

#include "attnq/model.hpp"

#include <cstddef>
#include <vector>

namespace attnq {

/// Means over sequences of X X^T, X A^T A X^T, K^T K and Q^T Q.
struct CalibStats
{
  Matrix exx;  // d x d
  Matrix exax; // d x d
  Matrix ektk; // d_h x d_h
  Matrix eqtq; // d_h x d_h
  std::size_t n_sequences = 0;

  /// Throws NumericalError unless all four are symmetric PSD and n_sequences >= 1.
  void validate() const;
};

/// Un-normalized partial sums. Merging is associative, so partial sums over
/// disjoint sequence ranges can be built independently and combined.
struct StatsAccumulator
{
  Matrix sum_xx;
  Matrix sum_xax;
  Matrix sum_ktk;
  Matrix sum_qtq;
  std::size_t count = 0;

  static StatsAccumulator zeros(Eigen::Index d, Eigen::Index d_h);
  static StatsAccumulator from_sequence(const AttentionHead &head, const CalibSequence &seq);

  void merge(const StatsAccumulator &other);
  CalibStats finalize() const;
};

/// Full-precision statistics over `sequences`, pairwise-reduced. Ranges larger
/// than `parallel_grain` sequences are split across worker threads.
CalibStats accumulate_stats(const AttentionHead &head, const std::vector<CalibSequence> &sequences,
                            std::size_t parallel_grain = 64);

} // namespace attnq
