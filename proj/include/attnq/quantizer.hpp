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

// Per-row uniform affine quantization:
//
//   Q(x) = s * (clamp(round(x / s) + z, 0, 2^n - 1) - z)
//
// with rounding half away from zero.

#include "attnq/linalg.hpp"

#include <cstdint>
#include <vector>

namespace attnq {

using IntMatrix = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct QuantSpec
{
  int n_bits = 4;
  Vector scale;                         // per row, > 0
  Eigen::Matrix<std::int32_t, Eigen::Dynamic, 1> zero_point; // per row, in [0, 2^n - 1]

  std::int32_t grid_max() const { return (std::int32_t{1} << n_bits) - 1; }
  Eigen::Index rows() const { return scale.size(); }

  void validate() const;
};

struct QuantizedWeight
{
  IntMatrix w_int;
  QuantSpec spec;
  /// Set when OPTQ could not factor the damped Hessian and fell back to RTN.
  bool fell_back_to_rtn = false;

  Matrix dequantize() const;
};

/// Scale assigned to an all-zero row.
inline constexpr double kZeroRowScale = 1e-8;

/// Clip ratios searched by fit_step_size: 128 values uniform in [0.4, 1.0].
inline constexpr int kClipCandidates = 128;
inline constexpr double kClipMin = 0.4;

/// Damping added to the OPTQ Hessian: 0.01 * mean(diag(H)).
inline constexpr double kOptqDamping = 0.01;

double round_half_away(double x);

std::int32_t quantize_int(double x, double s, std::int32_t z, int n_bits);

double quantize_value(double x, double s, std::int32_t z, int n_bits);

/// (scale, zero_point) for the clipped range [ratio * min(row, 0), ratio * max(row, 0)].
struct GridParams
{
  double scale;
  std::int32_t zero_point;
};
GridParams grid_for_range(double lo, double hi, int n_bits);

/// Candidate grids evaluated for one row, largest clip ratio first.
std::vector<GridParams> step_size_candidates(const RowVector &row, int n_bits);

/// Row contribution dw_row * H * dw_row^T for nearest rounding on a grid.
double row_rounding_loss(const RowVector &row, const Matrix &hessian, const GridParams &g, int n_bits);

/// Per-row grid search minimizing the Hessian-weighted rounding loss. Ties go
/// to the larger scale.
QuantSpec fit_step_size(const Matrix &w, const Matrix &hessian, int n_bits);

QuantizedWeight rtn_quantize(const Matrix &w, const QuantSpec &spec);

/// Column-sequential quantization with inverse-Hessian error compensation.
/// `updated_weights`, when non-null, receives the compensated full-precision
/// weights whose nearest rounding is the returned result.
QuantizedWeight optq_quantize(const Matrix &w, const Matrix &hessian, const QuantSpec &spec,
                              Matrix *updated_weights = nullptr);

} // namespace attnq
