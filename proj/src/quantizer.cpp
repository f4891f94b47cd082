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

#include "attnq/quantizer.hpp"

#include <algorithm>

namespace attnq {

void QuantSpec::validate() const
{
  if (n_bits < 2 || n_bits > 16)
    throw DataError("QuantSpec: n_bits must be in [2, 16], got " + std::to_string(n_bits));
  if (zero_point.size() != scale.size())
    throw ShapeError("QuantSpec: scale and zero_point lengths differ");
  for (Eigen::Index i = 0; i < scale.size(); ++i)
  {
    if (!(scale(i) > 0.0) || !std::isfinite(scale(i)))
      throw DataError("QuantSpec: scale[" + std::to_string(i) + "] must be positive");
    if (zero_point(i) < 0 || zero_point(i) > grid_max())
      throw DataError("QuantSpec: zero_point[" + std::to_string(i) + "] outside grid");
  }
}

Matrix QuantizedWeight::dequantize() const
{
  Matrix out(w_int.rows(), w_int.cols());
  for (Eigen::Index i = 0; i < w_int.rows(); ++i)
  {
    const double s = spec.scale(i);
    const std::int32_t z = spec.zero_point(i);
    for (Eigen::Index j = 0; j < w_int.cols(); ++j)
      out(i, j) = s * static_cast<double>(w_int(i, j) - z);
  }
  return out;
}

double round_half_away(double x) { return std::round(x); }

std::int32_t quantize_int(double x, double s, std::int32_t z, int n_bits)
{
  if (!(s > 0.0))
    throw DataError("quantize_value: scale must be positive");
  const double maxq = static_cast<double>((std::int64_t{1} << n_bits) - 1);
  const double q = std::clamp(round_half_away(x / s) + static_cast<double>(z), 0.0, maxq);
  return static_cast<std::int32_t>(q);
}

double quantize_value(double x, double s, std::int32_t z, int n_bits)
{
  return s * static_cast<double>(quantize_int(x, s, z, n_bits) - z);
}

GridParams grid_for_range(double lo, double hi, int n_bits)
{
  const std::int32_t maxq = (std::int32_t{1} << n_bits) - 1;
  if (!(hi > lo))
    return {kZeroRowScale, (maxq + 1) / 2};
  const double s = (hi - lo) / static_cast<double>(maxq);
  const auto z = static_cast<std::int32_t>(std::clamp(round_half_away(-lo / s), 0.0, static_cast<double>(maxq)));
  return {s, z};
}

std::vector<GridParams> step_size_candidates(const RowVector &row, int n_bits)
{
  const double lo = std::min(row.minCoeff(), 0.0);
  const double hi = std::max(row.maxCoeff(), 0.0);
  std::vector<GridParams> out;
  out.reserve(kClipCandidates);
  for (int k = 0; k < kClipCandidates; ++k)
  {
    const double ratio = 1.0 - (1.0 - kClipMin) * static_cast<double>(k) / (kClipCandidates - 1);
    out.push_back(grid_for_range(ratio * lo, ratio * hi, n_bits));
  }
  return out;
}

double row_rounding_loss(const RowVector &row, const Matrix &hessian, const GridParams &g, int n_bits)
{
  RowVector dw(row.size());
  for (Eigen::Index j = 0; j < row.size(); ++j)
    dw(j) = row(j) - quantize_value(row(j), g.scale, g.zero_point, n_bits);
  return (dw * hessian).dot(dw);
}

QuantSpec fit_step_size(const Matrix &w, const Matrix &hessian, int n_bits)
{
  require_shape(hessian, w.cols(), w.cols(), "fit_step_size hessian");
  if (!is_symmetric(hessian, 1e-9))
    throw NumericalError("fit_step_size: hessian is not symmetric");
  QuantSpec spec;
  spec.n_bits = n_bits;
  spec.scale.resize(w.rows());
  spec.zero_point.resize(w.rows());
  if (n_bits < 2 || n_bits > 16)
    throw DataError("fit_step_size: n_bits must be in [2, 16]");

  for (Eigen::Index i = 0; i < w.rows(); ++i)
  {
    const RowVector row = w.row(i);
    if (row.cwiseAbs().maxCoeff() == 0.0)
    {
      const GridParams g = grid_for_range(0.0, 0.0, n_bits);
      spec.scale(i) = g.scale;
      spec.zero_point(i) = g.zero_point;
      continue;
    }
    double best = std::numeric_limits<double>::infinity();
    GridParams chosen{};
    for (const GridParams &g : step_size_candidates(row, n_bits))
    {
      const double l = row_rounding_loss(row, hessian, g, n_bits);
      if (l < best)
      {
        best = l;
        chosen = g;
      }
    }
    spec.scale(i) = chosen.scale;
    spec.zero_point(i) = chosen.zero_point;
  }
  return spec;
}

QuantizedWeight rtn_quantize(const Matrix &w, const QuantSpec &spec)
{
  spec.validate();
  if (spec.rows() != w.rows())
    throw ShapeError("rtn_quantize: spec has " + std::to_string(spec.rows()) + " rows, weight has " +
                     std::to_string(w.rows()));
  QuantizedWeight out;
  out.spec = spec;
  out.w_int.resize(w.rows(), w.cols());
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      out.w_int(i, j) = quantize_int(w(i, j), spec.scale(i), spec.zero_point(i), spec.n_bits);
  return out;
}

QuantizedWeight optq_quantize(const Matrix &w, const Matrix &hessian, const QuantSpec &spec,
                              Matrix *updated_weights)
{
  spec.validate();
  if (spec.rows() != w.rows())
    throw ShapeError("optq_quantize: spec rows do not match weight rows");
  require_shape(hessian, w.cols(), w.cols(), "optq_quantize hessian");

  const Eigen::Index cols = w.cols();
  Eigen::MatrixXd damped = hessian;
  const double damp = kOptqDamping * damped.diagonal().mean();
  damped.diagonal().array() += damp;

  auto fallback = [&] {
    QuantizedWeight q = rtn_quantize(w, spec);
    q.fell_back_to_rtn = true;
    if (updated_weights)
      *updated_weights = w;
    return q;
  };

  Eigen::LLT<Eigen::MatrixXd> llt(damped);
  if (!(damp > 0.0) || llt.info() != Eigen::Success)
    return fallback();
  const Eigen::MatrixXd h_inv = llt.solve(Eigen::MatrixXd::Identity(cols, cols));
  Eigen::LLT<Eigen::MatrixXd> inv_llt(h_inv);
  if (inv_llt.info() != Eigen::Success || !all_finite(h_inv))
    return fallback();
  const Eigen::MatrixXd u = inv_llt.matrixU();

  Matrix work = w;
  QuantizedWeight out;
  out.spec = spec;
  out.w_int.resize(w.rows(), cols);
  for (Eigen::Index j = 0; j < cols; ++j)
  {
    for (Eigen::Index i = 0; i < w.rows(); ++i)
    {
      const double s = spec.scale(i);
      const std::int32_t z = spec.zero_point(i);
      const std::int32_t q = quantize_int(work(i, j), s, z, spec.n_bits);
      out.w_int(i, j) = q;
      const double err = (work(i, j) - s * static_cast<double>(q - z)) / u(j, j);
      for (Eigen::Index k = j + 1; k < cols; ++k)
        work(i, k) -= err * u(j, k);
    }
  }
  if (updated_weights)
    *updated_weights = std::move(work);
  return out;
}

} // namespace attnq
