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
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace attnq;
using attnq::testing::gaussian;

namespace {

double weighted_error(const Matrix &w, const QuantizedWeight &q, const Matrix &h)
{
  const Matrix dw = w - q.dequantize();
  return trace_quadratic(dw, h);
}

QuantSpec one_row_spec(double s, std::int32_t z, int bits)
{
  QuantSpec spec;
  spec.n_bits = bits;
  spec.scale = Vector::Constant(1, s);
  spec.zero_point = Eigen::Matrix<std::int32_t, Eigen::Dynamic, 1>::Constant(1, z);
  return spec;
}

} // namespace

TEST(QuantizeValue, ZeroMapsToZero)
{
  for (std::int32_t z = 0; z < 4; ++z)
    EXPECT_EQ(quantize_value(0.0, 0.37, z, 2), 0.0);
}

TEST(QuantizeValue, HandEvaluations)
{
  EXPECT_EQ(quantize_value(2.7, 1.0, 0, 2), 3.0);
  EXPECT_EQ(quantize_value(-5.0, 1.0, 0, 2), 0.0);
  EXPECT_EQ(quantize_value(9.0, 1.0, 0, 2), 3.0);
}

TEST(QuantizeValue, TiesGoAwayFromZero)
{
  EXPECT_EQ(quantize_value(0.5, 1.0, 1, 2), 1.0);
  EXPECT_EQ(quantize_value(-0.5, 1.0, 1, 2), -1.0);
  EXPECT_EQ(round_half_away(2.5), 3.0);
  EXPECT_EQ(round_half_away(-2.5), -3.0);
}

TEST(QuantizeValue, Idempotent)
{
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int t = 0; t < 1000; ++t)
  {
    const double x = n(rng);
    const double q = quantize_value(x, 0.3, 5, 4);
    EXPECT_EQ(quantize_value(q, 0.3, 5, 4), q);
  }
}

TEST(QuantizeValue, RejectsNonPositiveScale)
{
  EXPECT_THROW(quantize_value(1.0, 0.0, 0, 2), DataError);
  EXPECT_THROW(quantize_value(1.0, -1.0, 0, 2), DataError);
}

TEST(FitStepSize, ExactlyRepresentableRowHasZeroLoss)
{
  Matrix w(1, 4);
  w << -1.0, 0.0, 1.0, 2.0;
  const QuantSpec spec = fit_step_size(w, Matrix::Identity(4, 4), 2);
  EXPECT_DOUBLE_EQ(spec.scale(0), 1.0);
  EXPECT_EQ(spec.zero_point(0), 1);
  EXPECT_EQ(rtn_quantize(w, spec).dequantize(), w);
}

TEST(FitStepSize, IdentityHessianMatchesExhaustiveCandidateSearch)
{
  std::mt19937_64 rng(2);
  const Matrix w = gaussian(rng, 6, 10);
  const Matrix eye = Matrix::Identity(10, 10);
  const QuantSpec spec = fit_step_size(w, eye, 3);
  for (Eigen::Index i = 0; i < w.rows(); ++i)
  {
    const RowVector row = w.row(i);
    double best = std::numeric_limits<double>::infinity();
    GridParams arg{};
    for (const auto &g : step_size_candidates(row, 3))
    {
      double err = 0;
      for (Eigen::Index j = 0; j < row.size(); ++j)
        err += std::pow(row(j) - quantize_value(row(j), g.scale, g.zero_point, 3), 2);
      if (err < best)
        best = err, arg = g;
    }
    EXPECT_EQ(spec.scale(i), arg.scale);
    EXPECT_EQ(spec.zero_point(i), arg.zero_point);
  }
}

TEST(FitStepSize, WeightedHessianFavorsHeavyCoordinate)
{
  Matrix w(1, 2);
  w << 1.0, 10.0;
  Matrix h = Matrix::Zero(2, 2);
  h(0, 0) = 100.0;
  h(1, 1) = 1.0;
  const QuantSpec weighted = fit_step_size(w, h, 2);
  const QuantSpec plain = fit_step_size(w, Matrix::Identity(2, 2), 2);

  double best = std::numeric_limits<double>::infinity();
  for (const auto &g : step_size_candidates(w.row(0), 2))
    best = std::min(best, row_rounding_loss(w.row(0), h, g, 2));
  const GridParams chosen{weighted.scale(0), weighted.zero_point(0)};
  EXPECT_EQ(row_rounding_loss(w.row(0), h, chosen, 2), best);

  const double err_weighted = std::abs(1.0 - quantize_value(1.0, weighted.scale(0), weighted.zero_point(0), 2));
  const double err_plain = std::abs(1.0 - quantize_value(1.0, plain.scale(0), plain.zero_point(0), 2));
  EXPECT_LT(err_weighted, err_plain);
}

TEST(FitStepSize, NeverWorseThanNoClipping)
{
  std::mt19937_64 rng(3);
  const Matrix r = gaussian(rng, 8, 8);
  const Matrix h = r * r.transpose();
  const Matrix w = gaussian(rng, 5, 8);
  const QuantSpec spec = fit_step_size(w, h, 2);
  for (Eigen::Index i = 0; i < w.rows(); ++i)
  {
    const RowVector row = w.row(i);
    const GridParams full = step_size_candidates(row, 2).front();
    EXPECT_LE(row_rounding_loss(row, h, {spec.scale(i), spec.zero_point(i)}, 2), row_rounding_loss(row, h, full, 2));
  }
}

TEST(FitStepSize, ArgminInvariantToHessianScaling)
{
  std::mt19937_64 rng(4);
  const Matrix r = gaussian(rng, 6, 6);
  const Matrix h = r * r.transpose();
  const Matrix w = gaussian(rng, 4, 6);
  const QuantSpec a = fit_step_size(w, h, 3);
  const QuantSpec b = fit_step_size(w, Matrix(8.0 * h), 3);
  EXPECT_EQ(a.scale, b.scale);
  EXPECT_EQ(a.zero_point, b.zero_point);
}

TEST(FitStepSize, ZeroRowGetsEpsilonScaleMidGrid)
{
  Matrix w = Matrix::Zero(2, 3);
  w(1, 2) = 0.5;
  const QuantSpec spec = fit_step_size(w, Matrix::Identity(3, 3), 4);
  EXPECT_EQ(spec.scale(0), 1e-8);
  EXPECT_EQ(spec.zero_point(0), 8);
  EXPECT_GT(spec.scale(1), 1e-3);
  EXPECT_EQ(rtn_quantize(w, spec).dequantize().row(0), RowVector::Zero(3));
}

TEST(FitStepSize, RejectsAsymmetricHessian)
{
  Matrix h = Matrix::Identity(2, 2);
  h(0, 1) = 0.5;
  EXPECT_THROW(fit_step_size(Matrix::Ones(1, 2), h, 2), NumericalError);
}

TEST(Rtn, OnGridWeightsAreUnchanged)
{
  const QuantSpec spec = one_row_spec(0.25, 3, 3);
  Matrix w(1, 4);
  w << -0.75, 0.0, 0.5, 1.0;
  EXPECT_EQ(rtn_quantize(w, spec).dequantize(), w);
}

TEST(Rtn, MidpointsErrExactlyHalfStep)
{
  const QuantSpec spec = one_row_spec(1.0, 4, 3);
  Matrix w(1, 3);
  w << 0.5, -1.5, 2.5;
  const Matrix err = (w - rtn_quantize(w, spec).dequantize()).cwiseAbs();
  EXPECT_EQ(err, Matrix::Constant(1, 3, 0.5));
}

TEST(Rtn, ErrorBoundedByHalfStepInsideClampRange)
{
  std::mt19937_64 rng(5);
  const Matrix w = gaussian(rng, 4, 50);
  const QuantSpec spec = fit_step_size(w, Matrix::Identity(50, 50), 3);
  const auto q = rtn_quantize(w, spec);
  const Matrix deq = q.dequantize();
  for (Eigen::Index i = 0; i < w.rows(); ++i)
  {
    const double s = spec.scale(i);
    const double lo = -s * spec.zero_point(i), hi = s * (spec.grid_max() - spec.zero_point(i));
    for (Eigen::Index j = 0; j < w.cols(); ++j)
    {
      EXPECT_GE(q.w_int(i, j), 0);
      EXPECT_LE(q.w_int(i, j), spec.grid_max());
      EXPECT_LE(std::abs(deq(i, j) - std::clamp(w(i, j), lo, hi)), s / 2 + 1e-12);
    }
  }
}

TEST(Rtn, SpecRowMismatch)
{
  EXPECT_THROW(rtn_quantize(Matrix::Ones(2, 2), one_row_spec(1.0, 0, 2)), ShapeError);
}

TEST(Optq, IdentityHessianEqualsRtn)
{
  std::mt19937_64 rng(6);
  for (int t = 0; t < 20; ++t)
  {
    const Matrix w = gaussian(rng, 4, 8);
    const Matrix eye = Matrix::Identity(8, 8);
    const QuantSpec spec = fit_step_size(w, eye, 2 + t % 3);
    EXPECT_EQ(optq_quantize(w, eye, spec).w_int, rtn_quantize(w, spec).w_int);
  }
}

TEST(Optq, SingleColumnEqualsRtn)
{
  std::mt19937_64 rng(7);
  const Matrix w = gaussian(rng, 5, 1);
  const Matrix h = Matrix::Constant(1, 1, 3.7);
  const QuantSpec spec = fit_step_size(w, h, 2);
  EXPECT_EQ(optq_quantize(w, h, spec).w_int, rtn_quantize(w, spec).w_int);
}

TEST(Optq, UpdatedWeightsRoundToResult)
{
  std::mt19937_64 rng(8);
  const Matrix r = gaussian(rng, 8, 8);
  const Matrix h = r * r.transpose();
  const Matrix w = gaussian(rng, 4, 8);
  const QuantSpec spec = fit_step_size(w, h, 3);
  Matrix updated;
  const auto q = optq_quantize(w, h, spec, &updated);
  EXPECT_EQ(rtn_quantize(updated, spec).w_int, q.w_int);
  EXPECT_EQ(updated.col(0), w.col(0));
}

TEST(Optq, SecondColumnIsOptimalGivenFirst)
{
  // For a 1x2 row the first entry is rounded as in RTN; the second must then be
  // the best grid value for the remaining one-dimensional quadratic.
  Matrix h(2, 2);
  h << 2, 1, 1, 2;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 100; ++t)
  {
    Matrix w(1, 2);
    w << u(rng), u(rng);
    const QuantSpec spec = fit_step_size(w, h, 2);
    const auto q = optq_quantize(w, h, spec);
    const double got = weighted_error(w, q, h);
    for (std::int32_t b = 0; b <= spec.grid_max(); ++b)
    {
      QuantizedWeight alt = q;
      alt.w_int(0, 1) = b;
      EXPECT_LE(got, weighted_error(w, alt, h) * (1 + 1e-9) + 1e-15);
    }
    EXPECT_LE(got, weighted_error(w, rtn_quantize(w, spec), h) * (1 + 1e-12) + 1e-15);
  }
}

TEST(Optq, RarelyWorseThanRtn)
{
  std::mt19937_64 rng(10);
  int not_worse = 0;
  for (int t = 0; t < 100; ++t)
  {
    const Matrix mix = gaussian(rng, 8, 8);
    const Matrix x = mix * gaussian(rng, 8, 64);
    const Matrix h = 2.0 * x * x.transpose() / 64.0;
    const Matrix w = gaussian(rng, 4, 8);
    const QuantSpec spec = fit_step_size(w, h, 3);
    if (weighted_error(w, optq_quantize(w, h, spec), h) <= weighted_error(w, rtn_quantize(w, spec), h) * (1 + 1e-12))
      ++not_worse;
  }
  EXPECT_GE(not_worse, 95);
}

TEST(Optq, SingularHessianFallsBackToRtn)
{
  std::mt19937_64 rng(11);
  const Matrix w = gaussian(rng, 3, 4);
  const QuantSpec spec = fit_step_size(w, Matrix::Identity(4, 4), 2);
  Matrix updated;
  const auto q = optq_quantize(w, Matrix::Zero(4, 4), spec, &updated);
  EXPECT_TRUE(q.fell_back_to_rtn);
  EXPECT_EQ(q.w_int, rtn_quantize(w, spec).w_int);
  EXPECT_EQ(updated, w);
  EXPECT_FALSE(optq_quantize(w, Matrix::Identity(4, 4), spec).fell_back_to_rtn);
}

TEST(QuantSpec, Validation)
{
  EXPECT_THROW(one_row_spec(1.0, 0, 1).validate(), DataError);
  EXPECT_THROW(one_row_spec(0.0, 0, 2).validate(), DataError);
  EXPECT_THROW(one_row_spec(1.0, 4, 2).validate(), DataError);
  EXPECT_NO_THROW(one_row_spec(1.0, 3, 2).validate());
}
