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

#include "attnq/objectives.hpp"
#include "attnq/quantizer.hpp"
#include "attnq/stats.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace attnq;
using attnq::testing::gaussian;
using attnq::testing::rel_diff;
using attnq::testing::rel_frobenius;

TEST(AccumulateStats, SingleSequenceIsExactOuterProduct)
{
  const auto s = generate_synthetic(1, 6, 3, 5, 1);
  const auto st = accumulate_stats(s.head, s.sequences);
  const auto &x = s.sequences[0].x;
  EXPECT_EQ(st.exx, Matrix(x * x.transpose()));
  EXPECT_EQ(st.n_sequences, 1u);
}

TEST(AccumulateStats, ZeroInputGivesZeroStats)
{
  const auto s = generate_synthetic(2, 6, 3, 5, 1);
  const std::vector<CalibSequence> zeros(3, CalibSequence{Matrix::Zero(6, 5)});
  const auto st = accumulate_stats(s.head, zeros);
  EXPECT_EQ(st.exx, Matrix::Zero(6, 6));
  EXPECT_EQ(st.exax, Matrix::Zero(6, 6));
  EXPECT_EQ(st.ektk, Matrix::Zero(3, 3));
  EXPECT_EQ(st.eqtq, Matrix::Zero(3, 3));
}

TEST(AccumulateStats, TwoSequencesAreElementwiseMean)
{
  const auto s = generate_synthetic(3, 6, 3, 5, 2);
  const auto both = accumulate_stats(s.head, s.sequences);
  const auto a = accumulate_stats(s.head, {s.sequences[0]});
  const auto b = accumulate_stats(s.head, {s.sequences[1]});
  EXPECT_LT((both.exx - 0.5 * (a.exx + b.exx)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((both.exax - 0.5 * (a.exax + b.exax)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((both.ektk - 0.5 * (a.ektk + b.ektk)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((both.eqtq - 0.5 * (a.eqtq + b.eqtq)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(AccumulateStats, Errors)
{
  const auto s = generate_synthetic(4, 6, 3, 5, 2);
  EXPECT_THROW(accumulate_stats(s.head, {}), DataError);
  EXPECT_THROW(accumulate_stats(s.head, {CalibSequence{Matrix::Zero(5, 5)}}), ShapeError);
  EXPECT_THROW(accumulate_stats(s.head, {s.sequences[0], CalibSequence{Matrix::Zero(6, 4)}}), ShapeError);
}

TEST(AccumulateStats, TraceIdentities)
{
  const auto s = generate_synthetic(5, 8, 4, 6, 10);
  const auto st = accumulate_stats(s.head, s.sequences);
  std::mt19937_64 rng(5);
  const Matrix dw = gaussian(rng, 4, 8);
  double plain = 0, attn = 0;
  for (const auto &seq : s.sequences)
  {
    const auto t = attention_forward(s.head, seq);
    plain += (dw * seq.x).squaredNorm();
    attn += (dw * seq.x * t.a.transpose()).squaredNorm();
  }
  plain /= 10;
  attn /= 10;
  EXPECT_LT(rel_diff(trace_quadratic(dw, st.exx), plain), 1e-9);
  EXPECT_LT(rel_diff(trace_quadratic(dw, st.exax), attn), 1e-9);
}

TEST(AccumulateStats, AllStatisticsSymmetricPsd)
{
  const auto s = generate_synthetic(6, 8, 4, 6, 9);
  const auto st = accumulate_stats(s.head, s.sequences);
  for (const Matrix *m : {&st.exx, &st.exax, &st.ektk, &st.eqtq})
  {
    EXPECT_TRUE(is_symmetric(*m, 1e-9));
    EXPECT_GE(min_eigenvalue(*m), -1e-8);
  }
  EXPECT_NO_THROW(st.validate());
}

TEST(AccumulateStats, ScalingInputsScalesStatsAndKeepsArgmin)
{
  const auto s = generate_synthetic(7, 8, 4, 6, 8);
  auto scaled = s.sequences;
  const double c = 3.0;
  for (auto &q : scaled)
    q.x *= c;
  const auto a = accumulate_stats(s.head, s.sequences);
  const auto b = accumulate_stats(s.head, scaled);
  EXPECT_LT(rel_frobenius(b.exx, Matrix(c * c * a.exx)), 1e-12);

  std::mt19937_64 rng(7);
  const Matrix w = gaussian(rng, 4, 8, 0.3);
  const auto sa = fit_step_size(w, Matrix(2 * a.exx), 3);
  const auto sb = fit_step_size(w, Matrix(2 * b.exx), 3);
  EXPECT_EQ(sa.scale, sb.scale);
  EXPECT_EQ(sa.zero_point, sb.zero_point);
}

TEST(StatsAccumulator, MergeIsAssociativeOverPartitions)
{
  const auto s = generate_synthetic(8, 6, 3, 4, 7);
  auto left = StatsAccumulator::zeros(6, 3);
  for (int i = 0; i < 3; ++i)
    left.merge(StatsAccumulator::from_sequence(s.head, s.sequences[i]));
  auto right = StatsAccumulator::zeros(6, 3);
  for (int i = 3; i < 7; ++i)
    right.merge(StatsAccumulator::from_sequence(s.head, s.sequences[i]));
  left.merge(right);
  EXPECT_EQ(left.count, 7u);
  const auto merged = left.finalize();
  const auto direct = accumulate_stats(s.head, s.sequences);
  EXPECT_LT(rel_frobenius(merged.exx, direct.exx), 1e-14);
  EXPECT_LT(rel_frobenius(merged.exax, direct.exax), 1e-14);
  EXPECT_LT(rel_frobenius(merged.ektk, direct.ektk), 1e-14);
}

TEST(AccumulateStats, ParallelAndSerialAgreeBitForBit)
{
  const auto s = generate_synthetic(9, 6, 3, 4, 200);
  const auto serial = accumulate_stats(s.head, s.sequences, 1000);
  const auto parallel = accumulate_stats(s.head, s.sequences, 8);
  EXPECT_EQ(serial.exx, parallel.exx);
  EXPECT_EQ(serial.exax, parallel.exax);
  EXPECT_EQ(serial.eqtq, parallel.eqtq);
}

TEST(CalibStats, RejectsIndefiniteAndEmpty)
{
  const auto s = generate_synthetic(10, 4, 2, 4, 2);
  auto st = accumulate_stats(s.head, s.sequences);
  st.n_sequences = 0;
  EXPECT_THROW(st.validate(), DataError);
  st.n_sequences = 2;
  st.exx(0, 0) = -100;
  EXPECT_THROW(st.validate(), NumericalError);
}
