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

#include "attnq/oracle.hpp"
#include "attnq/pipeline.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace attnq;

namespace {

double median(std::vector<double> v)
{
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

QuantizeOptions options(Method m, int bits, int iterations = 2000)
{
  QuantizeOptions o;
  o.method = m;
  o.bits = bits;
  o.soft.iterations = iterations;
  return o;
}

} // namespace

TEST(QuantizeHead, AespaWithoutIterationsEqualsNoRoundByteForByte)
{
  const auto s = generate_synthetic(1, 16, 4, 8, 32);
  const auto a = quantize_head(s.head, s.sequences, options(Method::Aespa, 2, 0));
  const auto b = quantize_head(s.head, s.sequences, options(Method::AespaNoRound, 2));
  EXPECT_EQ(quantized_to_json(a.quantized, s.head).dump(), quantized_to_json(b.quantized, s.head).dump());
}

TEST(QuantizeHead, EightBitRtnIsNearLossless)
{
  const auto s = generate_synthetic(2, 16, 4, 8, 32);
  const auto out = quantize_head(s.head, s.sequences, options(Method::Rtn, 8));
  double norm = 0;
  for (const auto &q : s.sequences)
    norm += attention_forward(s.head, q).sa.squaredNorm();
  norm /= double(s.sequences.size());
  for (const auto &p : out.projections)
    EXPECT_LE(p.exact_error, 1e-4 * norm) << to_string(p.projection);
  EXPECT_LE(out.calib_attention_error, 1e-4 * norm);
}

TEST(QuantizeHead, ReportsAreDeterministic)
{
  const auto s = generate_synthetic(3, 16, 4, 8, 32);
  const auto opts = options(Method::Aespa, 2, 300);
  const auto a = quantize_head(s.head, s.sequences, opts);
  const auto b = quantize_head(s.head, s.sequences, opts);
  EXPECT_EQ(quantize_report(a, opts).dump(), quantize_report(b, opts).dump());
  EXPECT_EQ(quantized_to_json(a.quantized, s.head).dump(), quantized_to_json(b.quantized, s.head).dump());
}

TEST(QuantizeHead, OrderAndObjectivesRecorded)
{
  const auto s = generate_synthetic(4, 8, 2, 4, 8);
  auto opts = options(Method::Aespa, 3, 10);
  opts.order = {Projection::Key, Projection::Value};
  opts.value_kind = ProjectionKind::Other;
  const auto out = quantize_head(s.head, s.sequences, opts);
  ASSERT_EQ(out.projections.size(), 2u);
  EXPECT_EQ(out.projections[0].projection, Projection::Key);
  EXPECT_EQ(out.projections[0].kind, ProjectionKind::Key);
  EXPECT_EQ(out.projections[1].kind, ProjectionKind::Other);
  EXPECT_EQ(out.quantized.projections.count(Projection::Query), 0u);
  const json rep = quantize_report(out, opts);
  EXPECT_EQ(rep["schema_version"], kReportSchemaVersion);
  EXPECT_EQ(rep["order"], json::array({"W_K", "W_V"}));
  EXPECT_EQ(out.projections[0].trace.size(), 10u);
}

TEST(QuantizeHead, BaselinesUseLayerWiseObjective)
{
  const auto s = generate_synthetic(5, 8, 2, 4, 8);
  const auto out = quantize_head(s.head, s.sequences, options(Method::Optq, 3));
  for (const auto &p : out.projections)
    EXPECT_EQ(p.kind, ProjectionKind::Other);
}

TEST(QuantizeHead, OptionValidation)
{
  const auto s = generate_synthetic(6, 8, 2, 4, 8);
  auto bad_bits = options(Method::Rtn, 5);
  EXPECT_THROW(quantize_head(s.head, s.sequences, bad_bits), DataError);
  auto dup = options(Method::Rtn, 4);
  dup.order = {Projection::Value, Projection::Value};
  EXPECT_THROW(quantize_head(s.head, s.sequences, dup), DataError);
  auto kind = options(Method::Rtn, 4);
  kind.value_kind = ProjectionKind::Query;
  EXPECT_THROW(quantize_head(s.head, s.sequences, kind), DataError);
  EXPECT_THROW(quantize_head(s.head, {}, options(Method::Rtn, 4)), DataError);
}

TEST(QuantizeHead, ErrorsNameProjectionAndStage)
{
  const auto s = generate_synthetic(7, 8, 2, 4, 8);
  auto stats = accumulate_stats(s.head, s.sequences);
  stats.exax(0, 1) += 1.0;
  try
  {
    quantize_head(s.head, s.sequences, stats, options(Method::Aespa, 2, 5));
    FAIL() << "expected a numerical error";
  }
  catch (const NumericalError &e)
  {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("W_V"), std::string::npos) << msg;
    EXPECT_NE(msg.find("step-size"), std::string::npos) << msg;
  }
}

TEST(EvaluateHead, IdenticalWeightsGiveZeroError)
{
  auto s = generate_synthetic(8, 8, 2, 4, 6);
  QuantizedHead q;
  q.d = 8;
  q.d_h = 2;
  q.n_bits = 8;
  for (Projection p : {Projection::Query, Projection::Key, Projection::Value})
  {
    QuantizedWeight w;
    w.spec.n_bits = 8;
    w.spec.scale = Vector::Constant(2, 1.0 / 64);
    w.spec.zero_point = Eigen::Matrix<std::int32_t, Eigen::Dynamic, 1>::Constant(2, 128);
    w.w_int = (s.head.weight(p) * 64).array().round().cast<std::int32_t>() + 128;
    s.head.weight(p) = w.dequantize();
    q.projections[p] = std::move(w);
  }
  const auto r = evaluate_head(s.head, q.materialize(s.head), s.sequences);
  EXPECT_EQ(r.mean_attention_error, 0.0);
  EXPECT_EQ(r.relative_output_error, 0.0);
  EXPECT_EQ(eval_report(r)["schema_version"], kReportSchemaVersion);
}

TEST(EvaluateHead, EmptySetAndDimensionMismatch)
{
  const auto s = generate_synthetic(9, 8, 2, 4, 2);
  EXPECT_THROW(evaluate_head(s.head, s.head, {}), DataError);
  const auto other = generate_synthetic(9, 6, 2, 4, 2);
  EXPECT_THROW(evaluate_head(s.head, other.head, s.sequences), ShapeError);
}

TEST(EvaluateHead, AespaMedianNotWorseThanRtn)
{
  std::vector<double> rtn, aespa;
  for (std::uint64_t seed = 0; seed < 20; ++seed)
  {
    auto s = generate_synthetic(500 + seed, 16, 4, 8, 64);
    const std::vector<CalibSequence> held(s.sequences.begin() + 32, s.sequences.end());
    s.sequences.resize(32);
    const auto stats = accumulate_stats(s.head, s.sequences);
    for (auto [m, out] : {std::pair{Method::Rtn, &rtn}, std::pair{Method::Aespa, &aespa}})
    {
      const auto q = quantize_head(s.head, s.sequences, stats, options(m, 2));
      out->push_back(evaluate_head(s.head, q.quantized.materialize(s.head), held).mean_attention_error);
    }
  }
  EXPECT_LE(median(aespa), median(rtn));
}

TEST(QuantizedCheckpoint, RoundTripAndFullPrecisionPassThrough)
{
  const auto s = generate_synthetic(10, 8, 2, 4, 8);
  auto opts = options(Method::AespaNoRound, 3);
  opts.order = {Projection::Value};
  const auto out = quantize_head(s.head, s.sequences, opts);
  const json j = quantized_to_json(out.quantized, s.head);
  EXPECT_EQ(j["format"], "attnq-quantized");
  EXPECT_TRUE(j.contains("W_Q"));
  EXPECT_FALSE(j.contains("W_V"));
  AttentionHead fp;
  const QuantizedHead back = quantized_from_json(j, &fp);
  EXPECT_EQ(fp.w_q, s.head.w_q);
  EXPECT_EQ(back.projections.at(Projection::Value).w_int, out.quantized.projections.at(Projection::Value).w_int);
  EXPECT_EQ(back.materialize(s.head).w_v, out.quantized.materialize(s.head).w_v);

  json bad = j;
  bad["projections"]["W_V"]["w_int"][0][0] = 99;
  EXPECT_THROW(quantized_from_json(bad, nullptr), DataError);
}

TEST(StatsCache, RoundTrip)
{
  const auto s = generate_synthetic(11, 8, 2, 4, 8);
  const auto st = accumulate_stats(s.head, s.sequences);
  const auto back = stats_from_json(stats_to_json(st));
  EXPECT_EQ(back.exx, st.exx);
  EXPECT_EQ(back.exax, st.exax);
  EXPECT_EQ(back.ektk, st.ektk);
  EXPECT_EQ(back.eqtq, st.eqtq);
  EXPECT_EQ(back.n_sequences, 8u);
}

TEST(Method, Names)
{
  for (auto m : {Method::Rtn, Method::Optq, Method::Aespa, Method::AespaNoRound})
    EXPECT_EQ(parse_method(to_string(m)), m);
  EXPECT_FALSE(parse_method("gptq").has_value());
}
