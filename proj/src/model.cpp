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

#include "attnq/model.hpp"

#include <random>
#include <utility>

namespace attnq {

std::string_view to_string(Projection p)
{
  switch (p)
  {
    case Projection::Query:
      return "W_Q";
    case Projection::Key:
      return "W_K";
    case Projection::Value:
      return "W_V";
  }
  return "?";
}

void AttentionHead::validate() const
{
  if (d < 1 || d_h < 1)
    throw ShapeError("AttentionHead: dimensions must be positive");
  if (d_h > d)
    throw ShapeError("AttentionHead: d_h must not exceed d");
  require_shape(w_q, d_h, d, "AttentionHead W_Q");
  require_shape(w_k, d_h, d, "AttentionHead W_K");
  require_shape(w_v, d_h, d, "AttentionHead W_V");
  require_finite(w_q, "AttentionHead W_Q");
  require_finite(w_k, "AttentionHead W_K");
  require_finite(w_v, "AttentionHead W_V");
}

const Matrix &AttentionHead::weight(Projection p) const
{
  switch (p)
  {
    case Projection::Query:
      return w_q;
    case Projection::Key:
      return w_k;
    case Projection::Value:
      break;
  }
  return w_v;
}

Matrix &AttentionHead::weight(Projection p)
{
  return const_cast<Matrix &>(std::as_const(*this).weight(p));
}

AttentionHead AttentionHead::with_weight(Projection p, Matrix w) const
{
  AttentionHead out = *this;
  require_shape(w, d_h, d, "with_weight");
  out.weight(p) = std::move(w);
  return out;
}

double logit_scale(const AttentionHead &head) { return 1.0 / std::sqrt(static_cast<double>(head.d_h)); }

AttentionTrace attention_forward(const AttentionHead &head, const CalibSequence &seq)
{
  if (seq.x.rows() != head.d)
    throw ShapeError("attention_forward: sequence has " + std::to_string(seq.x.rows()) +
                     " rows, head expects d=" + std::to_string(head.d));
  if (seq.x.cols() < 1)
    throw ShapeError("attention_forward: empty sequence");

  AttentionTrace t;
  t.q = (head.w_q * seq.x).transpose();
  t.k = (head.w_k * seq.x).transpose();
  t.v = (head.w_v * seq.x).transpose();
  t.a = softmax_rows((t.q * t.k.transpose()) * logit_scale(head));
  t.sa = t.a * t.v;
  return t;
}

SyntheticSet generate_synthetic(std::uint64_t seed, Eigen::Index d, Eigen::Index d_h,
                                Eigen::Index length, std::size_t n_sequences)
{
  if (d < 1 || d_h < 1 || length < 1 || n_sequences < 1)
    throw DataError("generate_synthetic: all dimensions must be >= 1");
  if (d_h > d)
    throw DataError("generate_synthetic: d_h must not exceed d");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double w_scale = 1.0 / std::sqrt(static_cast<double>(d));

  auto gaussian = [&](Eigen::Index r, Eigen::Index c, double scale) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i)
      m.data()[i] = normal(rng) * scale;
    return m;
  };

  SyntheticSet out;
  out.head.d = d;
  out.head.d_h = d_h;
  out.head.w_q = gaussian(d_h, d, w_scale);
  out.head.w_k = gaussian(d_h, d, w_scale);
  out.head.w_v = gaussian(d_h, d, w_scale);
  out.mixing = gaussian(d, d, w_scale);
  out.sequences.reserve(n_sequences);
  for (std::size_t s = 0; s < n_sequences; ++s)
    out.sequences.push_back({out.mixing * gaussian(d, length, 1.0)});
  return out;
}

Eigen::Index check_sequences(const std::vector<CalibSequence> &seqs, Eigen::Index d)
{
  if (seqs.empty())
    throw DataError("calibration set is empty");
  const Eigen::Index length = seqs.front().x.cols();
  if (length < 1)
    throw DataError("calibration sequence has no tokens");
  for (std::size_t i = 0; i < seqs.size(); ++i)
  {
    if (seqs[i].x.rows() != d)
      throw ShapeError("sequence " + std::to_string(i) + " has " + std::to_string(seqs[i].x.rows()) +
                       " rows, expected d=" + std::to_string(d));
    if (seqs[i].x.cols() != length)
      throw ShapeError("sequence " + std::to_string(i) + " length differs from sequence 0");
  }
  return length;
}

} // namespace attnq
