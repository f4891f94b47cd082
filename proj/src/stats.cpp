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

#include "attnq/stats.hpp"

#include <future>

namespace attnq {

namespace {

void check_psd(const Matrix &m, const char *name)
{
  if (!is_symmetric(m, 1e-9))
    throw NumericalError(std::string("CalibStats ") + name + " is not symmetric");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (min_eigenvalue(m) < -1e-8 * scale)
    throw NumericalError(std::string("CalibStats ") + name + " is not positive semidefinite");
}

StatsAccumulator reduce_range(const AttentionHead &head, const std::vector<CalibSequence> &seqs,
                              std::size_t lo, std::size_t hi, std::size_t grain)
{
  if (hi - lo == 1)
    return StatsAccumulator::from_sequence(head, seqs[lo]);
  const std::size_t mid = lo + (hi - lo) / 2;
  StatsAccumulator left;
  StatsAccumulator right;
  if (hi - lo > grain)
  {
    auto fut = std::async(std::launch::async, reduce_range, std::cref(head), std::cref(seqs), lo, mid,
                          grain);
    right = reduce_range(head, seqs, mid, hi, grain);
    left = fut.get();
  }
  else
  {
    left = reduce_range(head, seqs, lo, mid, grain);
    right = reduce_range(head, seqs, mid, hi, grain);
  }
  left.merge(right);
  return left;
}

} // namespace

void CalibStats::validate() const
{
  if (n_sequences < 1)
    throw DataError("CalibStats: built from zero sequences");
  check_psd(exx, "exx");
  check_psd(exax, "exax");
  check_psd(ektk, "ektk");
  check_psd(eqtq, "eqtq");
  if (exax.rows() != exx.rows() || ektk.rows() != eqtq.rows())
    throw ShapeError("CalibStats: inconsistent statistic sizes");
}

StatsAccumulator StatsAccumulator::zeros(Eigen::Index d, Eigen::Index d_h)
{
  StatsAccumulator acc;
  acc.sum_xx = Matrix::Zero(d, d);
  acc.sum_xax = Matrix::Zero(d, d);
  acc.sum_ktk = Matrix::Zero(d_h, d_h);
  acc.sum_qtq = Matrix::Zero(d_h, d_h);
  return acc;
}

StatsAccumulator StatsAccumulator::from_sequence(const AttentionHead &head, const CalibSequence &seq)
{
  const AttentionTrace t = attention_forward(head, seq);
  StatsAccumulator acc;
  acc.sum_xx = seq.x * seq.x.transpose();
  const Matrix xat = seq.x * t.a.transpose();
  acc.sum_xax = xat * xat.transpose();
  acc.sum_ktk = t.k.transpose() * t.k;
  acc.sum_qtq = t.q.transpose() * t.q;
  acc.count = 1;
  return acc;
}

void StatsAccumulator::merge(const StatsAccumulator &other)
{
  if (count == 0)
  {
    *this = other;
    return;
  }
  if (other.count == 0)
    return;
  sum_xx += other.sum_xx;
  sum_xax += other.sum_xax;
  sum_ktk += other.sum_ktk;
  sum_qtq += other.sum_qtq;
  count += other.count;
}

CalibStats StatsAccumulator::finalize() const
{
  if (count == 0)
    throw DataError("accumulate_stats: no sequences");
  const double inv = 1.0 / static_cast<double>(count);
  CalibStats s;
  s.exx = sum_xx * inv;
  s.exax = sum_xax * inv;
  s.ektk = sum_ktk * inv;
  s.eqtq = sum_qtq * inv;
  s.n_sequences = count;
  return s;
}

CalibStats accumulate_stats(const AttentionHead &head, const std::vector<CalibSequence> &sequences,
                            std::size_t parallel_grain)
{
  head.validate();
  check_sequences(sequences, head.d);
  return reduce_range(head, sequences, 0, sequences.size(), std::max<std::size_t>(parallel_grain, 2))
    .finalize();
}

} // namespace attnq
