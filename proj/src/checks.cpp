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

#include "attnq/checks.hpp"
#include "attnq/flops.hpp"
#include "attnq/oracle.hpp"
#include "attnq/quantizer.hpp"
#include "attnq/rounding.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace attnq {

namespace {

Matrix gaussian(std::mt19937_64 &rng, Eigen::Index r, Eigen::Index c, double sd = 1.0)
{
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = n(rng);
  return m;
}

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

CheckResult make(std::string name, double observed, double threshold, bool le = true)
{
  CheckResult r;
  r.name = std::move(name);
  r.observed = observed;
  r.threshold = threshold;
  r.passed = std::isfinite(observed) && (le ? observed <= threshold : observed >= threshold);
  return r;
}

CheckResult value_exactness(std::uint64_t seed, int trials)
{
  double worst = 0.0;
  for (int t = 0; t < trials; ++t)
  {
    const auto set = generate_synthetic(seed + t, 8, 4, 6, 4);
    std::mt19937_64 rng(seed ^ (0x9e37u + t));
    const Matrix dw = gaussian(rng, 4, 8, 0.1);
    const auto ctx = make_loss_context(ProjectionKind::Value, accumulate_stats(set.head, set.sequences));
    worst = std::max(worst, rel(loss(ctx, dw), exact_error(set.head, set.sequences, ProjectionKind::Value, dw)));
  }
  return make("value loss == exact attention error", worst, 1e-9);
}

CheckResult kron_identity(std::uint64_t seed, int trials)
{
  double worst = 0.0;
  for (int t = 0; t < trials; ++t)
  {
    const auto set = generate_synthetic(seed + t, 6, 3, 5, 1);
    std::mt19937_64 rng(seed ^ (0x51u + t));
    const Matrix dw = gaussian(rng, 3, 6, 0.1);
    const auto ctx = make_loss_context(ProjectionKind::Query, accumulate_stats(set.head, set.sequences));
    worst = std::max(worst, rel(loss(ctx, dw), kron_exact_query_loss(set.head, set.sequences, dw)));
  }
  return make("single-sequence query loss == Kronecker form", worst, 1e-9);
}

CheckResult taylor_gap(std::uint64_t seed)
{
  const auto set = generate_synthetic(seed, 8, 4, 6, 2);
  std::mt19937_64 rng(seed ^ 0x7au);
  const Matrix dw = gaussian(rng, 4, 8, 1.0 / std::sqrt(8.0));
  double prev = std::numeric_limits<double>::infinity();
  double last = 0.0;
  bool monotone = true;
  for (double eps : {0.1, 0.05, 0.025})
  {
    const Matrix d = eps * dw;
    const double ex = exact_error(set.head, set.sequences, ProjectionKind::Query, d);
    last = std::abs(ex - taylor_error(set.head, set.sequences, ProjectionKind::Query, d)) / ex;
    monotone = monotone && last <= prev;
    prev = last;
  }
  CheckResult r = make("Taylor gap shrinks with perturbation size", last, 0.5);
  r.passed = r.passed && monotone;
  if (!monotone)
    r.detail = "gap not monotone";
  return r;
}

CheckResult upper_bound(std::uint64_t seed, int trials)
{
  double worst = 0.0;
  int violations = 0;
  for (int t = 0; t < trials; ++t)
  {
    const auto set = generate_synthetic(seed + t, 8, 4, 6, 1);
    std::mt19937_64 rng(seed ^ (0x3bu + t));
    const OracleReport rep = upper_bound_check(set.head, set.sequences.front(), gaussian(rng, 4, 8));
    if (!rep.holds)
      ++violations;
    if (rep.bound > 0)
      worst = std::max(worst, rep.taylor_error / rep.bound);
  }
  CheckResult r = make("Taylor error <= bound", worst, 1.0 + 1e-9);
  r.passed = r.passed && violations == 0;
  r.detail = std::to_string(violations) + " violations";
  return r;
}

CheckResult gradient(std::uint64_t seed, int trials)
{
  double worst = 0.0;
  const double step = 1e-6;
  for (int t = 0; t < trials; ++t)
  {
    const auto set = generate_synthetic(seed + t, 5, 3, 4, 3);
    const auto ctx = make_loss_context(ProjectionKind::Key, accumulate_stats(set.head, set.sequences));
    std::mt19937_64 rng(seed ^ (0x11u + t));
    const Matrix dw = gaussian(rng, 3, 5);
    const Matrix g = loss_gradient(ctx, dw);
    Matrix fd(3, 5);
    for (Eigen::Index i = 0; i < dw.size(); ++i)
    {
      Matrix p = dw, m = dw;
      p.data()[i] += step;
      m.data()[i] -= step;
      fd.data()[i] = (loss(ctx, p) - loss(ctx, m)) / (2 * step);
    }
    worst = std::max(worst, (g - fd).norm() / std::max(g.norm(), 1e-300));
  }
  return make("loss gradient == finite differences", worst, 1e-4);
}

CheckResult optq_identity(std::uint64_t seed, int trials)
{
  int mismatches = 0;
  for (int t = 0; t < trials; ++t)
  {
    std::mt19937_64 rng(seed ^ (0x77u + t));
    const Matrix w = gaussian(rng, 4, 8);
    const Matrix eye = Matrix::Identity(8, 8);
    const QuantSpec spec = fit_step_size(w, eye, 3);
    if (optq_quantize(w, eye, spec).w_int != rtn_quantize(w, spec).w_int)
      ++mismatches;
  }
  CheckResult r = make("identity-Hessian OPTQ == RTN", mismatches, 0);
  r.detail = std::to_string(mismatches) + " mismatches";
  return r;
}

CheckResult flop_table()
{
  static const char *const expected[][3] = {{"125M", "6.7", "0.24"}, {"350M", "7.5", "0.42"},
                                            {"1.3B", "11", "1.6"},   {"2.7B", "15", "3.2"},
                                            {"6.7B", "34", "13"},    {"13B", "41", "20"}};
  int bad = 0;
  std::string detail;
  for (const auto &e : expected)
  {
    const CostRow row = cost_table({e[0]}).front();
    if (format_gflops(row.exist) != e[1])
      ++bad, detail += std::string(e[0]) + " exist ";
    if (format_gflops(row.aespa) != e[2])
      ++bad, detail += std::string(e[0]) + " aespa ";
  }
  CheckResult r = make("cost table cells", bad, 0);
  r.detail = bad ? detail : "12/12 cells";
  return r;
}

} // namespace

std::vector<CheckResult> run_oracle_checks(std::uint64_t seed, int trials)
{
  if (trials < 1)
    throw DataError("check: trials must be positive");
  return {value_exactness(seed, trials), kron_identity(seed, trials), taylor_gap(seed),
          upper_bound(seed, trials),     gradient(seed, trials),      optq_identity(seed, trials),
          flop_table()};
}

void write_check_table(std::ostream &os, const std::vector<CheckResult> &results)
{
  os << "# logits scaled by 1/sqrt(d_h); Taylor prefactor 1/d_h\n";
  os << std::left << std::setw(48) << "check" << std::setw(7) << "result" << std::setw(14) << "observed"
     << std::setw(12) << "threshold"
     << "detail\n";
  for (const auto &r : results)
  {
    std::ostringstream obs, thr;
    obs << std::setprecision(4) << r.observed;
    thr << std::setprecision(4) << r.threshold;
    os << std::left << std::setw(48) << r.name << std::setw(7) << (r.passed ? "PASS" : "FAIL") << std::setw(14)
       << obs.str() << std::setw(12) << thr.str() << r.detail << "\n";
  }
}

} // namespace attnq
