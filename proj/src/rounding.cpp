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

#include "attnq/rounding.hpp"

#include <algorithm>
#include <ostream>

namespace attnq {

namespace {

double sigmoid(double b) { return 1.0 / (1.0 + std::exp(-b)); }

double base_level(double w, double s) { return std::floor(w / s); }

void check_spec(const Matrix &w, const QuantSpec &spec, const RoundingState &state)
{
  spec.validate();
  if (spec.rows() != w.rows())
    throw ShapeError("soft_quantize: spec rows do not match weight rows");
  require_shape(state.b, w.rows(), w.cols(), "soft_quantize logits");
}

} // namespace

double RectifiedSigmoid::operator()(double b) const
{
  return std::clamp(sigmoid(b) * (zeta - gamma) + gamma, 0.0, 1.0);
}

double RectifiedSigmoid::derivative(double b) const
{
  const double sg = sigmoid(b);
  const double stretched = sg * (zeta - gamma) + gamma;
  if (stretched <= 0.0 || stretched >= 1.0)
    return 0.0;
  return (zeta - gamma) * sg * (1.0 - sg);
}

double RectifiedSigmoid::inverse(double target) const
{
  const double p = (target - gamma) / (zeta - gamma);
  return std::log(p / (1.0 - p));
}

void SoftQuantConfig::validate() const
{
  if (iterations < 0)
    throw DataError("SoftQuantConfig: iterations must be >= 0");
  if (!(learning_rate > 0.0))
    throw DataError("SoftQuantConfig: learning_rate must be > 0");
  if (!(beta_start > 0.0) || !(beta_end > 0.0))
    throw DataError("SoftQuantConfig: beta must be > 0");
  if (lambda < 0.0)
    throw DataError("SoftQuantConfig: lambda must be >= 0");
  if (!(stretch.zeta > 1.0) || !(stretch.gamma < 0.0))
    throw DataError("SoftQuantConfig: stretch must satisfy zeta > 1 and gamma < 0");
}

double SoftQuantConfig::beta_at(int iteration) const
{
  const double span = anneal_fraction * static_cast<double>(iterations);
  const double t = span > 0.0 ? std::min(1.0, static_cast<double>(iteration) / span) : 1.0;
  return beta_start + (beta_end - beta_start) * t;
}

Matrix rounding_offsets(const RoundingState &state, const RectifiedSigmoid &h)
{
  return state.b.unaryExpr([&](double b) { return h(b); });
}

Matrix soft_quantize(const Matrix &w, const QuantSpec &spec, const RoundingState &state,
                     const RectifiedSigmoid &h)
{
  check_spec(w, spec, state);
  const double maxq = spec.grid_max();
  Matrix out(w.rows(), w.cols());
  for (Eigen::Index i = 0; i < w.rows(); ++i)
  {
    const double s = spec.scale(i);
    const double z = spec.zero_point(i);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
    {
      const double level = std::clamp(base_level(w(i, j), s) + z + h(state.b(i, j)), 0.0, maxq);
      out(i, j) = s * (level - z);
    }
  }
  return out;
}

RegularizerValue rounding_regularizer(const RoundingState &state, const RectifiedSigmoid &h)
{
  if (!(state.beta > 0.0))
    throw DataError("rounding_regularizer: beta must be > 0");
  RegularizerValue r;
  r.gradient.resize(state.b.rows(), state.b.cols());
  double sum = 0.0;
  for (Eigen::Index k = 0; k < state.b.size(); ++k)
  {
    const double b = state.b.data()[k];
    const double u = 2.0 * h(b) - 1.0;
    const double au = std::abs(u);
    sum += 1.0 - std::pow(au, state.beta);
    // d/dh (1 - |2h - 1|^beta) = -2 beta |u|^(beta - 1) sign(u)
    const double dr_dh = au > 0.0 ? -2.0 * state.beta * std::pow(au, state.beta - 1.0) * (u > 0 ? 1.0 : -1.0) : 0.0;
    r.gradient.data()[k] = state.lambda * dr_dh * h.derivative(b);
  }
  r.value = state.lambda * sum;
  return r;
}

RoundingState initial_rounding_state(const Matrix &w, const QuantSpec &spec, const SoftQuantConfig &cfg)
{
  spec.validate();
  if (spec.rows() != w.rows())
    throw ShapeError("initial_rounding_state: spec rows do not match weight rows");
  RoundingState st;
  st.lambda = cfg.lambda;
  st.beta = cfg.beta_at(0);
  st.b.resize(w.rows(), w.cols());
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j)
    {
      const double x = w(i, j) / spec.scale(i);
      st.b(i, j) = cfg.stretch.inverse(x - std::floor(x));
    }
  return st;
}

ObjectiveValue rounding_objective(const Matrix &target, const Matrix &base, const QuantSpec &spec,
                                  const LossContext &ctx, const RoundingState &state,
                                  const RectifiedSigmoid &h, OpCounter *counter)
{
  require_shape(target, base.rows(), base.cols(), "rounding_objective target");
  const Matrix soft = soft_quantize(base, spec, state, h);
  const Matrix delta = target - soft;
  count(counter, delta.size());

  // Loss and gradient share the weighted product left * dW * right.
  const Matrix grad_delta = loss_gradient(ctx, delta, counter);
  const double recon = 0.5 * grad_delta.cwiseProduct(delta).sum();
  count_dot(counter, delta.size());

  const RegularizerValue reg = rounding_regularizer(state, h);

  ObjectiveValue out;
  out.terms.reconstruction = recon;
  out.terms.regularizer = reg.value;
  out.terms.total = recon + reg.value;
  out.gradient.resize(base.rows(), base.cols());
  const double maxq = spec.grid_max();
  for (Eigen::Index i = 0; i < base.rows(); ++i)
  {
    const double s = spec.scale(i);
    const double z = spec.zero_point(i);
    for (Eigen::Index j = 0; j < base.cols(); ++j)
    {
      const double b = state.b(i, j);
      const double level = base_level(base(i, j), s) + z + h(b);
      // d soft / d h = s inside the grid, 0 where the level is clamped.
      const double inside = (level > 0.0 && level < maxq) ? 1.0 : 0.0;
      out.gradient(i, j) = -grad_delta(i, j) * s * inside * h.derivative(b) + reg.gradient(i, j);
    }
  }
  count(counter, 4 * delta.size());
  return out;
}

QuantizedWeight harden(const Matrix &base, const QuantSpec &spec, const RoundingState &state,
                       const RectifiedSigmoid &h)
{
  check_spec(base, spec, state);
  QuantizedWeight q;
  q.spec = spec;
  q.w_int.resize(base.rows(), base.cols());
  const double maxq = spec.grid_max();
  for (Eigen::Index i = 0; i < base.rows(); ++i)
    for (Eigen::Index j = 0; j < base.cols(); ++j)
    {
      const double up = h(state.b(i, j)) >= 0.5 ? 1.0 : 0.0;
      const double level = std::clamp(base_level(base(i, j), spec.scale(i)) + spec.zero_point(i) + up, 0.0, maxq);
      q.w_int(i, j) = static_cast<std::int32_t>(level);
    }
  return q;
}

RoundingResult optimize_rounding(const Matrix &target, const Matrix &base, const QuantSpec &spec,
                                 const LossContext &ctx, const SoftQuantConfig &cfg,
                                 OpCounter *iteration_counter)
{
  cfg.validate();
  require_shape(target, base.rows(), base.cols(), "optimize_rounding target");
  RoundingResult out;
  out.state = initial_rounding_state(base, spec, cfg);
  if (cfg.iterations == 0)
  {
    out.quantized = rtn_quantize(base, spec);
    return out;
  }

  RoundingState &st = out.state;
  Matrix m1 = Matrix::Zero(base.rows(), base.cols());
  Matrix m2 = Matrix::Zero(base.rows(), base.cols());
  double bias1 = 1.0;
  double bias2 = 1.0;
  st.loss_trace.reserve(cfg.iterations);
  for (int t = 0; t < cfg.iterations; ++t)
  {
    st.iteration = t;
    st.beta = cfg.beta_at(t);
    const ObjectiveValue obj =
      rounding_objective(target, base, spec, ctx, st, cfg.stretch, t == 0 ? iteration_counter : nullptr);
    st.loss_trace.push_back(obj.terms);

    bias1 *= cfg.adam_beta1;
    bias2 *= cfg.adam_beta2;
    m1 = cfg.adam_beta1 * m1 + (1.0 - cfg.adam_beta1) * obj.gradient;
    m2 = cfg.adam_beta2 * m2 + (1.0 - cfg.adam_beta2) * obj.gradient.cwiseProduct(obj.gradient);
    const double step = cfg.learning_rate / (1.0 - bias1);
    const double corr2 = 1.0 / (1.0 - bias2);
    st.b.array() -= step * m1.array() / ((m2.array() * corr2).sqrt() + cfg.adam_epsilon);
  }
  st.iteration = cfg.iterations;
  out.quantized = harden(base, spec, st, cfg.stretch);
  return out;
}

void write_loss_trace_csv(std::ostream &os, const std::vector<LossTerms> &trace, bool header)
{
  if (header)
    os << "iteration,total,reconstruction,regularizer\n";
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < trace.size(); ++i)
    os << i << ',' << trace[i].total << ',' << trace[i].reconstruction << ',' << trace[i].regularizer << '\n';
  os.precision(old);
}

} // namespace attnq
