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

namespace attnq {

namespace {

void check_delta(const AttentionHead &head, const Matrix &delta_w, const char *what)
{
  require_shape(delta_w, head.d_h, head.d, what);
}

// Linearized attention change for one sequence: rows dlogits_l * J(a_l) / sqrt(d_h).
Matrix linearized_attention_delta(const AttentionHead &head, const AttentionTrace &t, const Matrix &dlogits)
{
  const double scale = logit_scale(head);
  Matrix da(t.a.rows(), t.a.cols());
  for (Eigen::Index l = 0; l < t.a.rows(); ++l)
    da.row(l) = scale * dlogits.row(l) * softmax_jacobian_row(t.a.row(l));
  return da;
}

Matrix logit_delta(ProjectionKind kind, const AttentionTrace &t, const Matrix &x, const Matrix &delta_w)
{
  const Matrix dproj = (delta_w * x).transpose(); // L x d_h
  if (kind == ProjectionKind::Query)
    return dproj * t.k.transpose();
  return t.q * dproj.transpose();
}

void require_query_or_key(ProjectionKind kind, const char *what)
{
  if (kind != ProjectionKind::Query && kind != ProjectionKind::Key)
    throw DataError(std::string(what) + ": kind must be query or key");
}

} // namespace

Projection projection_for(ProjectionKind kind)
{
  switch (kind)
  {
    case ProjectionKind::Query:
      return Projection::Query;
    case ProjectionKind::Key:
      return Projection::Key;
    case ProjectionKind::Value:
    case ProjectionKind::Other:
      break;
  }
  return Projection::Value;
}

double exact_error(const AttentionHead &head, const std::vector<CalibSequence> &seqs, ProjectionKind kind,
                   const Matrix &delta_w)
{
  check_delta(head, delta_w, "exact_error delta_w");
  check_sequences(seqs, head.d);
  const Projection p = projection_for(kind);
  const AttentionHead perturbed = head.with_weight(p, head.weight(p) + delta_w);
  return attention_error(head, perturbed, seqs);
}

double attention_error(const AttentionHead &reference, const AttentionHead &quantized,
                       const std::vector<CalibSequence> &seqs)
{
  check_sequences(seqs, reference.d);
  double total = 0.0;
  for (const auto &s : seqs)
    total += (attention_forward(quantized, s).sa - attention_forward(reference, s).sa).squaredNorm();
  return total / static_cast<double>(seqs.size());
}

double taylor_error(const AttentionHead &head, const std::vector<CalibSequence> &seqs, ProjectionKind kind,
                    const Matrix &delta_w)
{
  require_query_or_key(kind, "taylor_error");
  check_delta(head, delta_w, "taylor_error delta_w");
  check_sequences(seqs, head.d);
  double total = 0.0;
  for (const auto &s : seqs)
  {
    const AttentionTrace t = attention_forward(head, s);
    const Matrix da = linearized_attention_delta(head, t, logit_delta(kind, t, s.x, delta_w));
    total += (da * t.v).squaredNorm();
  }
  return total / static_cast<double>(seqs.size());
}

double projection_surrogate(const AttentionHead &head, const std::vector<CalibSequence> &seqs,
                            ProjectionKind kind, const Matrix &delta_w)
{
  require_query_or_key(kind, "projection_surrogate");
  check_delta(head, delta_w, "projection_surrogate delta_w");
  check_sequences(seqs, head.d);
  double total = 0.0;
  for (const auto &s : seqs)
  {
    const AttentionTrace t = attention_forward(head, s);
    const Matrix &other = kind == ProjectionKind::Query ? t.k : t.q;
    total += (other * delta_w * s.x).squaredNorm();
  }
  return total / static_cast<double>(seqs.size());
}

double kron_exact_query_loss(const AttentionHead &head, const std::vector<CalibSequence> &seqs,
                             const Matrix &delta_w, std::size_t budget)
{
  check_delta(head, delta_w, "kron_exact_query_loss delta_w");
  check_sequences(seqs, head.d);
  const Eigen::Index n = head.d * head.d_h;
  if (static_cast<std::size_t>(n) * static_cast<std::size_t>(n) > budget)
    throw BudgetError("kron_exact_query_loss: (d*d_h)^2 = " + std::to_string(n * n) + " exceeds budget");
  Matrix expected = Matrix::Zero(n, n);
  for (const auto &s : seqs)
  {
    const AttentionTrace t = attention_forward(head, s);
    expected += kron(Matrix(s.x * s.x.transpose()), Matrix(t.k.transpose() * t.k), budget);
  }
  expected /= static_cast<double>(seqs.size());
  const Vector dw = vec(delta_w);
  return dw.dot(expected * dw);
}

double kron_quadratic_form(const Matrix &m_x, const Matrix &m_k, const Matrix &delta_w, std::size_t budget)
{
  require_shape(delta_w, m_k.rows(), m_x.rows(), "kron_quadratic_form delta_w");
  const Vector dw = vec(delta_w);
  return dw.dot(kron(m_x, m_k, budget) * dw);
}

OracleReport upper_bound_check(const AttentionHead &head, const CalibSequence &seq, const Matrix &delta_w)
{
  check_delta(head, delta_w, "upper_bound_check delta_w");
  const std::vector<CalibSequence> one{seq};
  const AttentionTrace t = attention_forward(head, seq);

  OracleReport r;
  double factor = 0.0;
  for (Eigen::Index l = 0; l < t.a.rows(); ++l)
    factor += (t.v.transpose() * softmax_jacobian_row(t.a.row(l))).squaredNorm();
  r.bound_factor = factor;
  r.surrogate_loss = (t.k * delta_w * seq.x).squaredNorm();
  r.taylor_error = taylor_error(head, one, ProjectionKind::Query, delta_w);
  r.exact_error = exact_error(head, one, ProjectionKind::Query, delta_w);
  r.relative_gap = r.exact_error > 0.0 ? std::abs(r.exact_error - r.taylor_error) / r.exact_error : 0.0;
  r.bound = r.bound_factor * r.surrogate_loss / static_cast<double>(head.d_h);
  r.holds = r.taylor_error <= r.bound * (1.0 + 1e-9);
  return r;
}

Matrix tightest_query_direction(const AttentionHead &head, const CalibSequence &seq, int iterations)
{
  const AttentionTrace t = attention_forward(head, seq);
  const Eigen::Index n = head.d_h * head.d;
  const Eigen::Index len = seq.x.cols();
  Eigen::MatrixXd lin(len * head.d_h, n); // dW -> dA V
  Eigen::MatrixXd sur(len * len, n);      // dW -> K dW X
  for (Eigen::Index k = 0; k < n; ++k)
  {
    Vector e = Vector::Zero(n);
    e(k) = 1.0;
    const Matrix dw = unvec(e, head.d_h, head.d);
    const Matrix da = linearized_attention_delta(head, t, logit_delta(ProjectionKind::Query, t, seq.x, dw));
    lin.col(k) = vec(Matrix(da * t.v));
    sur.col(k) = vec(Matrix(t.k * dw * seq.x));
  }
  const Eigen::MatrixXd num = lin.transpose() * lin;
  Eigen::MatrixXd den = sur.transpose() * sur;
  den.diagonal().array() += 1e-12 * std::max(1.0, den.diagonal().maxCoeff());
  const Eigen::LDLT<Eigen::MatrixXd> solver(den);

  Vector v = Vector::Ones(n).normalized();
  for (int it = 0; it < iterations; ++it)
  {
    Vector next = solver.solve(num * v);
    const double norm = next.norm();
    if (!(norm > 0.0))
      break;
    v = next / norm;
  }
  return unvec(v, head.d_h, head.d);
}

JointCost joint_qk_cost_demo(const AttentionHead &head, const std::vector<CalibSequence> &seqs,
                             const Matrix &delta_wq, const Matrix &delta_wk)
{
  check_delta(head, delta_wq, "joint_qk_cost_demo delta_wq");
  check_delta(head, delta_wk, "joint_qk_cost_demo delta_wk");
  const Eigen::Index len = check_sequences(seqs, head.d);
  const Eigen::Index d = head.d;
  const Eigen::Index dh = head.d_h;
  JointCost out;
  double total = 0.0;
  for (const auto &s : seqs)
  {
    const Matrix q = (head.w_q * s.x).transpose();
    const Matrix k = (head.w_k * s.x).transpose();
    const Matrix dq = (delta_wq * s.x).transpose();
    const Matrix dk = (delta_wk * s.x).transpose();
    out.ops.matmul(dh, d, len);
    out.ops.matmul(dh, d, len);
    out.ops.matmul(dh, d, len);
    out.ops.matmul(dh, d, len);
    const Matrix e = dq * k.transpose() + q * dk.transpose() + dq * dk.transpose();
    out.ops.matmul(len, dh, len);
    out.ops.matmul(len, dh, len);
    out.ops.matmul(len, dh, len);
    out.ops.add(2 * len * len);
    total += e.squaredNorm();
    out.ops.dot(len * len);
  }
  out.error = total / static_cast<double>(seqs.size());
  return out;
}

} // namespace attnq
