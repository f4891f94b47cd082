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

namespace attnq {

std::string_view to_string(ProjectionKind k)
{
  switch (k)
  {
    case ProjectionKind::Value:
      return "value";
    case ProjectionKind::Query:
      return "query";
    case ProjectionKind::Key:
      return "key";
    case ProjectionKind::Other:
      return "other";
  }
  return "?";
}

std::optional<ProjectionKind> parse_projection_kind(std::string_view s)
{
  for (auto k : {ProjectionKind::Value, ProjectionKind::Query, ProjectionKind::Key, ProjectionKind::Other})
    if (s == to_string(k))
      return k;
  return std::nullopt;
}

ProjectionKind kind_for(Projection p)
{
  switch (p)
  {
    case Projection::Query:
      return ProjectionKind::Query;
    case Projection::Key:
      return ProjectionKind::Key;
    case Projection::Value:
      break;
  }
  return ProjectionKind::Value;
}

LossContext make_loss_context(ProjectionKind kind, const CalibStats &stats)
{
  LossContext ctx;
  ctx.kind = kind;
  const Eigen::Index d_h = stats.ektk.rows();
  switch (kind)
  {
    case ProjectionKind::Query:
      ctx.left = stats.ektk;
      ctx.right = stats.exx;
      break;
    case ProjectionKind::Key:
      ctx.left = stats.eqtq;
      ctx.right = stats.exx;
      break;
    case ProjectionKind::Value:
      ctx.left = Matrix::Identity(d_h, d_h);
      ctx.right = stats.exax;
      break;
    case ProjectionKind::Other:
      ctx.left = Matrix::Identity(d_h, d_h);
      ctx.right = stats.exx;
      break;
  }
  return ctx;
}

namespace {

void check_delta(const LossContext &ctx, const Matrix &delta_w)
{
  require_shape(delta_w, ctx.left.rows(), ctx.right.rows(), "loss delta_w");
}

// left * dW * right (left skipped when it is the identity).
Matrix weighted(const LossContext &ctx, const Matrix &delta_w, OpCounter *counter)
{
  const auto d_h = delta_w.rows();
  const auto d = delta_w.cols();
  Matrix right_prod = delta_w * ctx.right;
  count_matmul(counter, d_h, d, d);
  if (ctx.left_is_identity())
    return right_prod;
  count_matmul(counter, d_h, d_h, d);
  return ctx.left * right_prod;
}

} // namespace

double loss(const LossContext &ctx, const Matrix &delta_w, OpCounter *counter)
{
  check_delta(ctx, delta_w);
  const Matrix w = weighted(ctx, delta_w, counter);
  count_dot(counter, delta_w.size());
  return w.cwiseProduct(delta_w).sum();
}

Matrix loss_gradient(const LossContext &ctx, const Matrix &delta_w, OpCounter *counter)
{
  check_delta(ctx, delta_w);
  Matrix g = weighted(ctx, delta_w, counter);
  count(counter, g.size());
  return 2.0 * g;
}

Matrix row_hessian(const LossContext &ctx) { return 2.0 * ctx.right; }

} // namespace attnq
