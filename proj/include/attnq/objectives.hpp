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

#pragma once

// Attention-aware reconstruction losses. Each is a trace form
//
//   L(dW) = tr(left * dW * right * dW^T)
//
// with `left` and `right` taken from the pre-computed calibration statistics:
//
//   kind    left        right
//   Query   E[K^T K]    E[X X^T]
//   Key     E[Q^T Q]    E[X X^T]
//   Value   I           E[X A^T A X^T]
//   Other   I           E[X X^T]

#include "attnq/op_counter.hpp"
#include "attnq/stats.hpp"

#include <optional>
#include <string_view>

namespace attnq {

enum class ProjectionKind
{
  Value,
  Query,
  Key,
  Other
};

std::string_view to_string(ProjectionKind k);
std::optional<ProjectionKind> parse_projection_kind(std::string_view s);

/// Natural attention-aware kind for a projection.
ProjectionKind kind_for(Projection p);

struct LossContext
{
  ProjectionKind kind = ProjectionKind::Other;
  Matrix left;  // d_h x d_h; identity for Value/Other
  Matrix right; // d x d

  /// True when `left` is the identity and can be skipped.
  bool left_is_identity() const { return kind == ProjectionKind::Value || kind == ProjectionKind::Other; }
};

LossContext make_loss_context(ProjectionKind kind, const CalibStats &stats);

/// Trace-form loss. Cost: 2*d_h*d^2 + d_h*d - 1 flops with identity left, plus
/// 2*d_h^2*d - d_h*d otherwise.
double loss(const LossContext &ctx, const Matrix &delta_w, OpCounter *counter = nullptr);

/// d loss / d delta_w = 2 * left * delta_w * right.
Matrix loss_gradient(const LossContext &ctx, const Matrix &delta_w, OpCounter *counter = nullptr);

/// Per-row curvature of the loss: 2 * right.
Matrix row_hessian(const LossContext &ctx);

} // namespace attnq
