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

// Closed-form flop counts for one rounding-optimization iteration, comparing the
// pre-computed trace losses against block-wise reconstruction that re-runs
// attention over B sequences of length L.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace attnq {

struct CostParams
{
  std::int64_t d = 1;
  std::int64_t d_h = 1;
  std::int64_t L = 1;
  std::int64_t B = 1;

  void validate() const;
};

/// 2 d_h d^2 + d_h d - 1
std::int64_t flops_value(const CostParams &p);
/// 2 d_h d^2 + 2 d_h^2 d - 1 (query and key alike)
std::int64_t flops_query_key(const CostParams &p);
/// 6 d_h d^2 + 4 d_h^2 d + d_h d - 3
std::int64_t flops_aespa(const CostParams &p);

/// Per-sequence flops of block-wise attention reconstruction.
struct ExistBreakdown
{
  std::int64_t projections;     // 3 d_h L (2d - 1)
  std::int64_t matmuls;         // 4 d_h L^2 - d_h L - L^2
  std::int64_t softmax;         // 3 L^2 + d_h L - L
  std::int64_t reconstruction;  // 3 d_h L - 1

  std::int64_t total() const { return projections + matmuls + softmax + reconstruction; }
};
ExistBreakdown flops_exist_breakdown(const CostParams &p);

/// B (6 d_h d L + 4 d_h L^2 + 2 L^2 - L - 1)
std::int64_t flops_exist(const CostParams &p);

struct ModelPreset
{
  std::string name;
  std::int64_t d;
  std::int64_t d_h;
};

/// OPT-125M through OPT-13B.
const std::vector<ModelPreset> &opt_presets();
const ModelPreset &find_preset(std::string_view name);

struct CostRow
{
  ModelPreset preset;
  std::int64_t exist;
  std::int64_t aespa;
};

/// Costs for the named presets at the given sequence length and batch size.
std::vector<CostRow> cost_table(const std::vector<std::string> &preset_names, std::int64_t L = 2048,
                                std::int64_t B = 4);

/// Value in GFLOPS rounded to two significant digits, e.g. "6.7", "0.24", "11".
std::string format_gflops(std::int64_t flops);

void write_cost_table_text(std::ostream &os, const std::vector<CostRow> &rows);
void write_cost_table_csv(std::ostream &os, const std::vector<CostRow> &rows);

} // namespace attnq
