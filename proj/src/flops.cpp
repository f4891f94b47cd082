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

#include "attnq/flops.hpp"
#include "attnq/errors.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <ostream>

namespace attnq {

void CostParams::validate() const
{
  if (d < 1 || d_h < 1 || L < 1 || B < 1)
    throw DataError("CostParams: d, d_h, L and B must all be >= 1");
}

std::int64_t flops_value(const CostParams &p)
{
  p.validate();
  return 2 * p.d_h * p.d * p.d + p.d_h * p.d - 1;
}

std::int64_t flops_query_key(const CostParams &p)
{
  p.validate();
  return 2 * p.d_h * p.d * p.d + 2 * p.d_h * p.d_h * p.d - 1;
}

std::int64_t flops_aespa(const CostParams &p)
{
  p.validate();
  return 6 * p.d_h * p.d * p.d + 4 * p.d_h * p.d_h * p.d + p.d_h * p.d - 3;
}

ExistBreakdown flops_exist_breakdown(const CostParams &p)
{
  p.validate();
  const auto d = p.d, dh = p.d_h, L = p.L;
  return {
    3 * dh * L * (2 * d - 1),
    4 * dh * L * L - dh * L - L * L,
    3 * L * L + dh * L - L,
    3 * dh * L - 1,
  };
}

std::int64_t flops_exist(const CostParams &p)
{
  p.validate();
  const auto d = p.d, dh = p.d_h, L = p.L;
  return p.B * (6 * dh * d * L + 4 * dh * L * L + 2 * L * L - L - 1);
}

const std::vector<ModelPreset> &opt_presets()
{
  static const std::vector<ModelPreset> presets{
    {"125M", 768, 64}, {"350M", 1024, 64}, {"1.3B", 2048, 64},
    {"2.7B", 2560, 80}, {"6.7B", 4096, 128}, {"13B", 5120, 128},
  };
  return presets;
}

const ModelPreset &find_preset(std::string_view name)
{
  std::string_view key = name;
  if (key.substr(0, 4) == "OPT-" || key.substr(0, 4) == "opt-")
    key.remove_prefix(4);
  for (const auto &p : opt_presets())
    if (p.name == key)
      return p;
  throw DataError("unknown model preset '" + std::string(name) + "'");
}

std::vector<CostRow> cost_table(const std::vector<std::string> &preset_names, std::int64_t L, std::int64_t B)
{
  std::vector<CostRow> rows;
  rows.reserve(preset_names.size());
  for (const auto &name : preset_names)
  {
    const ModelPreset &p = find_preset(name);
    const CostParams params{p.d, p.d_h, L, B};
    rows.push_back({p, flops_exist(params), flops_aespa(params)});
  }
  return rows;
}

std::string format_gflops(std::int64_t flops)
{
  const double g = static_cast<double>(flops) / 1e9;
  if (g == 0.0)
    return "0";
  const int magnitude = static_cast<int>(std::floor(std::log10(std::abs(g))));
  const int decimals = std::max(0, 1 - magnitude);
  const double unit = std::pow(10.0, magnitude - 1);
  const double rounded = std::round(g / unit) * unit;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, rounded);
  return buf;
}

void write_cost_table_text(std::ostream &os, const std::vector<CostRow> &rows)
{
  os << std::left << std::setw(8) << "model" << std::right << std::setw(8) << "d" << std::setw(6) << "d_h"
     << std::setw(16) << "C_exist" << std::setw(16) << "C_aespa" << std::setw(10) << "exist" << std::setw(10)
     << "aespa" << "\n";
  for (const auto &r : rows)
    os << std::left << std::setw(8) << r.preset.name << std::right << std::setw(8) << r.preset.d << std::setw(6)
       << r.preset.d_h << std::setw(16) << r.exist << std::setw(16) << r.aespa << std::setw(10)
       << format_gflops(r.exist) << std::setw(10) << format_gflops(r.aespa) << "\n";
}

void write_cost_table_csv(std::ostream &os, const std::vector<CostRow> &rows)
{
  os << "model,d,d_h,flops_exist,flops_aespa,gflops_exist,gflops_aespa\n";
  for (const auto &r : rows)
    os << r.preset.name << ',' << r.preset.d << ',' << r.preset.d_h << ',' << r.exist << ',' << r.aespa << ','
       << format_gflops(r.exist) << ',' << format_gflops(r.aespa) << '\n';
}

} // namespace attnq
