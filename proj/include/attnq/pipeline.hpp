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

// Quantization pipeline for one attention head. Each projection is quantized
// separately while the other two stay at full precision:
//
//   statistics -> step-size fit -> (OPTQ) -> (rounding optimization)

#include "attnq/io.hpp"
#include "attnq/objectives.hpp"
#include "attnq/rounding.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace attnq {

inline constexpr int kReportSchemaVersion = 1;

enum class Method
{
  Rtn,
  Optq,
  Aespa,
  AespaNoRound
};

std::string_view to_string(Method m);
std::optional<Method> parse_method(std::string_view s);

/// Whether the method uses the attention-aware losses and Hessians. RTN and
/// OPTQ use the plain layer-wise objective (kind Other) for every projection.
bool attention_aware(Method m);

struct QuantizeOptions
{
  int bits = 4;
  Method method = Method::Aespa;
  std::vector<Projection> order{Projection::Value, Projection::Query, Projection::Key};
  /// Overrides the objective kind used for W_V (Value or Other).
  std::optional<ProjectionKind> value_kind;
  SoftQuantConfig soft{};

  void validate() const;
  ProjectionKind kind_for_projection(Projection p) const;
};

struct ProjectionReport
{
  Projection projection = Projection::Value;
  ProjectionKind kind = ProjectionKind::Value;
  /// Attention-aware loss of W - W_hat under the projection's natural kind.
  double refined_loss = 0;
  /// Oracle attention error with only this projection quantized.
  double exact_error = 0;
  bool fell_back_to_rtn = false;
  std::vector<LossTerms> trace;
};

struct QuantizeOutcome
{
  QuantizedHead quantized;
  std::vector<ProjectionReport> projections;
  /// Attention error on the calibration set with all chosen projections quantized.
  double calib_attention_error = 0;
};

/// Runs the pipeline in memory. Errors are rethrown with the projection and stage named.
QuantizeOutcome quantize_head(const AttentionHead &head, const std::vector<CalibSequence> &calib,
                              const QuantizeOptions &opts);

/// Same, reusing pre-computed statistics.
QuantizeOutcome quantize_head(const AttentionHead &head, const std::vector<CalibSequence> &calib,
                              const CalibStats &stats, const QuantizeOptions &opts);

struct EvalResult
{
  std::size_t n_sequences = 0;
  double mean_attention_error = 0;
  double mean_output_norm = 0;
  /// sqrt(sum ||dSA||^2 / sum ||SA||^2)
  double relative_output_error = 0;
};

EvalResult evaluate_head(const AttentionHead &reference, const AttentionHead &quantized,
                         const std::vector<CalibSequence> &eval);

json quantize_report(const QuantizeOutcome &out, const QuantizeOptions &opts);
json eval_report(const EvalResult &r);

} // namespace attnq
