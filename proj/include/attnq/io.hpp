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

// JSON file formats. Matrices are nested row-major arrays; numbers are written
// with shortest round-trip precision so a save/load cycle is exact.
//
//   checkpoint   {"d", "d_h", "W_Q", "W_K", "W_V"}
//   calibration  {"d", "L", "sequences": [d x L, ...]}
//   stats cache  {"format": "attnq-stats", "exx", "exax", "ektk", "eqtq", "n_sequences"}
//   quantized    {"format": "attnq-quantized", "version", "d", "d_h", "n_bits",
//                 "projections": {"W_V": {"scale", "zero_point", "w_int"}, ...},
//                 "W_Q"/"W_K"/"W_V" full-precision for projections left unquantized}

#include "attnq/model.hpp"
#include "attnq/quantizer.hpp"
#include "attnq/stats.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace attnq {

using json = nlohmann::json;

json matrix_to_json(const Matrix &m);
/// Parses a nested array; throws DataError naming `field` on malformed input.
Matrix matrix_from_json(const json &j, const std::string &field);

json head_to_json(const AttentionHead &head);
AttentionHead head_from_json(const json &j);

json calibration_to_json(const std::vector<CalibSequence> &seqs);
std::vector<CalibSequence> calibration_from_json(const json &j);

json stats_to_json(const CalibStats &stats);
CalibStats stats_from_json(const json &j);

struct QuantizedHead
{
  Eigen::Index d = 0;
  Eigen::Index d_h = 0;
  int n_bits = 0;
  std::map<Projection, QuantizedWeight> projections;

  /// Head with quantized projections dequantized and the rest taken from `base`.
  AttentionHead materialize(const AttentionHead &base) const;
};

json quantized_to_json(const QuantizedHead &q, const AttentionHead &base);
/// Returns the quantized projections; unquantized projections go to `fp` if non-null.
QuantizedHead quantized_from_json(const json &j, AttentionHead *fp = nullptr);

json read_json_file(const std::filesystem::path &path);
/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path &path, const std::string &contents);
void write_json_file(const std::filesystem::path &path, const json &j);

void save_checkpoint(const std::filesystem::path &path, const AttentionHead &head);
AttentionHead load_checkpoint(const std::filesystem::path &path);
void save_calibration(const std::filesystem::path &path, const std::vector<CalibSequence> &seqs);
std::vector<CalibSequence> load_calibration(const std::filesystem::path &path);

} // namespace attnq
