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

// Quick self-verification suite behind the `check` subcommand: each entry
// compares a pipeline quantity against its brute-force oracle.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace attnq {

struct CheckResult
{
  std::string name;
  bool passed = false;
  double observed = 0;
  double threshold = 0;
  std::string detail;
};

std::vector<CheckResult> run_oracle_checks(std::uint64_t seed, int trials = 10);

/// One row per check plus a header stating the logit and Taylor conventions.
void write_check_table(std::ostream &os, const std::vector<CheckResult> &results);

} // namespace attnq
