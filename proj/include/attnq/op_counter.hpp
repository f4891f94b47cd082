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

#include <cstdint>

namespace attnq {

/// Floating-point operation accumulator. Multiplies and adds are counted
/// separately, so an (m x k) by (k x n) product costs m*n*(2k - 1).
struct OpCounter
{
  std::int64_t flops = 0;

  void add(std::int64_t n) { flops += n; }

  void matmul(std::int64_t m, std::int64_t k, std::int64_t n) { flops += m * n * (2 * k - 1); }

  // Elementwise product of two length-n arrays followed by a full reduction.
  void dot(std::int64_t n) { flops += 2 * n - 1; }

  void merge(const OpCounter &other) { flops += other.flops; }
};

inline void count_matmul(OpCounter *c, std::int64_t m, std::int64_t k, std::int64_t n)
{
  if (c)
    c->matmul(m, k, n);
}

inline void count_dot(OpCounter *c, std::int64_t n)
{
  if (c)
    c->dot(n);
}

inline void count(OpCounter *c, std::int64_t n)
{
  if (c)
    c->add(n);
}

} // namespace attnq
