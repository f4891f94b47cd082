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

#include <stdexcept>
#include <string>

namespace attnq {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class ShapeError : public Error
{
public:
  using Error::Error;
};

/// Malformed or inconsistent input data (files, calibration sets, arguments).
class DataError : public Error
{
public:
  using Error::Error;
};

/// A numerical precondition failed (asymmetry, indefiniteness, non-finite values).
class NumericalError : public Error
{
public:
  using Error::Error;
};

/// An explicit Kronecker/oracle size budget was exceeded.
class BudgetError : public Error
{
public:
  using Error::Error;
};

} // namespace attnq
