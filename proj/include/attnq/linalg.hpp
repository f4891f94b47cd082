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

// Dense real primitives shared by the quantization pipeline and its oracles.
// Everything is templated on the scalar type; the pipeline instantiates double.

#include "attnq/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

namespace attnq {

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using DenseRowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = DenseMatrix<double>;
using Vector = DenseVector<double>;
using RowVector = DenseRowVector<double>;

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived> &m)
{
  return m.derived().array().isFinite().all();
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived> &m, const std::string &what)
{
  if (!all_finite(m))
    throw NumericalError(what + ": non-finite entry");
}

/// Builds a row-major matrix from a flat buffer, validating length and finiteness.
template <typename Scalar = double, typename Range>
DenseMatrix<Scalar> make_matrix(Eigen::Index rows, Eigen::Index cols, const Range &data)
{
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != std::size(data))
    throw ShapeError("make_matrix: data length " + std::to_string(std::size(data)) +
                     " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
  DenseMatrix<Scalar> m(rows, cols);
  std::size_t k = 0;
  for (const auto &v : data)
  {
    m.data()[k++] = static_cast<Scalar>(v);
  }
  require_finite(m, "make_matrix");
  return m;
}

template <typename Derived>
void require_shape(const Eigen::DenseBase<Derived> &m, Eigen::Index rows, Eigen::Index cols,
                   const std::string &what)
{
  if (m.rows() != rows || m.cols() != cols)
    throw ShapeError(what + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                     ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

/// Row-wise softmax with per-row max subtraction.
template <typename Derived>
DenseMatrix<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived> &m)
{
  using Scalar = typename Derived::Scalar;
  DenseMatrix<Scalar> out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
  {
    const Scalar mx = m.row(i).maxCoeff();
    out.row(i) = (m.row(i).array() - mx).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

/// Jacobian of softmax at probability row `a`: diag(a) - a a^T.
template <typename Derived>
DenseMatrix<typename Derived::Scalar> softmax_jacobian_row(const Eigen::MatrixBase<Derived> &a)
{
  using Scalar = typename Derived::Scalar;
  if (a.rows() != 1 && a.cols() != 1)
    throw ShapeError("softmax_jacobian_row: expected a vector");
  const DenseVector<Scalar> p = a.reshaped();
  if ((p.array() < Scalar(0)).any())
    throw NumericalError("softmax_jacobian_row: negative probability");
  if (std::abs(p.sum() - Scalar(1)) > Scalar(1e-9))
    throw NumericalError("softmax_jacobian_row: row does not sum to 1");
  DenseMatrix<Scalar> j = -p * p.transpose();
  j.diagonal() += p;
  return j;
}

/// Kronecker product. `max_entries` bounds the size of the result; exceeding it
/// raises BudgetError instead of allocating.
template <typename DA, typename DB>
DenseMatrix<typename DA::Scalar> kron(const Eigen::MatrixBase<DA> &a, const Eigen::MatrixBase<DB> &b,
                                      std::size_t max_entries)
{
  using Scalar = typename DA::Scalar;
  const auto rows = a.rows() * b.rows();
  const auto cols = a.cols() * b.cols();
  if (static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) > max_entries)
    throw BudgetError("kron: result " + std::to_string(rows) + "x" + std::to_string(cols) +
                      " exceeds budget of " + std::to_string(max_entries) + " entries");
  DenseMatrix<Scalar> out(rows, cols);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Column-stacking vectorization.
template <typename Derived>
DenseVector<typename Derived::Scalar> vec(const Eigen::MatrixBase<Derived> &m)
{
  DenseVector<typename Derived::Scalar> v(m.size());
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      v(k++) = m(i, j);
  return v;
}

template <typename Derived>
DenseMatrix<typename Derived::Scalar> unvec(const Eigen::MatrixBase<Derived> &v, Eigen::Index rows,
                                            Eigen::Index cols)
{
  if (v.size() != rows * cols)
    throw ShapeError("unvec: length mismatch");
  DenseMatrix<typename Derived::Scalar> m(rows, cols);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i)
      m(i, j) = v(k++);
  return m;
}

template <typename Derived>
typename Derived::Scalar asymmetry(const Eigen::MatrixBase<Derived> &m)
{
  if (m.rows() != m.cols())
    throw ShapeError("asymmetry: matrix is not square");
  if (m.size() == 0)
    return 0;
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived> &m, typename Derived::Scalar tol)
{
  if (m.rows() != m.cols())
    return false;
  using Scalar = typename Derived::Scalar;
  const Scalar scale = std::max<Scalar>(Scalar(1), m.size() ? m.cwiseAbs().maxCoeff() : Scalar(0));
  return asymmetry(m) <= tol * scale;
}

template <typename Derived>
typename Derived::Scalar min_eigenvalue(const Eigen::MatrixBase<Derived> &m)
{
  using Scalar = typename Derived::Scalar;
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> sym = (m + m.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> es(
    sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Symmetric factor G with G G^T = m, via eigendecomposition. Eigenvalues down to
/// -1e-9 (relative to the spectral radius) are clamped to zero, so rank-deficient
/// PSD inputs are accepted.
template <typename Derived>
DenseMatrix<typename Derived::Scalar> sym_factor(const Eigen::MatrixBase<Derived> &m)
{
  using Scalar = typename Derived::Scalar;
  using Dyn = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  require_finite(m, "sym_factor");
  if (!is_symmetric(m, Scalar(1e-9)))
    throw NumericalError("sym_factor: input is not symmetric");
  Eigen::SelfAdjointEigenSolver<Dyn> es(Dyn((m + m.transpose()) / Scalar(2)));
  if (es.info() != Eigen::Success)
    throw NumericalError("sym_factor: eigendecomposition failed");
  const auto &lambda = es.eigenvalues();
  const Scalar radius = std::max<Scalar>(Scalar(1), lambda.cwiseAbs().maxCoeff());
  if (lambda.minCoeff() < -Scalar(1e-9) * radius)
    throw NumericalError("sym_factor: input is indefinite");
  const DenseVector<Scalar> root = lambda.cwiseMax(Scalar(0)).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

/// tr(dw * m * dw^T), evaluated as sum((dw * m) .* dw).
template <typename DW, typename DM>
typename DW::Scalar trace_quadratic(const Eigen::MatrixBase<DW> &dw, const Eigen::MatrixBase<DM> &m)
{
  return (dw * m).cwiseProduct(dw).sum();
}

} // namespace attnq
