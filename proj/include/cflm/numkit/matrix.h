// Copyright 2026 The cflm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense matrix aliases and the value-level kernels shared by the tape
// primitives and the tape-free inference paths.

#ifndef CFLM_NUMKIT_MATRIX_H_
#define CFLM_NUMKIT_MATRIX_H_

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <string>

#include "cflm/common.h"

namespace cflm::nk {

template <typename Scalar>
using MatrixX =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixX<double>;
using RowVector = RowVectorX<double>;

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

template <typename Derived>
std::string shape_of(const Eigen::MatrixBase<Derived>& m) {
  return shape_string(m.rows(), m.cols());
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

// Row-wise softmax with the row max subtracted first.
template <typename Derived>
MatrixX<typename Derived::Scalar> softmax_rows(
    const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Scalar peak = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - peak).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

// log(sum(exp(row))) for a single row, stabilized.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& row) {
  using std::exp;
  using std::log;
  const auto peak = row.maxCoeff();
  return peak + log((row.array() - peak).exp().sum());
}

// Row-wise log-softmax.
template <typename Derived>
MatrixX<typename Derived::Scalar> log_softmax_rows(
    const Eigen::MatrixBase<Derived>& logits) {
  MatrixX<typename Derived::Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    out.row(r) = logits.row(r).array() - log_sum_exp(logits.row(r));
  }
  return out;
}

template <typename Derived>
MatrixX<typename Derived::Scalar> sigmoid(
    const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([](Scalar v) {
    // Split on sign so exp never overflows.
    if (v >= 0) return Scalar(1) / (Scalar(1) + std::exp(-v));
    const Scalar e = std::exp(v);
    return e / (Scalar(1) + e);
  });
}

// Gathers rows of `table` by id into a (ids.size() x cols) matrix.
template <typename Derived>
MatrixX<typename Derived::Scalar> gather_rows(
    const Eigen::MatrixBase<Derived>& table, std::span<const TokenId> ids) {
  MatrixX<typename Derived::Scalar> out(static_cast<Eigen::Index>(ids.size()),
                                        table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) {
      throw Error("embedding id " + std::to_string(ids[i]) +
                  " out of range for table " + shape_of(table));
    }
    out.row(static_cast<Eigen::Index>(i)) = table.row(ids[i]);
  }
  return out;
}

// [a | b] column concatenation.
template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> hconcat(
    const Eigen::MatrixBase<DerivedA>& a,
    const Eigen::MatrixBase<DerivedB>& b) {
  if (a.rows() != b.rows()) {
    throw Error("concat: row mismatch " + shape_of(a) + " vs " + shape_of(b));
  }
  MatrixX<typename DerivedA::Scalar> out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

}  // namespace cflm::nk

#endif  // CFLM_NUMKIT_MATRIX_H_
