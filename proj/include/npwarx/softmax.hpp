#pragma once

#include <cmath>

#include "npwarx/types.hpp"

namespace npwarx {

/// log(sum(exp(v))) with max subtraction.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::DenseBase<Derived>& v) {
  using std::exp;
  using std::log;
  const auto top = v.maxCoeff();
  return top + log((v.array() - top).exp().sum());
}

/// Row-wise log-sum-exp of an N x S matrix.
template <typename Derived>
Vector<typename Derived::Scalar> log_sum_exp_rows(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  const Vector<Scalar> top = m.rowwise().maxCoeff();
  const Vector<Scalar> rest =
      (m.colwise() - top).array().exp().rowwise().sum().log().matrix();
  return top + rest;
}

template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  const Vector<Scalar> e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

/// Row-wise softmax of an N x S matrix of logits.
template <typename Derived>
Matrix<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  const Vector<Scalar> lse = log_sum_exp_rows(logits);
  return (logits.colwise() - lse).array().exp().matrix();
}

}  // namespace npwarx
