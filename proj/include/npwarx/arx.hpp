#pragma once

#include <cmath>
#include <numbers>

#include "npwarx/error.hpp"
#include "npwarx/types.hpp"

namespace npwarx {

/// Smallest variance any estimator may return.
inline constexpr double kVarianceFloor = 1e-12;

/// Condition number above which the normal matrix is regularized.
inline constexpr double kMaxCondition = 1e12;

/// One affine expert: y = theta' [x 1] + e, e ~ N(0, sigma^2).
template <typename Scalar>
struct ArxMode {
  Vector<Scalar> theta;
  Scalar sigma = Scalar(1);
};

using ArxModed = ArxMode<double>;

template <typename Scalar, typename Derived>
Scalar predict(const ArxMode<Scalar>& mode, const Eigen::MatrixBase<Derived>& phi) {
  if (phi.size() != mode.theta.size()) {
    throw data_error("predict: regressor has length " + std::to_string(phi.size()) +
                     ", expected " + std::to_string(mode.theta.size()));
  }
  return mode.theta.dot(phi.template cast<Scalar>());
}

template <typename Scalar>
Scalar log_normal_density(Scalar residual, Scalar sigma) {
  using std::log;
  const Scalar half_log_2pi = Scalar(0.5) * log(Scalar(2) * std::numbers::pi_v<Scalar>);
  return -half_log_2pi - log(sigma) - residual * residual / (Scalar(2) * sigma * sigma);
}

/// log N(y; theta' phi, sigma^2).
template <typename Scalar, typename Derived>
Scalar mode_log_density(const ArxMode<Scalar>& mode, const Eigen::MatrixBase<Derived>& phi,
                        Scalar y) {
  return log_normal_density<Scalar>(y - predict(mode, phi), mode.sigma);
}

template <typename Scalar>
struct WlsResult {
  Vector<Scalar> theta;
  bool regularized = false;
};

/// argmin_theta sum_k w_k (y_k - theta' phi_k)^2 via the normal equations.
/// Falls back to a small ridge when the normal matrix is (numerically) singular.
template <typename DerivedPhi, typename DerivedY, typename DerivedW>
WlsResult<typename DerivedPhi::Scalar> weighted_least_squares(
    const Eigen::MatrixBase<DerivedPhi>& Phi, const Eigen::MatrixBase<DerivedY>& y,
    const Eigen::MatrixBase<DerivedW>& w) {
  using Scalar = typename DerivedPhi::Scalar;
  if (Phi.rows() != y.size() || Phi.rows() != w.size()) {
    throw data_error("weighted_least_squares: row count mismatch");
  }
  if ((w.array() < Scalar(0)).any()) throw data_error("weighted_least_squares: negative weight");
  if (!(w.sum() > Scalar(0))) throw data_error("weighted_least_squares: weights sum to zero");
  if (!Phi.allFinite()) throw data_error("weighted_least_squares: non-finite regressors");

  const Index r = Phi.cols();
  const Matrix<Scalar> weighted = Phi.derived().array().colwise() * w.derived().array();
  Matrix<Scalar> normal = weighted.transpose() * Phi;
  const Vector<Scalar> rhs = weighted.transpose() * y;

  WlsResult<Scalar> out;
  Eigen::LDLT<Matrix<Scalar>> ldlt(normal);
  const auto D = ldlt.vectorD();
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
      D.minCoeff() * Scalar(kMaxCondition) > D.maxCoeff() &&
      ldlt.rcond() * Scalar(kMaxCondition) >= Scalar(1)) {
    out.theta = ldlt.solve(rhs);
    return out;
  }

  Scalar ridge = Scalar(1e-8) * normal.trace() / Scalar(r);
  if (!(ridge > Scalar(0))) ridge = Scalar(1e-8);
  normal.diagonal().array() += ridge;
  out.theta = Eigen::LDLT<Matrix<Scalar>>(normal).solve(rhs);
  out.regularized = true;
  return out;
}

/// sum_k w_k (y_k - theta' phi_k)^2
template <typename DerivedPhi, typename DerivedY, typename DerivedW, typename DerivedT>
typename DerivedPhi::Scalar weighted_sse(const Eigen::MatrixBase<DerivedPhi>& Phi,
                                         const Eigen::MatrixBase<DerivedY>& y,
                                         const Eigen::MatrixBase<DerivedW>& w,
                                         const Eigen::MatrixBase<DerivedT>& theta) {
  return (w.array() * (y - Phi * theta).array().square()).sum();
}

/// Conjugate prior used by the MAP variance update.
struct VariancePrior {
  double upsilon0 = 3.0;
  int D = 1;
  double v2 = 0.0;
  double ybar = 0.0;

  /// Empirical mean/variance of y with the weakest prior upsilon0 = D + 2.
  template <typename Derived>
  static VariancePrior from_outputs(const Eigen::MatrixBase<Derived>& y, int D = 1) {
    VariancePrior p;
    p.D = D;
    p.upsilon0 = D + 2;
    const double n = static_cast<double>(y.size());
    p.ybar = y.sum() / n;
    p.v2 = (y.array() - p.ybar).square().sum() / n;
    return p;
  }

  /// Log density (up to a constant) of the inverse-gamma prior whose posterior mode is
  /// the MAP update for a mode holding `S` of the prior mass.
  double log_density(double sigma2, int S) const {
    const double shape = 0.5 * (upsilon0 + D);
    const double rate = 0.5 * v2 / S;
    return -(shape + 1.0) * std::log(sigma2) - rate / sigma2;
  }
};

/// (v^2/S + sum w r^2) / (upsilon0 + sum w + D + 2), floored.
template <typename DerivedR, typename DerivedW>
double map_variance(const Eigen::MatrixBase<DerivedR>& residuals,
                    const Eigen::MatrixBase<DerivedW>& w, const VariancePrior& prior, int S) {
  const double scatter = (w.array() * residuals.array().square()).sum();
  const double value = (prior.v2 / S + scatter) / (prior.upsilon0 + w.sum() + prior.D + 2);
  return value > kVarianceFloor ? value : kVarianceFloor;
}

/// Responsibility-weighted mean squared residual shared by all modes.
/// `residuals` and `posterior` are both N x S.
template <typename DerivedR, typename DerivedP>
double pooled_mle_variance(const Eigen::MatrixBase<DerivedR>& residuals,
                           const Eigen::MatrixBase<DerivedP>& posterior) {
  if (residuals.rows() != posterior.rows() || residuals.cols() != posterior.cols()) {
    throw data_error("pooled_mle_variance: shape mismatch");
  }
  const double value =
      (posterior.array() * residuals.array().square()).sum() / posterior.sum();
  return value > kVarianceFloor ? value : kVarianceFloor;
}

}  // namespace npwarx
