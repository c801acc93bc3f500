#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "npwarx/dataset.hpp"
#include "npwarx/em.hpp"

namespace npwarx {

/// Three-region, two-dynamics piecewise ARX system driven by u ~ U[-4, 4]:
///   region 1 (4y - u + 10 < 0):            dynamics A
///   region 2 (otherwise, 5y + u - 6 <= 0):  dynamics B
///   region 3 (5y + u - 6 > 0):              dynamics A
/// with A: y = -0.4 y + u + 1.5 and B: y = 0.5 y - u - 0.5 on (y_{k-1}, u_{k-1}).
struct BenchmarkSystem {
  static constexpr double kNoiseStd = 0.2;
  static constexpr double kInputMin = -4.0;
  static constexpr double kInputMax = 4.0;

  /// Region index 1..3 of a (y_{k-1}, u_{k-1}) pair.
  static int region(double y_prev, double u_prev);
  /// Dynamics label 1 (A) or 2 (B) for a region.
  static int dynamics(int region);
  /// Coefficients ordered [y_{k-1}, u_{k-1}, 1], matching the extended regressor.
  static Eigen::Vector3d theta(int dynamics);
  /// Noise-free next output.
  static double mean_output(double y_prev, double u_prev);
  /// 2 x 3; row d-1 is theta(d)'.
  static MatrixXd true_thetas();
};

/// Simulates n_samples steps from y_0 = 0. The series has n_samples + 1 rows; row 0 is the
/// initial condition and carries label 0. `mode` holds dynamics labels, `region` region labels.
SeriesData generate(Index n_samples, double noise_std, std::uint64_t seed);

/// Regressor layout of the benchmark: n_a = n_b = q = 1.
RegressorConfig benchmark_regressors();

struct Reordering {
  std::vector<int> perm;  // new mode s is old mode perm[s]
  double distance = 0.0;  // sum_s ||theta_hat_{perm[s]} - theta_s||
};

/// Exhaustive search over the S! orderings of the estimated thetas (rows).
Reordering best_reordering(const MatrixXd& estimated, const MatrixXd& truth);

/// Applies best_reordering to the model's experts and gate.
Reordering reorder_modes(MixtureModel& model, const MatrixXd& truth);

/// (1/S) sum_s (1 - ||theta_s - theta_hat_s|| / ||theta_s||).
double parameter_fit(const MatrixXd& estimated, const MatrixXd& truth);

/// Fraction of matching labels.
double mode_fit(const VectorXi& predicted, const VectorXi& truth);

/// y_k - theta_{s_k}' phi_k under hard assignment.
VectorXd residuals(const MixtureModel& model, const Dataset& test);

struct EvalReport {
  std::optional<double> F_theta;
  std::optional<double> F_s;
  std::vector<double> theta_errors;  // ||theta_s - theta_hat_s|| per mode
  VectorXd residuals;
  VectorXi assigned;  // 1-based modes after reordering
  std::vector<int> permutation;
  double sigma = 0.0;
};

/// Reorders `model` (by truth when given, else by label agreement), then scores it on `test`.
EvalReport evaluate(MixtureModel& model, const Dataset& test,
                    const std::optional<MatrixXd>& truth);

}  // namespace npwarx
