#include "npwarx/benchmark.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "npwarx/error.hpp"
#include "npwarx/pwarx.hpp"

namespace npwarx {

int BenchmarkSystem::region(double y_prev, double u_prev) {
  if (4.0 * y_prev - u_prev + 10.0 < 0.0) return 1;
  if (5.0 * y_prev + u_prev - 6.0 > 0.0) return 3;
  return 2;
}

int BenchmarkSystem::dynamics(int region) { return region == 2 ? 2 : 1; }

Eigen::Vector3d BenchmarkSystem::theta(int dynamics) {
  if (dynamics == 1) return {-0.4, 1.0, 1.5};
  if (dynamics == 2) return {0.5, -1.0, -0.5};
  throw data_error("benchmark: dynamics label must be 1 or 2");
}

double BenchmarkSystem::mean_output(double y_prev, double u_prev) {
  const Eigen::Vector3d phi(y_prev, u_prev, 1.0);
  return theta(dynamics(region(y_prev, u_prev))).dot(phi);
}

MatrixXd BenchmarkSystem::true_thetas() {
  MatrixXd t(2, 3);
  t.row(0) = theta(1).transpose();
  t.row(1) = theta(2).transpose();
  return t;
}

SeriesData generate(Index n_samples, double noise_std, std::uint64_t seed) {
  if (n_samples < 1) throw usage_error("generate: n_samples must be at least 1");
  if (!(noise_std >= 0.0)) throw usage_error("generate: noise_std must be non-negative");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> input(BenchmarkSystem::kInputMin,
                                               BenchmarkSystem::kInputMax);
  std::normal_distribution<double> noise(0.0, 1.0);

  const Index n = n_samples + 1;
  SeriesData s;
  s.u.resize(n, 1);
  s.y.resize(n);
  s.mode = VectorXi::Zero(n);
  s.region = VectorXi::Zero(n);
  s.y(0) = 0.0;
  s.u(0, 0) = input(rng);
  for (Index k = 1; k < n; ++k) {
    const double y_prev = s.y(k - 1);
    const double u_prev = s.u(k - 1, 0);
    const int reg = BenchmarkSystem::region(y_prev, u_prev);
    (*s.region)(k) = reg;
    (*s.mode)(k) = BenchmarkSystem::dynamics(reg);
    s.y(k) = BenchmarkSystem::mean_output(y_prev, u_prev) + noise_std * noise(rng);
    s.u(k, 0) = input(rng);
  }
  return s;
}

RegressorConfig benchmark_regressors() { return {1, 1, 1}; }

Reordering best_reordering(const MatrixXd& estimated, const MatrixXd& truth) {
  if (estimated.rows() != truth.rows() || estimated.cols() != truth.cols()) {
    throw data_error("reorder: estimated has " + std::to_string(estimated.rows()) + "x" +
                     std::to_string(estimated.cols()) + " parameters, truth has " +
                     std::to_string(truth.rows()) + "x" + std::to_string(truth.cols()));
  }
  std::vector<int> perm(estimated.rows());
  std::iota(perm.begin(), perm.end(), 0);
  Reordering best{perm, std::numeric_limits<double>::infinity()};
  do {
    double d = 0.0;
    for (std::size_t s = 0; s < perm.size(); ++s) {
      d += (estimated.row(perm[s]) - truth.row(static_cast<Index>(s))).norm();
    }
    if (d < best.distance) best = {perm, d};
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Reordering reorder_modes(MixtureModel& model, const MatrixXd& truth) {
  const Reordering r = best_reordering(model.thetas(), truth);
  permute_modes(model, r.perm);
  return r;
}

double parameter_fit(const MatrixXd& estimated, const MatrixXd& truth) {
  if (estimated.rows() != truth.rows() || estimated.cols() != truth.cols()) {
    throw data_error("parameter_fit: shape mismatch");
  }
  double sum = 0.0;
  for (Index s = 0; s < truth.rows(); ++s) {
    const double norm = truth.row(s).norm();
    if (norm == 0.0) throw data_error("parameter_fit: true theta has zero norm");
    sum += 1.0 - (truth.row(s) - estimated.row(s)).norm() / norm;
  }
  return sum / static_cast<double>(truth.rows());
}

double mode_fit(const VectorXi& predicted, const VectorXi& truth) {
  if (predicted.size() != truth.size()) throw data_error("mode_fit: length mismatch");
  if (truth.size() == 0) throw data_error("mode_fit: empty input");
  return static_cast<double>((predicted.array() == truth.array()).count()) /
         static_cast<double>(truth.size());
}

VectorXd residuals(const MixtureModel& model, const Dataset& test) {
  return test.y - predict_output(model, test, PredictMode::hard).y_hat;
}

EvalReport evaluate(MixtureModel& model, const Dataset& test,
                    const std::optional<MatrixXd>& truth) {
  EvalReport rep;
  if (truth) {
    rep.permutation = reorder_modes(model, *truth).perm;
    rep.F_theta = parameter_fit(model.thetas(), *truth);
    for (Index s = 0; s < truth->rows(); ++s) {
      rep.theta_errors.push_back((truth->row(s) - model.thetas().row(s)).norm());
    }
  } else if (test.labels) {
    // Without reference parameters, pick the labelling that agrees best with the data.
    const VectorXi raw = hard_assign(model, test.X);
    std::vector<int> perm(model.S());
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best = perm;
    double best_fit = -1.0;
    do {
      VectorXi relabeled(raw.size());
      for (Index k = 0; k < raw.size(); ++k) {
        const auto it = std::find(perm.begin(), perm.end(), raw(k));
        relabeled(k) = static_cast<int>(it - perm.begin()) + 1;
      }
      const double f = mode_fit(relabeled, *test.labels);
      if (f > best_fit) {
        best_fit = f;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    permute_modes(model, best);
    rep.permutation = best;
  } else {
    rep.permutation.resize(model.S());
    std::iota(rep.permutation.begin(), rep.permutation.end(), 0);
  }

  const Predictions pred = predict_output(model, test, PredictMode::hard);
  rep.assigned = pred.mode.array() + 1;
  rep.residuals = test.y - pred.y_hat;
  if (test.labels) rep.F_s = mode_fit(rep.assigned, *test.labels);
  rep.sigma = model.modes.front().sigma;
  return rep;
}

}  // namespace npwarx
