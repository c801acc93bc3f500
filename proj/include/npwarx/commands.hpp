#pragma once

#include <array>
#include <ostream>
#include <string>
#include <vector>

#include "npwarx/benchmark.hpp"
#include "npwarx/config.hpp"
#include "npwarx/em.hpp"

namespace npwarx {

struct GenerateOutput {
  std::string series;
  std::string train;
  std::string val;
  std::string test;
  std::string true_theta;
};

/// Simulates the benchmark and writes train / val / test CSVs. Each split file starts with
/// max(n_a, n_b) context rows so that it yields exactly its configured number of regressors.
GenerateOutput cmd_generate(const RunConfig& cfg, std::ostream& log);

/// Fits on the training CSV; writes the model file, trace CSV and restart summary CSV.
FitResult cmd_fit(const RunConfig& cfg, std::ostream& log);

/// Scores a saved model on the test CSV; writes report.json, residuals.csv and, for the
/// one-lag single-input layout, a mode map over the (y_{k-1}, u_{k-1}) plane.
EvalReport cmd_evaluate(const RunConfig& cfg, std::ostream& log);

struct TrialRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  int iterations = 0;
  double loglik = 0.0;
  MatrixXd thetas;
  double sigma = 0.0;
  double F_theta = 0.0;
  double F_s = 0.0;
};

struct TrialsSummary {
  std::vector<TrialRecord> trials;
  MatrixXd theta_mean;
  MatrixXd theta_std;
  double sigma2_mean = 0.0;
  double sigma2_std = 0.0;
  double sigma_mean = 0.0;
  double F_theta_mean = 0.0;
  double F_s_mean = 0.0;
};

/// Repeated fit + evaluate on one dataset with distinct EM seeds.
TrialsSummary cmd_trials(const RunConfig& cfg, int n_trials, std::ostream& log);

/// Train / validation / test regressors, read from the configured CSVs.
std::array<Dataset, 3> load_splits(const RunConfig& cfg);

/// Train / validation / test regressors simulated in memory from the config.
std::array<Dataset, 3> simulate_splits(const RunConfig& cfg);

}  // namespace npwarx
