#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "npwarx/arx.hpp"
#include "npwarx/dataset.hpp"
#include "npwarx/gate.hpp"

namespace npwarx {

enum class VarianceMode { per_mode_map, pooled };

const char* to_string(VarianceMode mode);
VarianceMode parse_variance_mode(const std::string& text);

/// Gate over ARX experts. In pooled mode every expert carries the same sigma.
struct MixtureModel {
  std::vector<ArxModed> modes;
  Gate gate;
  VarianceMode variance_mode = VarianceMode::pooled;
  Standardizer gate_input;

  int S() const { return static_cast<int>(modes.size()); }
  Index regressor_dim() const { return modes.front().theta.size(); }

  /// Row s holds theta_s'.
  MatrixXd thetas() const;
  VectorXd sigmas() const;

  /// Gate inputs for regressors X (standardized when configured).
  MatrixXd gate_features(const MatrixXd& X) const;

  void validate() const;
};

/// Relabel modes so that new mode s is old mode perm[s] (0-based), rewriting the
/// gate so that probabilities follow the experts.
void permute_modes(MixtureModel& model, const std::vector<int>& perm);

/// N x S responsibilities; rows sum to one.
struct PosteriorMatrix {
  MatrixXd xi;

  Index size() const { return xi.rows(); }
  void validate(double tol = 1e-10) const;
};

/// N x S matrix of log g_s(x_k) + log p(y_k | x_k, theta_s, sigma_s).
MatrixXd joint_log_density(const MixtureModel& model, const Dataset& data);

/// sum_k log sum_s g_s(x_k) p(y_k | x_k, theta_s, sigma_s).
double observed_loglik(const MixtureModel& model, const Dataset& data);

/// Observed log-likelihood plus the log variance prior when MAP variances are used.
double em_objective(const MixtureModel& model, const Dataset& data, const VariancePrior& prior);

PosteriorMatrix e_step(const MixtureModel& model, const Dataset& data);

/// sum_k xi_ks log N(y_k; theta_s' phi_k, sigma_s^2).
double expert_q(const ArxModed& mode, const Dataset& data, const VectorXd& weights);

/// Optimizer state and shuffling stream owned by one EM run.
struct GateTrainer {
  AdamConfig adam;
  AdamState state;
  std::mt19937_64 rng;
};

struct MStepReport {
  std::vector<std::string> warnings;
  GateTrainResult gate;
};

/// Experts by weighted least squares, then variances, then the gate.
MStepReport m_step(MixtureModel& model, const Dataset& data, const PosteriorMatrix& xi,
                   GateTrainer& trainer, const VariancePrior& prior);

enum class KMeansSpace { output, joint };

const char* to_string(KMeansSpace space);
KMeansSpace parse_kmeans_space(const std::string& text);

struct KMeansResult {
  MatrixXd centers;   // k x d
  VectorXi assignment;
  int iterations = 0;
};

/// Lloyd iterations from a seeded farthest-point start.
KMeansResult kmeans(const MatrixXd& points, int k, std::uint64_t seed, int max_iters = 100);

/// Experts with zero slopes and k-means cluster centres as intercepts.
std::vector<ArxModed> kmeans_bias_init(const Dataset& data, int S, std::uint64_t seed,
                                       KMeansSpace space = KMeansSpace::output);

enum class GateKind { neural, linear };

struct ModelSpec {
  int S = 2;
  GateKind gate = GateKind::neural;
  std::vector<Index> hidden = {10};
  bool standardize_gate_input = false;
};

struct EmConfig {
  int max_iters = 500;
  double loglik_tol = 1e-4;
  int n_restarts = 5;
  std::uint64_t rng_seed = 0;
  double init_std = 10.0;
  double output_init_std = 0.0;  // neural output layer; 0 uses init_std
  AdamConfig adam;
  bool kmeans_init = true;
  KMeansSpace kmeans_space = KMeansSpace::output;
  VarianceMode variance = VarianceMode::pooled;
  bool parallel_restarts = true;

  void validate() const;
};

struct IterationRecord {
  int iteration = 0;
  double loglik = 0.0;
  double objective = 0.0;
  MatrixXd thetas;
  VectorXd sigmas;
  double gate_loss = 0.0;
  bool gate_restored = false;
};

struct EmTrace {
  double initial_loglik = 0.0;
  std::vector<IterationRecord> records;
  std::string termination;
  std::vector<std::string> warnings;
};

struct RestartSummary {
  int restart = 0;
  std::uint64_t seed = 0;
  int iterations = 0;
  double final_loglik = 0.0;
  std::string termination;
  bool ok = false;
};

struct EmRun {
  MixtureModel model;
  EmTrace trace;
  RestartSummary summary;
};

/// Initial model for one restart: random gate and k-means (or small random) experts.
MixtureModel initialize_model(const Dataset& data, const EmConfig& cfg, const ModelSpec& spec,
                              std::uint64_t seed);

/// Alternate E/M steps from `init` until the log-likelihood change drops below tolerance on an
/// iteration whose gate step was kept.
EmRun run_em(MixtureModel init, const Dataset& data, const EmConfig& cfg, std::uint64_t seed);

struct FitResult {
  MixtureModel model;
  EmTrace trace;
  int best_restart = 0;
  std::vector<RestartSummary> restarts;
  std::vector<EmTrace> traces;
};

/// Multi-restart EM; restart i uses seed rng_seed + i. Returns the best final log-likelihood.
FitResult fit(const Dataset& data, const EmConfig& cfg, const ModelSpec& spec);

/// Trace CSV: restart, iteration, loglik, theta_s_j..., sigma_s..., gate_loss.
void write_trace_csv(const std::vector<EmTrace>& traces, const std::string& path);

}  // namespace npwarx
