#pragma once

#include <cstdint>
#include <random>
#include <variant>
#include <vector>

#include "npwarx/types.hpp"

namespace npwarx {

/// y = W x + b; W is (outputs x inputs).
struct DenseLayer {
  MatrixXd W;
  VectorXd b;
};

/// Feed-forward gate: tanh hidden layers and a linear output layer with S-1 units.
/// The S-th logit is pinned to zero.
struct GateNetwork {
  std::vector<DenseLayer> layers;

  Index input_dim() const { return layers.front().W.cols(); }
  int modes() const { return static_cast<int>(layers.back().W.rows()) + 1; }
  std::vector<Index> hidden_sizes() const;
  Index parameter_count() const;

  VectorXd parameters() const;
  void set_parameters(const VectorXd& flat);
};

/// Softmax gate over the extended regressor: alpha_s = eta_s' [x 1], eta_S = 0.
struct LinearGate {
  MatrixXd eta;  // (S-1) x r

  int modes() const { return static_cast<int>(eta.rows()) + 1; }

  /// Zero-hidden-layer network computing the same logits from x.
  GateNetwork as_network() const;
  static LinearGate from_network(const GateNetwork& net);

  /// All S coefficient rows, with the zero anchor as the last row.
  MatrixXd full_eta() const;
};

using Gate = std::variant<GateNetwork, LinearGate>;

int gate_modes(const Gate& gate);
bool is_linear(const Gate& gate);

/// N x S logits for gate inputs X (N x (r-1)); last column is exactly zero.
MatrixXd logits(const GateNetwork& net, const MatrixXd& X);
MatrixXd logits(const LinearGate& gate, const MatrixXd& X);
MatrixXd logits(const Gate& gate, const MatrixXd& X);
VectorXd logits(const Gate& gate, const VectorXd& x);

MatrixXd probabilities(const Gate& gate, const MatrixXd& X);
VectorXd probabilities(const Gate& gate, const VectorXd& x);
MatrixXd log_probabilities(const Gate& gate, const MatrixXd& X);

struct GateShape {
  Index input_dim = 2;
  std::vector<Index> hidden = {10};
  int modes = 2;
};

/// Weights ~ N(0, init_std^2), biases zero.
GateNetwork init_gate(const GateShape& shape, double init_std, std::uint64_t seed);
/// Slope columns ~ N(0, init_std^2), intercept column zero.
LinearGate init_linear_gate(Index regressor_dim, int modes, double init_std, std::uint64_t seed);

struct AdamConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs_per_m_step = 3;
  int batch_size = 100;
  std::uint64_t shuffle_seed = 0;

  void validate() const;
};

/// First/second moment estimates, persisted across M-steps of one EM run.
struct AdamState {
  VectorXd m;
  VectorXd v;
  long step = 0;
};

/// -sum_k sum_s xi_ks log g_s(x_k), evaluated from logits.
double soft_label_loss(const Gate& gate, const MatrixXd& X, const MatrixXd& xi);

struct LossGradient {
  double loss = 0.0;
  VectorXd gradient;  // ordered as GateNetwork::parameters()
};

/// Summed soft-label cross-entropy over the rows of X and its backpropagated gradient.
LossGradient soft_label_loss_gradient(const GateNetwork& net, const MatrixXd& X,
                                      const MatrixXd& xi);

struct GateTrainResult {
  double loss_before = 0.0;
  double loss_after = 0.0;
  int attempts = 1;
  bool restored = false;
};

/// Mini-batch Adam on the soft-label cross-entropy. If the full-data loss ends above
/// its starting value, the epochs are re-run once at half the learning rate, and the
/// starting weights are restored if that also fails.
GateTrainResult train_soft_labels(Gate& gate, const MatrixXd& X, const MatrixXd& xi,
                                  const AdamConfig& adam, AdamState& state,
                                  std::mt19937_64& rng);

/// Convenience overload with fresh optimizer state and a generator seeded from the config.
GateTrainResult train_soft_labels(Gate& gate, const MatrixXd& X, const MatrixXd& xi,
                                  const AdamConfig& adam);

}  // namespace npwarx
