#include "npwarx/gate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "npwarx/error.hpp"
#include "npwarx/softmax.hpp"

namespace npwarx {

namespace {

// Gate steps are accepted only when they do not raise the full-data loss.
constexpr double kGateLossSlack = 0.0;

template <typename Visitor>
decltype(auto) visit_gate(const Gate& gate, Visitor&& v) {
  return std::visit(std::forward<Visitor>(v), gate);
}

MatrixXd append_anchor(const MatrixXd& partial) {
  MatrixXd out(partial.rows(), partial.cols() + 1);
  out.leftCols(partial.cols()) = partial;
  out.col(partial.cols()).setZero();
  return out;
}

struct Forward {
  std::vector<MatrixXd> activations;  // activations[0] = input, then each hidden layer
  MatrixXd logits;                    // N x S
};

Forward forward(const GateNetwork& net, const MatrixXd& X) {
  Forward f;
  f.activations.reserve(net.layers.size());
  f.activations.push_back(X);
  for (std::size_t l = 0; l + 1 < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    MatrixXd z = f.activations.back() * layer.W.transpose();
    z.rowwise() += layer.b.transpose();
    f.activations.push_back(z.array().tanh().matrix());
  }
  const auto& out = net.layers.back();
  MatrixXd z = f.activations.back() * out.W.transpose();
  z.rowwise() += out.b.transpose();
  f.logits = append_anchor(z);
  return f;
}

void check_input(const GateNetwork& net, const MatrixXd& X) {
  if (X.cols() != net.input_dim()) {
    throw data_error("gate: input has " + std::to_string(X.cols()) + " columns, expected " +
                     std::to_string(net.input_dim()));
  }
}

void check_posterior(const MatrixXd& X, const MatrixXd& xi, int modes) {
  if (xi.rows() != X.rows() || xi.cols() != modes) {
    throw data_error("gate: responsibilities must be " + std::to_string(X.rows()) + " x " +
                     std::to_string(modes));
  }
}

void run_epochs(GateNetwork& net, const MatrixXd& X, const MatrixXd& xi, const AdamConfig& adam,
                double learning_rate, AdamState& state, std::mt19937_64& rng) {
  const Index n = X.rows();
  const Index p = net.parameter_count();
  if (state.m.size() != p) {
    state.m = VectorXd::Zero(p);
    state.v = VectorXd::Zero(p);
    state.step = 0;
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});

  const Index batch = adam.batch_size;
  MatrixXd xb, xib;
  for (int epoch = 0; epoch < adam.epochs_per_m_step; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Index start = 0; start < n; start += batch) {
      const Index count = std::min(batch, n - start);
      xb.resize(count, X.cols());
      xib.resize(count, xi.cols());
      for (Index i = 0; i < count; ++i) {
        xb.row(i) = X.row(order[start + i]);
        xib.row(i) = xi.row(order[start + i]);
      }
      const LossGradient lg = soft_label_loss_gradient(net, xb, xib);
      const VectorXd g = lg.gradient / static_cast<double>(count);

      ++state.step;
      state.m = adam.beta1 * state.m + (1.0 - adam.beta1) * g;
      state.v = adam.beta2 * state.v + (1.0 - adam.beta2) * g.cwiseProduct(g);
      const double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(state.step));
      const double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(state.step));
      const VectorXd step = learning_rate * (state.m / c1).array() /
                            ((state.v / c2).array().sqrt() + adam.epsilon);
      net.set_parameters(net.parameters() - step);
    }
  }
}

}  // namespace

std::vector<Index> GateNetwork::hidden_sizes() const {
  std::vector<Index> sizes;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) sizes.push_back(layers[l].W.rows());
  return sizes;
}

Index GateNetwork::parameter_count() const {
  Index count = 0;
  for (const auto& layer : layers) count += layer.W.size() + layer.b.size();
  return count;
}

VectorXd GateNetwork::parameters() const {
  VectorXd flat(parameter_count());
  Index offset = 0;
  for (const auto& layer : layers) {
    flat.segment(offset, layer.W.size()) = layer.W.reshaped();
    offset += layer.W.size();
    flat.segment(offset, layer.b.size()) = layer.b;
    offset += layer.b.size();
  }
  return flat;
}

void GateNetwork::set_parameters(const VectorXd& flat) {
  if (flat.size() != parameter_count()) throw data_error("gate: parameter vector size mismatch");
  Index offset = 0;
  for (auto& layer : layers) {
    layer.W.reshaped() = flat.segment(offset, layer.W.size());
    offset += layer.W.size();
    layer.b = flat.segment(offset, layer.b.size());
    offset += layer.b.size();
  }
}

GateNetwork LinearGate::as_network() const {
  const Index r = eta.cols();
  return GateNetwork{{DenseLayer{eta.leftCols(r - 1), eta.col(r - 1)}}};
}

LinearGate LinearGate::from_network(const GateNetwork& net) {
  if (net.layers.size() != 1) throw data_error("linear gate: network has hidden layers");
  const auto& layer = net.layers.front();
  LinearGate g;
  g.eta.resize(layer.W.rows(), layer.W.cols() + 1);
  g.eta << layer.W, layer.b;
  return g;
}

MatrixXd LinearGate::full_eta() const {
  MatrixXd full = MatrixXd::Zero(eta.rows() + 1, eta.cols());
  full.topRows(eta.rows()) = eta;
  return full;
}

int gate_modes(const Gate& gate) {
  return visit_gate(gate, [](const auto& g) { return g.modes(); });
}

bool is_linear(const Gate& gate) { return std::holds_alternative<LinearGate>(gate); }

MatrixXd logits(const GateNetwork& net, const MatrixXd& X) {
  check_input(net, X);
  return forward(net, X).logits;
}

MatrixXd logits(const LinearGate& gate, const MatrixXd& X) {
  if (X.cols() + 1 != gate.eta.cols()) {
    throw data_error("linear gate: input has " + std::to_string(X.cols()) +
                     " columns, expected " + std::to_string(gate.eta.cols() - 1));
  }
  const Index r = gate.eta.cols();
  MatrixXd z = X * gate.eta.leftCols(r - 1).transpose();
  z.rowwise() += gate.eta.col(r - 1).transpose();
  return append_anchor(z);
}

MatrixXd logits(const Gate& gate, const MatrixXd& X) {
  return visit_gate(gate, [&](const auto& g) { return logits(g, X); });
}

VectorXd logits(const Gate& gate, const VectorXd& x) {
  return logits(gate, MatrixXd(x.transpose())).row(0).transpose();
}

MatrixXd probabilities(const Gate& gate, const MatrixXd& X) {
  return softmax_rows(logits(gate, X));
}

VectorXd probabilities(const Gate& gate, const VectorXd& x) {
  return softmax(logits(gate, x));
}

MatrixXd log_probabilities(const Gate& gate, const MatrixXd& X) {
  const MatrixXd a = logits(gate, X);
  return a.colwise() - log_sum_exp_rows(a);
}

GateNetwork init_gate(const GateShape& shape, double init_std, std::uint64_t seed) {
  if (!(init_std > 0.0)) throw usage_error("init_gate: init_std must be positive");
  if (shape.modes < 2) throw usage_error("init_gate: at least two modes required");
  if (shape.input_dim < 1) throw usage_error("init_gate: input dimension must be positive");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, init_std);
  GateNetwork net;
  Index in = shape.input_dim;
  auto add_layer = [&](Index out) {
    DenseLayer layer{MatrixXd(out, in), VectorXd::Zero(out)};
    for (Index j = 0; j < in; ++j) {
      for (Index i = 0; i < out; ++i) layer.W(i, j) = normal(rng);
    }
    net.layers.push_back(std::move(layer));
    in = out;
  };
  for (Index h : shape.hidden) {
    if (h < 1) throw usage_error("init_gate: hidden layer sizes must be positive");
    add_layer(h);
  }
  add_layer(shape.modes - 1);
  return net;
}

LinearGate init_linear_gate(Index regressor_dim, int modes, double init_std, std::uint64_t seed) {
  const GateNetwork net = init_gate({regressor_dim - 1, {}, modes}, init_std, seed);
  return LinearGate::from_network(net);
}

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0)) throw usage_error("adam: learning rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw usage_error("adam: betas must lie in (0, 1)");
  }
  if (!(epsilon > 0.0)) throw usage_error("adam: epsilon must be positive");
  if (epochs_per_m_step < 0) throw usage_error("adam: epochs must be non-negative");
  if (batch_size < 1) throw usage_error("adam: batch size must be at least 1");
}

double soft_label_loss(const Gate& gate, const MatrixXd& X, const MatrixXd& xi) {
  const MatrixXd logp = log_probabilities(gate, X);
  check_posterior(X, xi, static_cast<int>(logp.cols()));
  return -(xi.array() * logp.array()).sum();
}

LossGradient soft_label_loss_gradient(const GateNetwork& net, const MatrixXd& X,
                                      const MatrixXd& xi) {
  check_input(net, X);
  check_posterior(X, xi, net.modes());
  const Forward f = forward(net, X);
  const VectorXd lse = log_sum_exp_rows(f.logits);
  const VectorXd mass = xi.rowwise().sum();

  LossGradient out;
  out.loss = mass.dot(lse) - (xi.array() * f.logits.array()).sum();

  const Index s1 = net.modes() - 1;
  const MatrixXd prob = (f.logits.colwise() - lse).array().exp().matrix();
  MatrixXd delta = (prob.leftCols(s1).array().colwise() * mass.array()).matrix() - xi.leftCols(s1);

  out.gradient.resize(net.parameter_count());
  std::vector<VectorXd> parts(net.layers.size() * 2);
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const MatrixXd& input = f.activations[l];
    parts[2 * l] = (delta.transpose() * input).reshaped();
    parts[2 * l + 1] = delta.colwise().sum().transpose();
    if (l > 0) {
      delta = ((delta * net.layers[l].W).array() * (1.0 - input.array().square())).matrix();
    }
  }
  Index offset = 0;
  for (const auto& part : parts) {
    out.gradient.segment(offset, part.size()) = part;
    offset += part.size();
  }
  return out;
}

GateTrainResult train_soft_labels(Gate& gate, const MatrixXd& X, const MatrixXd& xi,
                                  const AdamConfig& adam, AdamState& state,
                                  std::mt19937_64& rng) {
  adam.validate();
  GateTrainResult result;
  result.loss_before = soft_label_loss(gate, X, xi);
  result.loss_after = result.loss_before;
  if (adam.epochs_per_m_step == 0 || X.rows() == 0) return result;
  if (!std::isfinite(result.loss_before)) throw numeric_error("gate: non-finite loss before training");

  GateNetwork net = std::holds_alternative<LinearGate>(gate)
                        ? std::get<LinearGate>(gate).as_network()
                        : std::get<GateNetwork>(gate);
  const GateNetwork start_net = net;
  const AdamState start_state = state;

  auto evaluate = [&](const GateNetwork& candidate) {
    return soft_label_loss(Gate{candidate}, X, xi);
  };

  double lr = adam.learning_rate;
  double loss = result.loss_before;
  for (int attempt = 1; attempt <= 2; ++attempt) {
    result.attempts = attempt;
    run_epochs(net, X, xi, adam, lr, state, rng);
    loss = evaluate(net);
    if (!std::isfinite(loss)) throw numeric_error("gate: training diverged (non-finite loss)");
    if (loss <= result.loss_before + kGateLossSlack) break;
    net = start_net;
    state = start_state;
    lr *= 0.5;
    loss = result.loss_before;
    if (attempt == 2) result.restored = true;
  }

  result.loss_after = loss;
  if (std::holds_alternative<LinearGate>(gate)) {
    gate = LinearGate::from_network(net);
  } else {
    gate = std::move(net);
  }
  return result;
}

GateTrainResult train_soft_labels(Gate& gate, const MatrixXd& X, const MatrixXd& xi,
                                  const AdamConfig& adam) {
  AdamState state;
  std::mt19937_64 rng(adam.shuffle_seed);
  return train_soft_labels(gate, X, xi, adam, state, rng);
}

}  // namespace npwarx
