#include <doctest.h>

#include <cmath>
#include <random>

#include "npwarx/gate.hpp"
#include "npwarx/softmax.hpp"
#include "oracles.hpp"

using namespace npwarx;

namespace {

GateNetwork random_network(std::mt19937_64& rng, Index in, std::vector<Index> hidden, int S,
                           double scale = 1.0) {
  GateNetwork net = init_gate({in, std::move(hidden), S}, scale, rng());
  std::normal_distribution<double> normal(0.0, scale);
  for (auto& layer : net.layers) {
    layer.b = VectorXd::NullaryExpr(layer.b.size(), [&] { return normal(rng); });
  }
  return net;
}

MatrixXd random_posterior(std::mt19937_64& rng, Index n, int S) {
  std::uniform_real_distribution<double> unif(0.01, 1.0);
  MatrixXd xi = MatrixXd::NullaryExpr(n, S, [&] { return unif(rng); });
  xi.array().colwise() /= xi.rowwise().sum().array();
  return xi;
}

}  // namespace

TEST_CASE("zero network gives zero logits") {
  GateNetwork net = init_gate({3, {5}, 4}, 1.0, 1);
  net.set_parameters(VectorXd::Zero(net.parameter_count()));
  const MatrixXd X = MatrixXd::Random(6, 3);
  CHECK(logits(Gate{net}, X).isZero(0.0));
}

TEST_CASE("linear gate bias passes through") {
  LinearGate g{MatrixXd::Zero(1, 3)};
  g.eta(0, 2) = 2.5;
  const MatrixXd X = MatrixXd::Random(10, 2) * 100.0;
  const MatrixXd a = logits(Gate{g}, X);
  CHECK((a.col(0).array() == 2.5).all());
  CHECK((a.col(1).array() == 0.0).all());
}

TEST_CASE("forward pass matches a unit-by-unit evaluation") {
  std::mt19937_64 rng(4);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const GateNetwork net = random_network(rng, 3, {6}, 3);
    const MatrixXd X = MatrixXd::NullaryExpr(5, 3, [&] { return std::normal_distribution<>(0, 2)(rng); });
    const MatrixXd a = logits(Gate{net}, X);
    for (Index k = 0; k < X.rows(); ++k) {
      const auto ref = oracle::gate_logits(net, X.row(k).transpose());
      for (Index s = 0; s < a.cols(); ++s) {
        worst = std::max(worst, static_cast<double>(std::fabs(a(k, s) - ref[s])));
      }
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("probabilities: analytic cases") {
  LinearGate g{MatrixXd::Zero(2, 2)};
  const VectorXd x = VectorXd::Constant(1, 0.3);
  const VectorXd p = probabilities(Gate{g}, x);
  CHECK(p(0) == doctest::Approx(1.0 / 3.0));
  CHECK(p(2) == doctest::Approx(1.0 / 3.0));

  LinearGate big{MatrixXd::Zero(2, 2)};
  big.eta(0, 1) = 1000.0;
  const VectorXd q = probabilities(Gate{big}, x);
  CHECK(q.allFinite());
  CHECK(q(0) == doctest::Approx(1.0));

  LinearGate two{MatrixXd::Zero(1, 2)};
  two.eta(0, 1) = std::log(3.0);
  const VectorXd t = probabilities(Gate{two}, x);
  CHECK(t(0) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(t(1) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("probabilities are normalized and the last logit is anchored") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const int S = 2 + static_cast<int>(rng() % 4);
    const GateNetwork net = random_network(rng, 2, {1 + static_cast<Index>(rng() % 5)}, S);
    const MatrixXd X = MatrixXd::NullaryExpr(20, 2, [&] { return std::normal_distribution<>(0, 3)(rng); });
    const MatrixXd a = logits(Gate{net}, X);
    CHECK((a.col(S - 1).array() == 0.0).all());
    const MatrixXd p = probabilities(Gate{net}, X);
    CHECK(((p.rowwise().sum().array() - 1.0).abs() < 1e-12).all());
    CHECK((p.array() > 0.0).all());
    CHECK((p.array() < 1.0).all());
  }
}

TEST_CASE("softmax is shift invariant") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(0.0, 5.0);
  for (int trial = 0; trial < 30; ++trial) {
    const VectorXd a = VectorXd::NullaryExpr(4, [&] { return normal(rng); });
    const double c = normal(rng) * 100.0;
    CHECK((softmax(a) - softmax(VectorXd(a.array() + c))).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("backpropagation matches central differences") {
  std::mt19937_64 rng(31);
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const Index n = 1 + static_cast<Index>(rng() % 8);
    const Index in = 1 + static_cast<Index>(rng() % 3);
    const int S = 2 + static_cast<int>(rng() % 3);
    std::vector<Index> hidden{1 + static_cast<Index>(rng() % 4)};
    if (trial % 3 == 0) hidden.push_back(1 + static_cast<Index>(rng() % 4));
    if (trial % 5 == 0) hidden.clear();
    const GateNetwork net = random_network(rng, in, hidden, S);
    const MatrixXd X = MatrixXd::NullaryExpr(n, in, [&] { return std::normal_distribution<>(0, 1)(rng); });
    const MatrixXd xi = random_posterior(rng, n, S);

    const VectorXd analytic = soft_label_loss_gradient(net, X, xi).gradient;
    const VectorXd numeric = oracle::loss_gradient_fd(net, X, xi, 1e-6);
    for (Index i = 0; i < analytic.size(); ++i) {
      const double denom = std::max({std::abs(analytic(i)), std::abs(numeric(i)), 1e-3});
      worst = std::max(worst, std::abs(analytic(i) - numeric(i)) / denom);
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("loss value agrees with the gradient routine") {
  std::mt19937_64 rng(6);
  const GateNetwork net = random_network(rng, 2, {3}, 3);
  const MatrixXd X = MatrixXd::Random(7, 2);
  const MatrixXd xi = random_posterior(rng, 7, 3);
  CHECK(soft_label_loss(Gate{net}, X, xi) ==
        doctest::Approx(soft_label_loss_gradient(net, X, xi).loss).epsilon(1e-13));
}

TEST_CASE("uniform soft labels give zero output gradient at the zero network") {
  GateNetwork net = init_gate({2, {4}, 3}, 1.0, 5);
  net.set_parameters(VectorXd::Zero(net.parameter_count()));
  const MatrixXd X = MatrixXd::Random(9, 2);
  const MatrixXd xi = MatrixXd::Constant(9, 3, 1.0 / 3.0);
  CHECK(soft_label_loss_gradient(net, X, xi).gradient.cwiseAbs().maxCoeff() < 1e-15);

  Gate gate{net};
  AdamConfig adam;
  adam.epochs_per_m_step = 1;
  adam.batch_size = 3;
  train_soft_labels(gate, X, xi, adam);
  CHECK(std::get<GateNetwork>(gate).parameters().cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("training on separable one-hot labels lowers the loss every epoch") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index n = 200;
  MatrixXd X = MatrixXd::NullaryExpr(n, 2, [&] { return normal(rng); });
  MatrixXd xi = MatrixXd::Zero(n, 2);
  for (Index k = 0; k < n; ++k) xi(k, X(k, 0) + 0.5 * X(k, 1) > 0.2 ? 0 : 1) = 1.0;

  Gate gate{init_gate({2, {5}, 2}, 0.5, 3)};
  AdamConfig adam;
  adam.epochs_per_m_step = 1;
  adam.batch_size = 20;
  AdamState state;
  std::mt19937_64 shuffle(1);
  double previous = soft_label_loss(gate, X, xi);
  for (int epoch = 0; epoch < 10; ++epoch) {
    const auto res = train_soft_labels(gate, X, xi, adam, state, shuffle);
    CHECK(res.loss_before == doctest::Approx(previous));
    CHECK(res.loss_after < previous);
    previous = res.loss_after;
  }
}

TEST_CASE("gate training never raises the full-data loss") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    const Index n = 150;
    const MatrixXd X = MatrixXd::NullaryExpr(n, 2, [&] { return std::normal_distribution<>(0, 3)(rng); });
    const MatrixXd xi = random_posterior(rng, n, 3);
    Gate gate{init_gate({2, {10}, 3}, 10.0, rng())};
    AdamConfig adam;
    adam.learning_rate = 0.5;
    AdamState state;
    std::mt19937_64 shuffle(trial);
    for (int step = 0; step < 5; ++step) {
      const auto res = train_soft_labels(gate, X, xi, adam, state, shuffle);
      CHECK(res.loss_after <= res.loss_before + 1e-6);
      CHECK(soft_label_loss(gate, X, xi) == doctest::Approx(res.loss_after));
    }
  }
}

TEST_CASE("linear gates train through the same routine") {
  std::mt19937_64 rng(9);
  const MatrixXd X = MatrixXd::NullaryExpr(120, 2, [&] { return std::normal_distribution<>(0, 1)(rng); });
  MatrixXd xi = MatrixXd::Zero(120, 2);
  for (Index k = 0; k < 120; ++k) xi(k, X(k, 1) > 0.0 ? 0 : 1) = 1.0;
  Gate gate{init_linear_gate(3, 2, 1.0, 4)};
  AdamConfig adam;
  adam.epochs_per_m_step = 20;
  adam.batch_size = 30;
  const auto res = train_soft_labels(gate, X, xi, adam);
  CHECK(res.loss_after < res.loss_before);
  REQUIRE(is_linear(gate));
  CHECK(std::get<LinearGate>(gate).eta(0, 1) > 0.0);
}

TEST_CASE("init_gate") {
  const GateNetwork a = init_gate({2, {10}, 2}, 10.0, 42);
  const GateNetwork b = init_gate({2, {10}, 2}, 10.0, 42);
  CHECK(a.parameters() == b.parameters());
  CHECK(a.modes() == 2);
  CHECK(a.layers.back().W.rows() == 1);
  for (const auto& layer : a.layers) CHECK(layer.b.isZero(0.0));

  const GateNetwork big = init_gate({40, {40}, 2}, 10.0, 7);
  const VectorXd w = big.layers.front().W.reshaped();
  REQUIRE(w.size() >= 1000);
  const double mean = w.mean();
  const double sd = std::sqrt((w.array() - mean).square().sum() / (w.size() - 1));
  CHECK(sd > 8.0);
  CHECK(sd < 12.0);

  CHECK_THROWS_AS(init_gate({2, {10}, 2}, 0.0, 1), Error);
  CHECK_THROWS_AS(init_gate({2, {10}, 1}, 1.0, 1), Error);
}

TEST_CASE("parameter vector round trip") {
  std::mt19937_64 rng(10);
  GateNetwork net = random_network(rng, 3, {4, 2}, 3);
  const VectorXd p = net.parameters();
  GateNetwork other = init_gate({3, {4, 2}, 3}, 1.0, 99);
  other.set_parameters(p);
  CHECK(other.parameters() == p);
  CHECK(logits(Gate{other}, MatrixXd(MatrixXd::Ones(2, 3))) == logits(Gate{net}, MatrixXd(MatrixXd::Ones(2, 3))));
}
