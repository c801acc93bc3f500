#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "npwarx/benchmark.hpp"
#include "npwarx/pwarx.hpp"
#include "oracles.hpp"

using namespace npwarx;

TEST_CASE("region examples") {
  CHECK(BenchmarkSystem::region(-3.0, 0.0) == 1);
  CHECK(BenchmarkSystem::region(0.0, 0.0) == 2);
  CHECK(BenchmarkSystem::region(2.0, 0.0) == 3);
  CHECK(BenchmarkSystem::dynamics(1) == 1);
  CHECK(BenchmarkSystem::dynamics(2) == 2);
  CHECK(BenchmarkSystem::dynamics(3) == 1);
  CHECK(BenchmarkSystem::mean_output(0.0, 0.0) == doctest::Approx(-0.5));
  CHECK(BenchmarkSystem::mean_output(2.0, 1.0) == doctest::Approx(-0.8 + 1.0 + 1.5));
}

TEST_CASE("generated series is consistent with the system") {
  const SeriesData s = generate(2000, 0.0, 3);
  REQUIRE(s.y.size() == 2001);
  REQUIRE(s.mode);
  REQUIRE(s.region);
  CHECK(s.y(0) == 0.0);
  std::array<int, 3> counts{};
  for (Index k = 1; k < s.y.size(); ++k) {
    const double yp = s.y(k - 1), up = s.u(k - 1, 0);
    const int r = BenchmarkSystem::region(yp, up);
    int hits = (4 * yp - up + 10 < 0) + (5 * yp + up - 6 > 0) +
               (!(4 * yp - up + 10 < 0) && !(5 * yp + up - 6 > 0));
    CHECK(hits == 1);
    CHECK((*s.region)(k) == r);
    CHECK((*s.mode)(k) == BenchmarkSystem::dynamics(r));
    CHECK(s.y(k) == doctest::Approx(BenchmarkSystem::mean_output(yp, up)));
    ++counts[r - 1];
  }
  for (int c : counts) CHECK(c > 0);
  CHECK((s.u.array() >= -4.0).all());
  CHECK((s.u.array() <= 4.0).all());
}

TEST_CASE("regions one and three share dynamics") {
  CHECK(BenchmarkSystem::theta(BenchmarkSystem::dynamics(1)) ==
        BenchmarkSystem::theta(BenchmarkSystem::dynamics(3)));
  MatrixXd expected(2, 3);
  expected << -0.4, 1.0, 1.5, 0.5, -1.0, -0.5;
  CHECK(BenchmarkSystem::true_thetas() == expected);
}

TEST_CASE("generation is deterministic per seed") {
  const SeriesData a = generate(300, 0.2, 9);
  const SeriesData b = generate(300, 0.2, 9);
  const SeriesData c = generate(300, 0.2, 10);
  CHECK(a.y == b.y);
  CHECK(a.u == b.u);
  CHECK(a.y != c.y);
}

TEST_CASE("noise level") {
  const SeriesData s = generate(20000, 0.2, 4);
  double ss = 0.0;
  for (Index k = 1; k < s.y.size(); ++k) {
    const double e = s.y(k) - BenchmarkSystem::mean_output(s.y(k - 1), s.u(k - 1, 0));
    ss += e * e;
  }
  CHECK(std::sqrt(ss / 20000.0) == doctest::Approx(0.2).epsilon(0.02));
}

TEST_CASE("best reordering") {
  const MatrixXd truth = BenchmarkSystem::true_thetas();
  MatrixXd swapped(2, 3);
  swapped << truth.row(1), truth.row(0);
  const Reordering r = best_reordering(swapped, truth);
  CHECK(r.perm == std::vector<int>{1, 0});
  CHECK(r.distance == 0.0);
  CHECK(best_reordering(truth, truth).perm == std::vector<int>{0, 1});

  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd est = MatrixXd::NullaryExpr(4, 3, [&] { return normal(rng); });
    const MatrixXd ref = MatrixXd::NullaryExpr(4, 3, [&] { return normal(rng); });
    std::vector<int> perm{0, 1, 2, 3};
    double best = std::numeric_limits<double>::infinity();
    do {
      double d = 0.0;
      for (int s = 0; s < 4; ++s) d += (est.row(perm[s]) - ref.row(s)).norm();
      best = std::min(best, d);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(best_reordering(est, ref).distance == doctest::Approx(best));
  }
}

TEST_CASE("parameter fit") {
  const MatrixXd truth = BenchmarkSystem::true_thetas();
  CHECK(parameter_fit(truth, truth) == 1.0);
  CHECK(parameter_fit(MatrixXd::Zero(2, 3), truth) == doctest::Approx(0.0));
  MatrixXd reported(2, 3);
  reported << -0.400, 0.999, 1.503, 0.499, -0.995, -0.499;
  CHECK(parameter_fit(reported, truth) == doctest::Approx(0.997).epsilon(0.005));
}

TEST_CASE("mode fit") {
  VectorXi a(4), b(4);
  a << 1, 2, 2, 1;
  b << 1, 2, 1, 1;
  CHECK(mode_fit(a, a) == 1.0);
  CHECK(mode_fit(a, b) == 0.75);
  VectorXi flipped = 3 - a.array();
  CHECK(mode_fit(flipped, a) == 0.0);
}

TEST_CASE("evaluating the exact system") {
  const Dataset test = build_regressors(generate(1000, 0.2, 8), benchmark_regressors());
  MixtureModel model = oracle::benchmark_model();
  const EvalReport rep = evaluate(model, test, BenchmarkSystem::true_thetas());
  CHECK(*rep.F_theta == 1.0);
  CHECK(*rep.F_s == 1.0);
  const double var = rep.residuals.squaredNorm() / static_cast<double>(rep.residuals.size());
  CHECK(var == doctest::Approx(0.04).epsilon(0.15));

  const Dataset noiseless = build_regressors(generate(500, 0.0, 8), benchmark_regressors());
  CHECK(residuals(model, noiseless).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("evaluation reorders swapped modes consistently") {
  const Dataset test = build_regressors(generate(800, 0.2, 12), benchmark_regressors());
  MixtureModel model = oracle::benchmark_model();
  permute_modes(model, {1, 0});
  MixtureModel copy = model;
  const EvalReport rep = evaluate(model, test, BenchmarkSystem::true_thetas());
  CHECK(rep.permutation == std::vector<int>{1, 0});
  CHECK(*rep.F_s == 1.0);

  const EvalReport unlabeled_truth = evaluate(copy, test, std::nullopt);
  CHECK(!unlabeled_truth.F_theta);
  CHECK(*unlabeled_truth.F_s == 1.0);
}
