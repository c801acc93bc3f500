#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "npwarx/dataset.hpp"
#include "npwarx/error.hpp"

using namespace npwarx;

namespace {

SeriesData scalar_series(std::vector<double> y, std::vector<double> u) {
  SeriesData s;
  s.y = Eigen::Map<VectorXd>(y.data(), static_cast<Index>(y.size()));
  s.u = Eigen::Map<MatrixXd>(u.data(), static_cast<Index>(u.size()), 1);
  return s;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("npwarx_test_" + name)).string();
}

SeriesData random_series(std::uint64_t seed, Index n, Index q) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 3.0);
  SeriesData s;
  s.u = MatrixXd::NullaryExpr(n, q, [&] { return normal(rng); });
  s.y = VectorXd::NullaryExpr(n, [&] { return normal(rng); });
  return s;
}

}  // namespace

TEST_CASE("build_regressors shifts lags") {
  const auto ds = build_regressors(scalar_series({1, 2, 3}, {10, 20, 30}), {1, 1, 1});
  REQUIRE(ds.size() == 2);
  CHECK(ds.X(0, 0) == 1);
  CHECK(ds.X(0, 1) == 10);
  CHECK(ds.X(1, 0) == 2);
  CHECK(ds.X(1, 1) == 20);
  CHECK(ds.y(0) == 2);
  CHECK(ds.y(1) == 3);
}

TEST_CASE("build_regressors without autoregressive lag") {
  const auto ds = build_regressors(scalar_series({5, 6}, {7, 8}), {0, 1, 1});
  REQUIRE(ds.size() == 1);
  CHECK(ds.X.cols() == 1);
  CHECK(ds.X(0, 0) == 7);
  CHECK(ds.y(0) == 6);
}

TEST_CASE("regressor dimension with vector input") {
  const RegressorConfig cfg{2, 1, 2};
  CHECK(cfg.regressor_dim() == 5);
  const auto ds = build_regressors(random_series(3, 10, 2), cfg);
  CHECK(ds.Phi.cols() == 5);
  CHECK(ds.size() == 8);
}

TEST_CASE("vector-input lag ordering") {
  SeriesData s = random_series(4, 6, 2);
  const auto ds = build_regressors(s, {2, 2, 2});
  // Row 0 corresponds to t = 2: [y1, y0, u1', u0'].
  CHECK(ds.X(0, 0) == s.y(1));
  CHECK(ds.X(0, 1) == s.y(0));
  CHECK(ds.X(0, 2) == s.u(1, 0));
  CHECK(ds.X(0, 3) == s.u(1, 1));
  CHECK(ds.X(0, 4) == s.u(0, 0));
  CHECK(ds.X(0, 5) == s.u(0, 1));
  CHECK(ds.y(0) == s.y(2));
}

TEST_CASE("extended regressor invariants hold for random configurations") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const int n_a = static_cast<int>(rng() % 4);
    const int n_b = 1 + static_cast<int>(rng() % 3);
    const int q = 1 + static_cast<int>(rng() % 3);
    const RegressorConfig cfg{n_a, n_b, q};
    const auto s = random_series(rng(), 20 + static_cast<Index>(rng() % 30), q);
    const auto ds = build_regressors(s, cfg);
    CHECK(ds.size() == s.length() - cfg.max_lag());
    CHECK((ds.Phi.col(cfg.regressor_dim() - 1).array() == 1.0).all());
    CHECK(ds.Phi.leftCols(cfg.regressor_dim() - 1) == ds.X);
    const auto again = build_regressors(s, cfg);
    CHECK(again.Phi == ds.Phi);
    CHECK(again.y == ds.y);
  }
}

TEST_CASE("build_regressors rejects bad input") {
  CHECK_THROWS_AS(build_regressors(scalar_series({1}, {1}), {1, 1, 1}), Error);
  CHECK_THROWS_AS(build_regressors(scalar_series({1, 2}, {1, 2}), {0, 0, 1}), Error);
  auto s = scalar_series({1, 2, 3}, {1, 2, 3});
  s.y(1) = std::nan("");
  CHECK_THROWS_AS(build_regressors(s, {1, 1, 1}), Error);
  s = scalar_series({1, 2, 3}, {1, 2, 3});
  s.u(2, 0) = INFINITY;
  CHECK_THROWS_AS(build_regressors(s, {1, 1, 1}), Error);
}

TEST_CASE("split is contiguous and order preserving") {
  SeriesData s = random_series(5, 7, 1);
  const auto ds = build_regressors(s, {1, 1, 1});
  REQUIRE(ds.size() == 6);
  const auto [a, b, c] = split(ds, 2, 2, 2);
  CHECK(a.y == ds.y.segment(0, 2));
  CHECK(b.y == ds.y.segment(2, 2));
  CHECK(c.y == ds.y.segment(4, 2));
  const auto whole = concat(concat(a, b), c);
  CHECK(whole.Phi == ds.Phi);
  CHECK(whole.y == ds.y);
}

TEST_CASE("split sizes") {
  const auto ds = build_regressors(random_series(6, 6001, 1), {1, 1, 1});
  const auto parts = split(ds, 4000, 1000, 1000);
  CHECK(parts[0].size() == 4000);
  CHECK(parts[1].size() == 1000);
  CHECK(parts[2].size() == 1000);
  CHECK(parts[2].y == ds.y.tail(1000));

  const auto small = build_regressors(random_series(7, 11, 1), {1, 1, 1});
  const auto degenerate = split(small, 10, 0, 0);
  CHECK(degenerate[0].size() == 10);
  CHECK(degenerate[1].size() == 0);
  CHECK(degenerate[2].size() == 0);
  CHECK_THROWS_AS(split(small, 5, 5, 5), Error);
}

TEST_CASE("csv read of the documented schema") {
  const auto path = temp_path("schema.csv");
  {
    std::ofstream out(path);
    out << "k,u,y\n0,0.5,1\n1,-1.25,2\n2,3,3.5\n";
  }
  const auto s = read_csv(path);
  CHECK(s.length() == 3);
  CHECK(s.input_dim() == 1);
  CHECK(s.u(1, 0) == -1.25);
  CHECK(s.y(2) == 3.5);
  CHECK_FALSE(s.mode.has_value());
}

TEST_CASE("csv round trip is exact") {
  SeriesData s = random_series(8, 50, 2);
  s.y(3) = 0.1 + 0.2;
  s.u(4, 1) = 1e-300;
  s.mode = VectorXi::NullaryExpr(50, [] { return 1; });
  const auto path = temp_path("roundtrip.csv");
  write_csv(s, path);
  const auto back = read_csv(path);
  CHECK(back.u == s.u);
  CHECK(back.y == s.y);
  REQUIRE(back.mode.has_value());
  CHECK(*back.mode == *s.mode);
  write_csv(back, path);
  CHECK(read_csv(path).y == back.y);
}

TEST_CASE("csv errors name the line") {
  const auto path = temp_path("bad.csv");
  {
    std::ofstream out(path);
    out << "k,u,y\n1,0.5,1\n2,abc,1.0\n";
  }
  try {
    read_csv(path);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
    CHECK(e.kind() == ErrorKind::data);
  }
  {
    std::ofstream out(path);
    out << "k,u\n1,0.5\n";
  }
  CHECK_THROWS_AS(read_csv(path), Error);
  {
    std::ofstream out(path);
    out << "k,u,y\n1,0.5\n";
  }
  CHECK_THROWS_AS(read_csv(path), Error);
  CHECK_THROWS_AS(read_csv(temp_path("does_not_exist.csv")), Error);
}

TEST_CASE("standardizer uses reference statistics") {
  MatrixXd X(4, 2);
  X << 1, 10, 2, 10, 3, 10, 4, 10;
  const auto st = Standardizer::fit(X);
  const MatrixXd Z = st.apply(X);
  CHECK(std::abs(Z.col(0).mean()) < 1e-15);
  CHECK(std::abs(Z.col(0).squaredNorm() / 4 - 1.0) < 1e-12);
  CHECK((Z.col(1).array() == 0.0).all());
  CHECK(Standardizer::identity(2).is_identity());
}
