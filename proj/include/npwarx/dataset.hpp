#pragma once

#include <array>
#include <optional>
#include <string>

#include "npwarx/types.hpp"

namespace npwarx {

/// Raw input/output record. Row t of `u` is the input vector u_t.
struct SeriesData {
  MatrixXd u;  // N_raw x q
  VectorXd y;  // N_raw
  std::optional<VectorXi> mode;    // generating dynamics label, 1-based
  std::optional<VectorXi> region;  // generating region label, 1-based

  Index length() const { return y.size(); }
  Index input_dim() const { return u.cols(); }

  /// Throws a data error on length mismatch or non-finite values.
  void validate() const;
};

struct RegressorConfig {
  int n_a = 1;
  int n_b = 1;
  int q = 1;

  /// r = n_a + q * n_b + 1, the length of an extended regressor.
  int regressor_dim() const { return n_a + q * n_b + 1; }
  int max_lag() const { return n_a > n_b ? n_a : n_b; }
  void validate() const;
};

/// Regression view of a series: X holds x_k, Phi holds [x_k 1].
struct Dataset {
  MatrixXd X;
  MatrixXd Phi;
  VectorXd y;
  std::optional<VectorXi> labels;
  std::optional<VectorXi> regions;

  Index size() const { return y.size(); }
  Index regressor_dim() const { return Phi.cols(); }
};

Dataset build_regressors(const SeriesData& series, const RegressorConfig& cfg);

/// Contiguous rows [begin, begin + count).
Dataset slice(const Dataset& data, Index begin, Index count);

/// Time-ordered contiguous split into train / validation / test.
std::array<Dataset, 3> split(const Dataset& data, Index n_train, Index n_val, Index n_test);

/// Row-wise concatenation; both datasets must share the regressor layout.
Dataset concat(const Dataset& a, const Dataset& b);

/// Contiguous raw-series rows [begin, begin + count).
SeriesData slice(const SeriesData& series, Index begin, Index count);

/// Per-column z-score with statistics frozen from a reference matrix.
struct Standardizer {
  VectorXd mean;
  VectorXd scale;

  static Standardizer fit(const MatrixXd& X);
  static Standardizer identity(Index dim);

  MatrixXd apply(const MatrixXd& X) const;
  bool is_identity() const;
};

/// CSV schema: `k,u_1,...,u_q,y[,mode][,region]`. A single input column may be named `u`.
SeriesData read_csv(const std::string& path);
void write_csv(const SeriesData& series, const std::string& path);

/// Round-trip safe decimal formatting (17 significant digits).
std::string format_double(double value);

}  // namespace npwarx
