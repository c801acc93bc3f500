#include "npwarx/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "npwarx/error.hpp"

namespace npwarx {

namespace {

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos ? std::string{}
                                                : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_number(const std::string& cell, std::size_t line_no, const std::string& path) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  if (!cell.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (cell.empty() || ec != std::errc{} || ptr != end) {
    throw data_error(path + ":" + std::to_string(line_no) + ": non-numeric cell '" + cell + "'");
  }
  return value;
}

int parse_label(const std::string& cell, std::size_t line_no, const std::string& path) {
  const double v = parse_number(cell, line_no, path);
  if (v != std::floor(v)) {
    throw data_error(path + ":" + std::to_string(line_no) + ": label '" + cell +
                     "' is not an integer");
  }
  return static_cast<int>(v);
}

Dataset rows_of(const Dataset& data, Index begin, Index count) {
  Dataset out;
  out.X = data.X.middleRows(begin, count);
  out.Phi = data.Phi.middleRows(begin, count);
  out.y = data.y.segment(begin, count);
  if (data.labels) out.labels = data.labels->segment(begin, count);
  if (data.regions) out.regions = data.regions->segment(begin, count);
  return out;
}

}  // namespace

void SeriesData::validate() const {
  if (u.rows() != y.size()) {
    throw data_error("series: input has " + std::to_string(u.rows()) + " rows but output has " +
                     std::to_string(y.size()));
  }
  if (mode && mode->size() != y.size()) throw data_error("series: mode label length mismatch");
  if (region && region->size() != y.size()) throw data_error("series: region label length mismatch");
  if (!u.allFinite() || !y.allFinite()) throw data_error("series: non-finite values");
}

void RegressorConfig::validate() const {
  if (n_a < 0 || n_b < 0) throw usage_error("regressor: lags must be non-negative");
  if (n_a + n_b < 1) throw usage_error("regressor: n_a + n_b must be at least 1");
  if (q < 1) throw usage_error("regressor: input dimension q must be positive");
}

Dataset build_regressors(const SeriesData& series, const RegressorConfig& cfg) {
  cfg.validate();
  series.validate();
  if (series.input_dim() != cfg.q) {
    throw data_error("series has " + std::to_string(series.input_dim()) +
                     " input columns, config expects q=" + std::to_string(cfg.q));
  }
  const Index lag = cfg.max_lag();
  if (series.length() <= lag) {
    throw data_error("series of length " + std::to_string(series.length()) +
                     " is too short for max lag " + std::to_string(lag));
  }

  const Index n = series.length() - lag;
  const Index r = cfg.regressor_dim();
  Dataset out;
  out.X.resize(n, r - 1);
  out.y = series.y.tail(n);
  for (Index k = 0; k < n; ++k) {
    const Index t = k + lag;
    Index col = 0;
    for (int i = 1; i <= cfg.n_a; ++i) out.X(k, col++) = series.y(t - i);
    for (int i = 1; i <= cfg.n_b; ++i) {
      out.X.block(k, col, 1, cfg.q) = series.u.row(t - i);
      col += cfg.q;
    }
  }
  out.Phi.resize(n, r);
  out.Phi.leftCols(r - 1) = out.X;
  out.Phi.col(r - 1).setOnes();
  if (series.mode) out.labels = series.mode->tail(n);
  if (series.region) out.regions = series.region->tail(n);
  return out;
}

Dataset slice(const Dataset& data, Index begin, Index count) {
  if (begin < 0 || count < 0 || begin + count > data.size()) {
    throw usage_error("dataset slice out of range");
  }
  return rows_of(data, begin, count);
}

std::array<Dataset, 3> split(const Dataset& data, Index n_train, Index n_val, Index n_test) {
  if (n_train < 0 || n_val < 0 || n_test < 0) throw usage_error("split sizes must be non-negative");
  if (n_train + n_val + n_test != data.size()) {
    throw usage_error("split sizes " + std::to_string(n_train) + "+" + std::to_string(n_val) +
                      "+" + std::to_string(n_test) + " do not sum to N=" +
                      std::to_string(data.size()));
  }
  return {rows_of(data, 0, n_train), rows_of(data, n_train, n_val),
          rows_of(data, n_train + n_val, n_test)};
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.Phi.cols() != b.Phi.cols()) throw data_error("concat: regressor dimensions differ");
  Dataset out;
  out.X.resize(a.size() + b.size(), a.X.cols());
  out.X << a.X, b.X;
  out.Phi.resize(a.size() + b.size(), a.Phi.cols());
  out.Phi << a.Phi, b.Phi;
  out.y.resize(a.size() + b.size());
  out.y << a.y, b.y;
  if (a.labels && b.labels) {
    out.labels = VectorXi(a.size() + b.size());
    *out.labels << *a.labels, *b.labels;
  }
  if (a.regions && b.regions) {
    out.regions = VectorXi(a.size() + b.size());
    *out.regions << *a.regions, *b.regions;
  }
  return out;
}

SeriesData slice(const SeriesData& series, Index begin, Index count) {
  if (begin < 0 || count < 0 || begin + count > series.length()) {
    throw usage_error("series slice out of range");
  }
  SeriesData out;
  out.u = series.u.middleRows(begin, count);
  out.y = series.y.segment(begin, count);
  if (series.mode) out.mode = series.mode->segment(begin, count);
  if (series.region) out.region = series.region->segment(begin, count);
  return out;
}

Standardizer Standardizer::fit(const MatrixXd& X) {
  Standardizer s;
  const double n = static_cast<double>(X.rows());
  s.mean = X.colwise().mean().transpose();
  s.scale.resize(X.cols());
  for (Index j = 0; j < X.cols(); ++j) {
    const double var = (X.col(j).array() - s.mean(j)).square().sum() / n;
    s.scale(j) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

Standardizer Standardizer::identity(Index dim) {
  return {VectorXd::Zero(dim), VectorXd::Ones(dim)};
}

MatrixXd Standardizer::apply(const MatrixXd& X) const {
  return ((X.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array()).matrix();
}

bool Standardizer::is_identity() const {
  return (mean.array() == 0.0).all() && (scale.array() == 1.0).all();
}

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

SeriesData read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw data_error(path + ": empty file");
  const auto header = split_cells(line);

  int y_col = -1, mode_col = -1, region_col = -1;
  std::vector<int> u_cols;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    const auto& name = header[c];
    if (name == "y") y_col = c;
    else if (name == "mode") mode_col = c;
    else if (name == "region") region_col = c;
    else if (name == "u" || name.rfind("u_", 0) == 0) u_cols.push_back(c);
  }
  if (y_col < 0) throw data_error(path + ": missing column 'y'");
  if (u_cols.empty()) throw data_error(path + ": missing input column 'u' or 'u_1'");

  std::vector<std::vector<double>> u_rows;
  std::vector<double> ys;
  std::vector<int> modes, regions;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_cells(line);
    if (cells.size() != header.size()) {
      throw data_error(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " cells, found " +
                       std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (static_cast<int>(c) != mode_col && static_cast<int>(c) != region_col) {
        parse_number(cells[c], line_no, path);
      }
    }
    std::vector<double> u;
    for (int c : u_cols) u.push_back(parse_number(cells[c], line_no, path));
    u_rows.push_back(std::move(u));
    ys.push_back(parse_number(cells[y_col], line_no, path));
    if (mode_col >= 0) modes.push_back(parse_label(cells[mode_col], line_no, path));
    if (region_col >= 0) regions.push_back(parse_label(cells[region_col], line_no, path));
  }

  SeriesData s;
  const Index n = static_cast<Index>(ys.size());
  s.u.resize(n, static_cast<Index>(u_cols.size()));
  s.y = Eigen::Map<const VectorXd>(ys.data(), n);
  for (Index t = 0; t < n; ++t) {
    for (Index j = 0; j < s.u.cols(); ++j) s.u(t, j) = u_rows[t][j];
  }
  if (mode_col >= 0) s.mode = Eigen::Map<const VectorXi>(modes.data(), n);
  if (region_col >= 0) s.region = Eigen::Map<const VectorXi>(regions.data(), n);
  s.validate();
  return s;
}

void write_csv(const SeriesData& series, const std::string& path) {
  series.validate();
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path + "'");

  const Index q = series.input_dim();
  out << "k";
  if (q == 1) {
    out << ",u";
  } else {
    for (Index j = 1; j <= q; ++j) out << ",u_" << j;
  }
  out << ",y";
  if (series.mode) out << ",mode";
  if (series.region) out << ",region";
  out << '\n';

  for (Index t = 0; t < series.length(); ++t) {
    out << t;
    for (Index j = 0; j < q; ++j) out << ',' << format_double(series.u(t, j));
    out << ',' << format_double(series.y(t));
    if (series.mode) out << ',' << (*series.mode)(t);
    if (series.region) out << ',' << (*series.region)(t);
    out << '\n';
  }
  if (!out) throw io_error("write failed for '" + path + "'");
}

}  // namespace npwarx
