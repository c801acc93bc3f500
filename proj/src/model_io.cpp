#include "npwarx/model_io.hpp"

#include <fstream>
#include <sstream>

#include "npwarx/error.hpp"
#include "npwarx/pwarx.hpp"

namespace npwarx {

using nlohmann::json;

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array()) throw data_error("model file: expected a matrix");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = rows > 0 ? static_cast<Index>(j.front().size()) : 0;
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    if (static_cast<Index>(j[i].size()) != cols) throw data_error("model file: ragged matrix");
    for (Index k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

namespace {

json vector_to_json(const VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

json to_json(const ModelFile& file) {
  const MixtureModel& m = file.model;
  json doc;
  doc["format"] = kModelFormat;
  doc["regressors"] = {{"n_a", file.regressors.n_a},
                       {"n_b", file.regressors.n_b},
                       {"q", file.regressors.q}};
  doc["modes"] = m.S();
  doc["variance"] = to_string(m.variance_mode);

  json experts = json::array();
  for (const auto& mode : m.modes) {
    experts.push_back({{"theta", vector_to_json(mode.theta)}, {"sigma", mode.sigma}});
  }
  doc["experts"] = std::move(experts);

  json gate;
  if (const auto* lin = std::get_if<LinearGate>(&m.gate)) {
    gate["type"] = "linear";
    gate["eta"] = matrix_to_json(lin->eta);
  } else {
    const auto& net = std::get<GateNetwork>(m.gate);
    gate["type"] = "neural";
    gate["activation"] = "tanh";
    json layers = json::array();
    for (const auto& layer : net.layers) {
      layers.push_back({{"W", matrix_to_json(layer.W)}, {"b", vector_to_json(layer.b)}});
    }
    gate["layers"] = std::move(layers);
  }
  gate["input_mean"] = vector_to_json(m.gate_input.mean);
  gate["input_scale"] = vector_to_json(m.gate_input.scale);
  doc["gate"] = std::move(gate);

  if (is_linear(m.gate)) {
    const PolyhedralPartition part = prarx_to_pwarx(m);
    json regions = json::array();
    for (int s = 0; s < part.regions(); ++s) {
      std::vector<std::string> ops;
      for (bool strict : part.strict[s]) ops.emplace_back(strict ? "<" : "<=");
      regions.push_back({{"region", s + 1}, {"H", matrix_to_json(part.H[s])}, {"ops", ops}});
    }
    doc["partition"] = std::move(regions);
  }

  doc["fit"] = {{"seed", file.meta.seed},
                {"iterations", file.meta.iterations},
                {"final_loglik", file.meta.final_loglik},
                {"termination", file.meta.termination}};
  return doc;
}

ModelFile model_from_json(const json& doc) {
  try {
    if (doc.value("format", std::string{}) != kModelFormat) {
      throw data_error("model file: unsupported format '" + doc.value("format", std::string{}) +
                       "'");
    }
    ModelFile file;
    const auto& reg = doc.at("regressors");
    file.regressors = {reg.at("n_a").get<int>(), reg.at("n_b").get<int>(), reg.at("q").get<int>()};
    file.regressors.validate();

    MixtureModel& m = file.model;
    m.variance_mode = parse_variance_mode(doc.at("variance").get<std::string>());
    for (const auto& e : doc.at("experts")) {
      m.modes.push_back({vector_from_json(e.at("theta")), e.at("sigma").get<double>()});
    }
    const auto& gate = doc.at("gate");
    const auto type = gate.at("type").get<std::string>();
    if (type == "linear") {
      m.gate = LinearGate{matrix_from_json(gate.at("eta"))};
    } else if (type == "neural") {
      GateNetwork net;
      for (const auto& layer : gate.at("layers")) {
        net.layers.push_back({matrix_from_json(layer.at("W")), vector_from_json(layer.at("b"))});
      }
      m.gate = std::move(net);
    } else {
      throw data_error("model file: unknown gate type '" + type + "'");
    }
    m.gate_input = {vector_from_json(gate.at("input_mean")), vector_from_json(gate.at("input_scale"))};

    if (m.S() != doc.at("modes").get<int>()) throw data_error("model file: mode count mismatch");
    if (m.regressor_dim() != file.regressors.regressor_dim()) {
      throw data_error("model file: theta length does not match regressor config");
    }
    m.validate();

    const auto& fit = doc.at("fit");
    file.meta.seed = fit.at("seed").get<std::uint64_t>();
    file.meta.iterations = fit.at("iterations").get<int>();
    file.meta.final_loglik = fit.at("final_loglik").get<double>();
    file.meta.termination = fit.at("termination").get<std::string>();
    return file;
  } catch (const json::exception& e) {
    throw data_error(std::string("model file: ") + e.what());
  }
}

void save_model(const ModelFile& file, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path + "'");
  out << to_json(file).dump(2) << '\n';
  if (!out) throw io_error("write failed for '" + path + "'");
}

ModelFile load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw data_error(path + ": " + e.what());
  }
  return model_from_json(doc);
}

MatrixXd read_theta_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw data_error(path + ":" + std::to_string(line_no) + ": non-numeric cell '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw data_error(path + ":" + std::to_string(line_no) + ": ragged row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw data_error(path + ": no parameter rows");
  MatrixXd m(rows.size(), rows.front().size());
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

void write_theta_csv(const MatrixXd& thetas, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path + "'");
  out << "# one row per mode; columns follow the extended regressor [x 1]\n";
  for (Index i = 0; i < thetas.rows(); ++i) {
    for (Index j = 0; j < thetas.cols(); ++j) {
      out << (j ? "," : "") << format_double(thetas(i, j));
    }
    out << '\n';
  }
}

}  // namespace npwarx
