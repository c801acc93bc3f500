#include "npwarx/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "npwarx/error.hpp"

namespace npwarx {

using nlohmann::json;

namespace {

void reject_unknown(const json& section, const std::set<std::string>& known,
                    const std::string& where) {
  if (!section.is_object()) throw usage_error("config: '" + where + "' must be an object");
  for (const auto& [key, _] : section.items()) {
    if (!known.count(key)) throw usage_error("config: unknown key '" + where + "." + key + "'");
  }
}

template <typename T>
void read_if(const json& section, const char* key, T& target) {
  if (section.contains(key)) target = section.at(key).get<T>();
}

const char* gate_name(GateKind kind) { return kind == GateKind::linear ? "linear" : "neural"; }

GateKind parse_gate(const std::string& text) {
  if (text == "neural") return GateKind::neural;
  if (text == "linear") return GateKind::linear;
  throw usage_error("config: unknown gate '" + text + "' (expected neural or linear)");
}

PredictMode parse_predict(const std::string& text) {
  if (text == "hard") return PredictMode::hard;
  if (text == "weighted") return PredictMode::weighted;
  throw usage_error("config: unknown predict mode '" + text + "' (expected hard or weighted)");
}

}  // namespace

std::string RunPaths::resolve(const std::string& explicit_path,
                              const std::string& default_name) const {
  if (!explicit_path.empty()) return explicit_path;
  return (std::filesystem::path(out_dir) / default_name).string();
}

void RunConfig::validate() const {
  regressors.validate();
  em.validate();
  if (model.S < 2) throw usage_error("config: model.modes must be at least 2");
  if (n_samples < 1) throw usage_error("config: data.n_samples must be at least 1");
  if (!(noise_std >= 0.0)) throw usage_error("config: data.noise_std must be non-negative");
  if (split.train < 0 || split.val < 0 || split.test < 0) {
    throw usage_error("config: split sizes must be non-negative");
  }
  if (split.total() != n_samples) {
    throw usage_error("config: split sizes sum to " + std::to_string(split.total()) +
                      " but data.n_samples is " + std::to_string(n_samples));
  }
}

RunConfig benchmark_preset() {
  RunConfig cfg;
  cfg.seed = 1;
  cfg.regressors = {1, 1, 1};
  cfg.model = {2, GateKind::neural, {10}, false};
  cfg.em.max_iters = 500;
  cfg.em.loglik_tol = 1e-4;
  cfg.em.n_restarts = 5;
  cfg.em.init_std = 10.0;
  cfg.em.kmeans_init = true;
  cfg.em.kmeans_space = KMeansSpace::output;
  cfg.em.variance = VarianceMode::pooled;
  cfg.em.adam = {0.01, 0.9, 0.999, 1e-8, 3, 100, 0};
  cfg.n_samples = 6000;
  cfg.noise_std = 0.2;
  cfg.split = {4000, 1000, 1000};
  return cfg;
}

json to_json(const RunConfig& cfg) {
  json hidden = json::array();
  for (Index h : cfg.model.hidden) hidden.push_back(h);
  return {
      {"format", kConfigFormat},
      {"seed", cfg.seed},
      {"regressors", {{"n_a", cfg.regressors.n_a}, {"n_b", cfg.regressors.n_b}, {"q", cfg.regressors.q}}},
      {"model",
       {{"modes", cfg.model.S},
        {"gate", gate_name(cfg.model.gate)},
        {"hidden", hidden},
        {"standardize_gate_input", cfg.model.standardize_gate_input},
        {"predict", cfg.predict == PredictMode::hard ? "hard" : "weighted"}}},
      {"em",
       {{"max_iters", cfg.em.max_iters},
        {"loglik_tol", cfg.em.loglik_tol},
        {"restarts", cfg.em.n_restarts},
        {"init_std", cfg.em.init_std},
        {"output_init_std", cfg.em.output_init_std},
        {"kmeans_init", cfg.em.kmeans_init},
        {"kmeans_space", to_string(cfg.em.kmeans_space)},
        {"variance", to_string(cfg.em.variance)},
        {"parallel_restarts", cfg.em.parallel_restarts}}},
      {"adam",
       {{"learning_rate", cfg.em.adam.learning_rate},
        {"beta1", cfg.em.adam.beta1},
        {"beta2", cfg.em.adam.beta2},
        {"epsilon", cfg.em.adam.epsilon},
        {"epochs", cfg.em.adam.epochs_per_m_step},
        {"batch_size", cfg.em.adam.batch_size}}},
      {"data",
       {{"n_samples", cfg.n_samples},
        {"noise_std", cfg.noise_std},
        {"split", {{"train", cfg.split.train}, {"val", cfg.split.val}, {"test", cfg.split.test}}}}},
      {"paths",
       {{"out_dir", cfg.paths.out_dir},
        {"train", cfg.paths.train},
        {"val", cfg.paths.val},
        {"test", cfg.paths.test},
        {"model", cfg.paths.model},
        {"true_theta", cfg.paths.true_theta}}},
  };
}

RunConfig config_from_json(const json& doc, RunConfig cfg) {
  try {
    reject_unknown(doc, {"format", "seed", "regressors", "model", "em", "adam", "data", "paths"}, "");
    if (doc.contains("format") && doc.at("format").get<std::string>() != kConfigFormat) {
      throw usage_error("config: unsupported format '" + doc.at("format").get<std::string>() + "'");
    }
    read_if(doc, "seed", cfg.seed);
    if (doc.contains("regressors")) {
      const auto& s = doc.at("regressors");
      reject_unknown(s, {"n_a", "n_b", "q"}, "regressors");
      read_if(s, "n_a", cfg.regressors.n_a);
      read_if(s, "n_b", cfg.regressors.n_b);
      read_if(s, "q", cfg.regressors.q);
    }
    if (doc.contains("model")) {
      const auto& s = doc.at("model");
      reject_unknown(s, {"modes", "gate", "hidden", "standardize_gate_input", "predict"}, "model");
      read_if(s, "modes", cfg.model.S);
      if (s.contains("gate")) cfg.model.gate = parse_gate(s.at("gate").get<std::string>());
      if (s.contains("hidden")) cfg.model.hidden = s.at("hidden").get<std::vector<Index>>();
      read_if(s, "standardize_gate_input", cfg.model.standardize_gate_input);
      if (s.contains("predict")) cfg.predict = parse_predict(s.at("predict").get<std::string>());
    }
    if (doc.contains("em")) {
      const auto& s = doc.at("em");
      reject_unknown(s, {"max_iters", "loglik_tol", "restarts", "init_std", "output_init_std",
                         "kmeans_init",
                         "kmeans_space", "variance", "parallel_restarts"}, "em");
      read_if(s, "max_iters", cfg.em.max_iters);
      read_if(s, "loglik_tol", cfg.em.loglik_tol);
      read_if(s, "restarts", cfg.em.n_restarts);
      read_if(s, "init_std", cfg.em.init_std);
      read_if(s, "output_init_std", cfg.em.output_init_std);
      read_if(s, "kmeans_init", cfg.em.kmeans_init);
      if (s.contains("kmeans_space")) {
        cfg.em.kmeans_space = parse_kmeans_space(s.at("kmeans_space").get<std::string>());
      }
      if (s.contains("variance")) {
        cfg.em.variance = parse_variance_mode(s.at("variance").get<std::string>());
      }
      read_if(s, "parallel_restarts", cfg.em.parallel_restarts);
    }
    if (doc.contains("adam")) {
      const auto& s = doc.at("adam");
      reject_unknown(s, {"learning_rate", "beta1", "beta2", "epsilon", "epochs", "batch_size"}, "adam");
      read_if(s, "learning_rate", cfg.em.adam.learning_rate);
      read_if(s, "beta1", cfg.em.adam.beta1);
      read_if(s, "beta2", cfg.em.adam.beta2);
      read_if(s, "epsilon", cfg.em.adam.epsilon);
      read_if(s, "epochs", cfg.em.adam.epochs_per_m_step);
      read_if(s, "batch_size", cfg.em.adam.batch_size);
    }
    if (doc.contains("data")) {
      const auto& s = doc.at("data");
      reject_unknown(s, {"n_samples", "noise_std", "split"}, "data");
      read_if(s, "n_samples", cfg.n_samples);
      read_if(s, "noise_std", cfg.noise_std);
      if (s.contains("split")) {
        const auto& sp = s.at("split");
        reject_unknown(sp, {"train", "val", "test"}, "data.split");
        read_if(sp, "train", cfg.split.train);
        read_if(sp, "val", cfg.split.val);
        read_if(sp, "test", cfg.split.test);
      }
    }
    if (doc.contains("paths")) {
      const auto& s = doc.at("paths");
      reject_unknown(s, {"out_dir", "train", "val", "test", "model", "true_theta"}, "paths");
      read_if(s, "out_dir", cfg.paths.out_dir);
      read_if(s, "train", cfg.paths.train);
      read_if(s, "val", cfg.paths.val);
      read_if(s, "test", cfg.paths.test);
      read_if(s, "model", cfg.paths.model);
      read_if(s, "true_theta", cfg.paths.true_theta);
    }
  } catch (const json::exception& e) {
    throw usage_error(std::string("config: ") + e.what());
  }
  return cfg;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw usage_error(path + ": " + e.what());
  }
  return config_from_json(doc, std::move(base));
}

}  // namespace npwarx
