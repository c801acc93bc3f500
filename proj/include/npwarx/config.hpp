#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "npwarx/dataset.hpp"
#include "npwarx/em.hpp"
#include "npwarx/pwarx.hpp"

namespace npwarx {

inline constexpr const char* kConfigFormat = "npwarx-config/1";

struct SplitSizes {
  Index train = 4000;
  Index val = 1000;
  Index test = 1000;

  Index total() const { return train + val + test; }
};

struct RunPaths {
  std::string out_dir = "out";
  std::string train;
  std::string val;
  std::string test;
  std::string model;
  std::string true_theta;

  /// `explicit_path` if set, else `out_dir/default_name`.
  std::string resolve(const std::string& explicit_path, const std::string& default_name) const;
};

/// Every knob of a generate / fit / evaluate / trials run.
struct RunConfig {
  std::uint64_t seed = 1;
  RegressorConfig regressors;
  ModelSpec model;
  PredictMode predict = PredictMode::hard;
  EmConfig em;
  Index n_samples = 6000;
  double noise_std = 0.2;
  SplitSizes split;
  RunPaths paths;

  void validate() const;
};

/// Hyperparameters of the three-region benchmark study.
RunConfig benchmark_preset();

nlohmann::json to_json(const RunConfig& cfg);
/// Overlays the keys present in `doc` onto `base`; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& doc, RunConfig base = benchmark_preset());
RunConfig load_config(const std::string& path, RunConfig base = benchmark_preset());

}  // namespace npwarx
