#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "npwarx/dataset.hpp"
#include "npwarx/em.hpp"

namespace npwarx {

inline constexpr const char* kModelFormat = "npwarx-model/1";

struct FitMetadata {
  std::uint64_t seed = 0;
  int iterations = 0;
  double final_loglik = 0.0;
  std::string termination;
};

/// Everything needed to reuse a fitted model without the training run.
struct ModelFile {
  RegressorConfig regressors;
  MixtureModel model;
  FitMetadata meta;
};

nlohmann::json to_json(const ModelFile& file);
ModelFile model_from_json(const nlohmann::json& doc);

void save_model(const ModelFile& file, const std::string& path);
ModelFile load_model(const std::string& path);

/// One row per mode, r comma-separated coefficients ordered like the extended regressor.
MatrixXd read_theta_csv(const std::string& path);
void write_theta_csv(const MatrixXd& thetas, const std::string& path);

nlohmann::json matrix_to_json(const MatrixXd& m);
MatrixXd matrix_from_json(const nlohmann::json& j);

}  // namespace npwarx
