#pragma once

#include <vector>

#include "npwarx/em.hpp"

namespace npwarx {

/// Regions { phi : H_s phi <= 0 } over the extended regressor. `strict[s][j]` marks rows
/// that are '<' in exact arithmetic; numerical membership always uses '<=' and resolves
/// shared boundaries toward the lowest region index.
struct PolyhedralPartition {
  std::vector<MatrixXd> H;
  std::vector<std::vector<bool>> strict;

  int regions() const { return static_cast<int>(H.size()); }
  bool contains(int s, const VectorXd& phi) const;
  /// Lowest-index region containing phi, or -1.
  int locate(const VectorXd& phi) const;
};

/// H_s = [(eta_1 - eta_s) ... (eta_S - eta_s)]'.
PolyhedralPartition prarx_to_pwarx(const LinearGate& gate);

/// Partition of a fitted model in raw regressor coordinates. Throws for neural gates,
/// whose regions are not polyhedral.
PolyhedralPartition prarx_to_pwarx(const MixtureModel& model);

/// 0-based argmax of the gate, ties toward the lowest index.
int hard_assign(const MixtureModel& model, const VectorXd& x);
VectorXi hard_assign(const MixtureModel& model, const MatrixXd& X);

/// Lowest index attaining the row maximum.
int argmax_lowest(const VectorXd& v);

enum class PredictMode { hard, weighted };

struct Prediction {
  double y_hat = 0.0;
  int mode = 0;
};

/// Hard: the selected expert's output. Weighted: sum_s p_s theta_s' phi.
Prediction predict_output(const MixtureModel& model, const VectorXd& x,
                          PredictMode how = PredictMode::hard);

struct Predictions {
  VectorXd y_hat;
  VectorXi mode;
};

Predictions predict_output(const MixtureModel& model, const Dataset& data,
                           PredictMode how = PredictMode::hard);

}  // namespace npwarx
