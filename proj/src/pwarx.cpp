#include "npwarx/pwarx.hpp"

#include "npwarx/error.hpp"

namespace npwarx {

bool PolyhedralPartition::contains(int s, const VectorXd& phi) const {
  return ((H.at(s) * phi).array() <= 0.0).all();
}

int PolyhedralPartition::locate(const VectorXd& phi) const {
  for (int s = 0; s < regions(); ++s) {
    if (contains(s, phi)) return s;
  }
  return -1;
}

PolyhedralPartition prarx_to_pwarx(const LinearGate& gate) {
  const MatrixXd eta = gate.full_eta();
  const int S = static_cast<int>(eta.rows());
  PolyhedralPartition part;
  for (int s = 0; s < S; ++s) {
    part.H.push_back(eta.rowwise() - eta.row(s));
    std::vector<bool> strict(S);
    for (int j = 0; j < S; ++j) strict[j] = j < s;
    part.strict.push_back(std::move(strict));
  }
  return part;
}

PolyhedralPartition prarx_to_pwarx(const MixtureModel& model) {
  const auto* lin = std::get_if<LinearGate>(&model.gate);
  if (!lin) throw usage_error("neural gates have no polyhedral partition");
  if (model.gate_input.mean.size() == 0 || model.gate_input.is_identity()) {
    return prarx_to_pwarx(*lin);
  }
  // eta' [(x - m)/c 1] = (eta_x / c)' x + (eta_0 - eta_x' (m / c))
  const Index r = lin->eta.cols();
  const VectorXd inv_scale = model.gate_input.scale.cwiseInverse();
  LinearGate raw;
  raw.eta.resize(lin->eta.rows(), r);
  raw.eta.leftCols(r - 1) = lin->eta.leftCols(r - 1) * inv_scale.asDiagonal();
  raw.eta.col(r - 1) = lin->eta.col(r - 1) -
                       lin->eta.leftCols(r - 1) * model.gate_input.mean.cwiseProduct(inv_scale);
  return prarx_to_pwarx(raw);
}

int argmax_lowest(const VectorXd& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

int hard_assign(const MixtureModel& model, const VectorXd& x) {
  return hard_assign(model, MatrixXd(x.transpose()))(0);
}

VectorXi hard_assign(const MixtureModel& model, const MatrixXd& X) {
  const MatrixXd a = logits(model.gate, model.gate_features(X));
  VectorXi out(a.rows());
  for (Index k = 0; k < a.rows(); ++k) out(k) = argmax_lowest(a.row(k).transpose());
  return out;
}

Prediction predict_output(const MixtureModel& model, const VectorXd& x, PredictMode how) {
  Dataset one;
  one.X = x.transpose();
  one.Phi.resize(1, x.size() + 1);
  one.Phi << x.transpose(), 1.0;
  one.y = VectorXd::Zero(1);
  const Predictions p = predict_output(model, one, how);
  return {p.y_hat(0), p.mode(0)};
}

Predictions predict_output(const MixtureModel& model, const Dataset& data, PredictMode how) {
  if (data.regressor_dim() != model.regressor_dim()) {
    throw data_error("predict: regressor length mismatch");
  }
  const MatrixXd expert = data.Phi * model.thetas().transpose();  // N x S
  Predictions out;
  out.mode = hard_assign(model, data.X);
  out.y_hat.resize(data.size());
  if (how == PredictMode::hard) {
    for (Index k = 0; k < data.size(); ++k) out.y_hat(k) = expert(k, out.mode(k));
  } else {
    const MatrixXd p = probabilities(model.gate, model.gate_features(data.X));
    out.y_hat = (p.array() * expert.array()).rowwise().sum();
  }
  return out;
}

}  // namespace npwarx
