#include "npwarx/em.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <sstream>
#include <thread>

#include "npwarx/error.hpp"
#include "npwarx/softmax.hpp"

namespace npwarx {

namespace {

// Largest tolerated drop of the EM objective between iterations.
constexpr double kMonotonicitySlack = 1e-6;

std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    stream};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

double sample_std(const VectorXd& y) {
  const double mean = y.mean();
  const double var = (y.array() - mean).square().sum() / static_cast<double>(y.size());
  return var > 0.0 ? std::sqrt(var) : 1.0;
}

template <typename Net>
void permute_anchored_rows(Net& W_partial, const std::vector<int>& perm) {
  const Index S = static_cast<Index>(perm.size());
  MatrixXd full = MatrixXd::Zero(S, W_partial.cols());
  full.topRows(S - 1) = W_partial;
  const Eigen::RowVectorXd anchor = full.row(perm[S - 1]);
  for (Index s = 0; s + 1 < S; ++s) W_partial.row(s) = full.row(perm[s]) - anchor;
}

}  // namespace

const char* to_string(VarianceMode mode) {
  return mode == VarianceMode::pooled ? "pooled" : "map";
}

VarianceMode parse_variance_mode(const std::string& text) {
  if (text == "pooled") return VarianceMode::pooled;
  if (text == "map" || text == "per_mode_map") return VarianceMode::per_mode_map;
  throw usage_error("unknown variance mode '" + text + "' (expected pooled or map)");
}

const char* to_string(KMeansSpace space) {
  return space == KMeansSpace::output ? "output" : "joint";
}

KMeansSpace parse_kmeans_space(const std::string& text) {
  if (text == "output" || text == "y") return KMeansSpace::output;
  if (text == "joint") return KMeansSpace::joint;
  throw usage_error("unknown k-means space '" + text + "' (expected output or joint)");
}

MatrixXd MixtureModel::thetas() const {
  MatrixXd out(S(), regressor_dim());
  for (int s = 0; s < S(); ++s) out.row(s) = modes[s].theta.transpose();
  return out;
}

VectorXd MixtureModel::sigmas() const {
  VectorXd out(S());
  for (int s = 0; s < S(); ++s) out(s) = modes[s].sigma;
  return out;
}

MatrixXd MixtureModel::gate_features(const MatrixXd& X) const {
  if (gate_input.mean.size() == 0 || gate_input.is_identity()) return X;
  return gate_input.apply(X);
}

void MixtureModel::validate() const {
  if (S() < 2) throw data_error("mixture: at least two modes required");
  if (gate_modes(gate) != S()) throw data_error("mixture: gate and expert counts differ");
  const Index r = regressor_dim();
  for (const auto& m : modes) {
    if (m.theta.size() != r) throw data_error("mixture: inconsistent theta lengths");
    if (!m.theta.allFinite()) throw numeric_error("mixture: non-finite theta");
    if (!(m.sigma > 0.0) || !std::isfinite(m.sigma)) throw numeric_error("mixture: invalid sigma");
  }
}

void permute_modes(MixtureModel& model, const std::vector<int>& perm) {
  const int S = model.S();
  if (static_cast<int>(perm.size()) != S) throw data_error("permute_modes: size mismatch");
  std::vector<int> seen(S, 0);
  for (int p : perm) {
    if (p < 0 || p >= S || seen[p]++) throw data_error("permute_modes: not a permutation");
  }
  std::vector<ArxModed> modes(S);
  for (int s = 0; s < S; ++s) modes[s] = model.modes[perm[s]];
  model.modes = std::move(modes);

  if (auto* lin = std::get_if<LinearGate>(&model.gate)) {
    permute_anchored_rows(lin->eta, perm);
  } else {
    auto& out = std::get<GateNetwork>(model.gate).layers.back();
    permute_anchored_rows(out.W, perm);
    MatrixXd b = out.b;
    permute_anchored_rows(b, perm);
    out.b = b;
  }
}

void PosteriorMatrix::validate(double tol) const {
  if (!xi.allFinite()) throw numeric_error("posterior: non-finite entries");
  if ((xi.array() < 0.0).any() || (xi.array() > 1.0).any()) {
    throw numeric_error("posterior: entries outside [0, 1]");
  }
  const VectorXd sums = xi.rowwise().sum();
  if (((sums.array() - 1.0).abs() > tol).any()) throw numeric_error("posterior: rows do not sum to 1");
}

MatrixXd joint_log_density(const MixtureModel& model, const Dataset& data) {
  if (data.regressor_dim() != model.regressor_dim()) {
    throw data_error("mixture expects regressors of length " +
                     std::to_string(model.regressor_dim()) + ", data has " +
                     std::to_string(data.regressor_dim()));
  }
  MatrixXd out = log_probabilities(model.gate, model.gate_features(data.X));
  for (int s = 0; s < model.S(); ++s) {
    const auto& m = model.modes[s];
    const VectorXd resid = data.y - data.Phi * m.theta;
    const double norm = -0.5 * std::log(2.0 * std::numbers::pi) - std::log(m.sigma);
    out.col(s).array() += norm - resid.array().square() / (2.0 * m.sigma * m.sigma);
  }
  return out;
}

double observed_loglik(const MixtureModel& model, const Dataset& data) {
  const VectorXd per_sample = log_sum_exp_rows(joint_log_density(model, data));
  const double total = per_sample.sum();
  if (!std::isfinite(total)) throw numeric_error("observed log-likelihood is not finite");
  return total;
}

double em_objective(const MixtureModel& model, const Dataset& data, const VariancePrior& prior) {
  double value = observed_loglik(model, data);
  if (model.variance_mode == VarianceMode::per_mode_map) {
    for (const auto& m : model.modes) value += prior.log_density(m.sigma * m.sigma, model.S());
  }
  return value;
}

PosteriorMatrix e_step(const MixtureModel& model, const Dataset& data) {
  const MatrixXd joint = joint_log_density(model, data);
  const VectorXd lse = log_sum_exp_rows(joint);
  for (Index k = 0; k < lse.size(); ++k) {
    if (!std::isfinite(lse(k))) {
      throw numeric_error("e-step: every mode has zero density at sample " + std::to_string(k));
    }
  }
  PosteriorMatrix post{(joint.colwise() - lse).array().exp().matrix()};
  post.xi.array().colwise() /= post.xi.rowwise().sum().array();
  return post;
}

double expert_q(const ArxModed& mode, const Dataset& data, const VectorXd& weights) {
  const VectorXd resid = data.y - data.Phi * mode.theta;
  double q = 0.0;
  for (Index k = 0; k < resid.size(); ++k) {
    q += weights(k) * log_normal_density(resid(k), mode.sigma);
  }
  return q;
}

MStepReport m_step(MixtureModel& model, const Dataset& data, const PosteriorMatrix& xi,
                   GateTrainer& trainer, const VariancePrior& prior) {
  if (xi.xi.rows() != data.size() || xi.xi.cols() != model.S()) {
    throw data_error("m-step: posterior shape does not match data and model");
  }
  MStepReport report;
  const int S = model.S();
  const Index r = model.regressor_dim();

  for (int s = 0; s < S; ++s) {
    const VectorXd w = xi.xi.col(s);
    const double mass = w.sum();
    auto& theta = model.modes[s].theta;
    if (!(mass > 0.0)) {
      report.warnings.push_back("mode " + std::to_string(s + 1) + " has zero responsibility");
      continue;
    }
    const bool degenerate = mass < static_cast<double>(r);
    auto wls = weighted_least_squares(data.Phi, data.y, w);
    if (degenerate && !wls.regularized) {
      Matrix<double> normal = data.Phi.transpose() * w.asDiagonal() * data.Phi;
      normal.diagonal().array() += 1e-8 * normal.trace() / static_cast<double>(r);
      wls.theta = normal.ldlt().solve(data.Phi.transpose() * w.asDiagonal() * data.y);
      wls.regularized = true;
    }
    if (wls.regularized) {
      report.warnings.push_back("mode " + std::to_string(s + 1) + " effective weight " +
                                std::to_string(mass) + ": ridge-regularized update");
      // keep the ridge step only if it does not worsen the fit
      if (weighted_sse(data.Phi, data.y, w, wls.theta) > weighted_sse(data.Phi, data.y, w, theta)) {
        continue;
      }
    }
    theta = wls.theta;
  }

  MatrixXd resid(data.size(), S);
  for (int s = 0; s < S; ++s) resid.col(s) = data.y - data.Phi * model.modes[s].theta;
  if (model.variance_mode == VarianceMode::pooled) {
    const double sigma = std::sqrt(pooled_mle_variance(resid, xi.xi));
    for (auto& m : model.modes) m.sigma = sigma;
  } else {
    for (int s = 0; s < S; ++s) {
      model.modes[s].sigma = std::sqrt(map_variance(resid.col(s), xi.xi.col(s), prior, S));
    }
  }

  report.gate = train_soft_labels(model.gate, model.gate_features(data.X), xi.xi, trainer.adam,
                                  trainer.state, trainer.rng);
  return report;
}

KMeansResult kmeans(const MatrixXd& points, int k, std::uint64_t seed, int max_iters) {
  const Index n = points.rows();
  if (k < 1) throw usage_error("kmeans: k must be positive");
  if (n < k) throw data_error("kmeans: fewer points than clusters");

  auto sq_dist = [&](Index i, const Eigen::RowVectorXd& c) {
    return (points.row(i) - c).squaredNorm();
  };
  auto nearest = [&](Index i, const MatrixXd& centers) {
    Index best = 0;
    double best_d = sq_dist(i, centers.row(0));
    for (Index c = 1; c < centers.rows(); ++c) {
      const double d = sq_dist(i, centers.row(c));
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    return std::pair{best, best_d};
  };

  KMeansResult out;
  out.centers.resize(k, points.cols());
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> pick(0, n - 1);
  out.centers.row(0) = points.row(pick(rng));
  for (int c = 1; c < k; ++c) {
    Index far = 0;
    double far_d = -1.0;
    for (Index i = 0; i < n; ++i) {
      const double d = nearest(i, out.centers.topRows(c)).second;
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    out.centers.row(c) = points.row(far);
  }

  out.assignment = VectorXi::Constant(n, -1);
  for (out.iterations = 1; out.iterations <= max_iters; ++out.iterations) {
    bool changed = false;
    VectorXd dist(n);
    for (Index i = 0; i < n; ++i) {
      const auto [c, d] = nearest(i, out.centers);
      dist(i) = d;
      if (out.assignment(i) != c) {
        out.assignment(i) = static_cast<int>(c);
        changed = true;
      }
    }
    MatrixXd sums = MatrixXd::Zero(k, points.cols());
    VectorXi counts = VectorXi::Zero(k);
    for (Index i = 0; i < n; ++i) {
      sums.row(out.assignment(i)) += points.row(i);
      ++counts(out.assignment(i));
    }
    for (int c = 0; c < k; ++c) {
      if (counts(c) > 0) {
        out.centers.row(c) = sums.row(c) / counts(c);
        continue;
      }
      Index far = 0;
      dist.maxCoeff(&far);
      out.centers.row(c) = points.row(far);
      dist(far) = 0.0;
      changed = true;
    }
    if (!changed) break;
  }
  out.iterations = std::min(out.iterations, max_iters);
  return out;
}

std::vector<ArxModed> kmeans_bias_init(const Dataset& data, int S, std::uint64_t seed,
                                       KMeansSpace space) {
  if (data.size() < S) throw data_error("kmeans_bias_init: fewer samples than modes");
  const Index r = data.regressor_dim();
  MatrixXd points;
  if (space == KMeansSpace::output) {
    points = data.y;
  } else {
    points.resize(data.size(), r);
    points << data.X, data.y;
  }
  const KMeansResult km = kmeans(points, S, seed);
  const double sigma = sample_std(data.y);
  std::vector<ArxModed> modes(S);
  for (int s = 0; s < S; ++s) {
    modes[s].theta = VectorXd::Zero(r);
    modes[s].theta(r - 1) = km.centers(s, km.centers.cols() - 1);
    modes[s].sigma = sigma;
  }
  return modes;
}

void EmConfig::validate() const {
  if (max_iters < 1) throw usage_error("em: max_iters must be at least 1");
  if (!(loglik_tol > 0.0)) throw usage_error("em: loglik_tol must be positive");
  if (n_restarts < 1) throw usage_error("em: restarts must be at least 1");
  if (!(init_std > 0.0)) throw usage_error("em: init_std must be positive");
  if (!(output_init_std >= 0.0)) throw usage_error("em: output_init_std must be non-negative");
  adam.validate();
}

MixtureModel initialize_model(const Dataset& data, const EmConfig& cfg, const ModelSpec& spec,
                              std::uint64_t seed) {
  if (spec.S < 2) throw usage_error("model: S must be at least 2");
  if (data.size() < spec.S) throw data_error("model: fewer samples than modes");
  const Index r = data.regressor_dim();

  MixtureModel model;
  model.variance_mode = cfg.variance;
  model.gate_input = spec.standardize_gate_input ? Standardizer::fit(data.X)
                                                 : Standardizer::identity(r - 1);
  const std::uint64_t gate_seed = derive_seed(seed, 1);
  if (spec.gate == GateKind::linear) {
    model.gate = init_linear_gate(r, spec.S, cfg.init_std, gate_seed);
  } else {
    GateNetwork net = init_gate({r - 1, spec.hidden, spec.S}, cfg.init_std, gate_seed);
    if (cfg.output_init_std > 0.0 && net.layers.size() > 1) {
      net.layers.back().W *= cfg.output_init_std / cfg.init_std;
    }
    model.gate = std::move(net);
  }

  if (cfg.kmeans_init) {
    model.modes = kmeans_bias_init(data, spec.S, derive_seed(seed, 2), cfg.kmeans_space);
  } else {
    std::mt19937_64 rng(derive_seed(seed, 2));
    std::normal_distribution<double> normal(0.0, 0.1);
    const double sigma = sample_std(data.y);
    model.modes.resize(spec.S);
    for (auto& m : model.modes) {
      m.theta = VectorXd::NullaryExpr(r, [&] { return normal(rng); });
      m.sigma = sigma;
    }
  }
  return model;
}

EmRun run_em(MixtureModel init, const Dataset& data, const EmConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  EmRun run;
  run.model = std::move(init);
  run.summary.seed = seed;
  run.model.validate();

  const VariancePrior prior = VariancePrior::from_outputs(data.y);
  GateTrainer trainer{cfg.adam, {}, std::mt19937_64(derive_seed(seed, 3))};

  try {
    double prev_loglik = observed_loglik(run.model, data);
    run.trace.initial_loglik = prev_loglik;
    double prev_objective = em_objective(run.model, data, prior);
    for (int it = 1; it <= cfg.max_iters; ++it) {
      const PosteriorMatrix xi = e_step(run.model, data);
      const MStepReport rep = m_step(run.model, data, xi, trainer, prior);
      for (const auto& w : rep.warnings) {
        run.trace.warnings.push_back("iteration " + std::to_string(it) + ": " + w);
      }

      IterationRecord rec;
      rec.iteration = it;
      rec.loglik = observed_loglik(run.model, data);
      rec.objective = em_objective(run.model, data, prior);
      rec.thetas = run.model.thetas();
      rec.sigmas = run.model.sigmas();
      rec.gate_loss = rep.gate.loss_after;
      rec.gate_restored = rep.gate.restored;
      run.trace.records.push_back(rec);

      if (rec.objective < prev_objective - kMonotonicitySlack) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "monotonicity violation at iteration " << it << ": objective " << prev_objective
            << " -> " << rec.objective;
        throw numeric_error(msg.str());
      }
      if (!rec.gate_restored && std::abs(rec.loglik - prev_loglik) < cfg.loglik_tol) {
        run.trace.termination = "converged";
        break;
      }
      if (it == cfg.max_iters) run.trace.termination = "max_iters";
      prev_loglik = rec.loglik;
      prev_objective = rec.objective;
    }
    run.summary.ok = true;
  } catch (const Error& e) {
    run.trace.termination = std::string("failed: ") + e.what();
    run.summary.ok = false;
  }

  run.summary.iterations = static_cast<int>(run.trace.records.size());
  run.summary.final_loglik = run.trace.records.empty()
                                 ? -std::numeric_limits<double>::infinity()
                                 : run.trace.records.back().loglik;
  run.summary.termination = run.trace.termination;
  return run;
}

FitResult fit(const Dataset& data, const EmConfig& cfg, const ModelSpec& spec) {
  cfg.validate();
  if (data.size() == 0) throw data_error("fit: empty dataset");

  auto one_restart = [&](int i) {
    const std::uint64_t seed = cfg.rng_seed + static_cast<std::uint64_t>(i);
    EmRun run;
    try {
      run = run_em(initialize_model(data, cfg, spec, seed), data, cfg, seed);
    } catch (const Error& e) {
      run.summary.seed = seed;
      run.summary.termination = std::string("failed: ") + e.what();
      run.trace.termination = run.summary.termination;
      run.summary.final_loglik = -std::numeric_limits<double>::infinity();
    }
    run.summary.restart = i;
    return run;
  };

  std::vector<EmRun> runs;
  runs.reserve(cfg.n_restarts);
  if (cfg.parallel_restarts && std::thread::hardware_concurrency() > 1 && cfg.n_restarts > 1) {
    std::vector<std::future<EmRun>> pending;
    for (int i = 0; i < cfg.n_restarts; ++i) {
      pending.push_back(std::async(std::launch::async, one_restart, i));
    }
    for (auto& f : pending) runs.push_back(f.get());
  } else {
    for (int i = 0; i < cfg.n_restarts; ++i) runs.push_back(one_restart(i));
  }

  FitResult result;
  int best = -1;
  std::string reasons;
  for (int i = 0; i < cfg.n_restarts; ++i) {
    result.restarts.push_back(runs[i].summary);
    result.traces.push_back(runs[i].trace);
    if (!runs[i].summary.ok) {
      reasons += "\n  restart " + std::to_string(i) + ": " + runs[i].summary.termination;
      continue;
    }
    if (best < 0 || runs[i].summary.final_loglik > runs[best].summary.final_loglik) best = i;
  }
  if (best < 0) throw numeric_error("all restarts failed:" + reasons);

  result.best_restart = best;
  result.model = std::move(runs[best].model);
  result.trace = runs[best].trace;
  return result;
}

void write_trace_csv(const std::vector<EmTrace>& traces, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path + "'");
  Index S = 0, r = 0;
  for (const auto& t : traces) {
    if (!t.records.empty()) {
      S = t.records.front().thetas.rows();
      r = t.records.front().thetas.cols();
      break;
    }
  }
  out << "restart,iteration,loglik";
  for (Index s = 1; s <= S; ++s) {
    for (Index j = 1; j <= r; ++j) out << ",theta_" << s << '_' << j;
  }
  for (Index s = 1; s <= S; ++s) out << ",sigma_" << s;
  out << ",gate_loss\n";
  for (std::size_t i = 0; i < traces.size(); ++i) {
    for (const auto& rec : traces[i].records) {
      out << i << ',' << rec.iteration << ',' << format_double(rec.loglik);
      for (Index s = 0; s < S; ++s) {
        for (Index j = 0; j < r; ++j) out << ',' << format_double(rec.thetas(s, j));
      }
      for (Index s = 0; s < S; ++s) out << ',' << format_double(rec.sigmas(s));
      out << ',' << format_double(rec.gate_loss) << '\n';
    }
  }
  if (!out) throw io_error("write failed for '" + path + "'");
}

}  // namespace npwarx
