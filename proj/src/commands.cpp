#include "npwarx/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>

#include "npwarx/error.hpp"
#include "npwarx/model_io.hpp"
#include "npwarx/pwarx.hpp"

namespace npwarx {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io_error("cannot create directory '" + dir + "': " + ec.message());
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) throw io_error(what + " not found: '" + path + "'");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path + "'");
  return out;
}

bool is_benchmark_layout(const RegressorConfig& r) { return r.n_a == 1 && r.n_b == 1 && r.q == 1; }

void write_grid(const MixtureModel& model, const std::string& path) {
  auto out = open_out(path);
  out << "y_prev,u_prev,mode\n";
  const int ny = 200, nu = 160;
  MatrixXd X((ny + 1) * (nu + 1), 2);
  Index row = 0;
  for (int i = 0; i <= ny; ++i) {
    for (int j = 0; j <= nu; ++j) {
      X(row, 0) = -5.0 + 0.05 * i;
      X(row, 1) = -4.0 + 0.05 * j;
      ++row;
    }
  }
  const VectorXi modes = hard_assign(model, X);
  for (Index k = 0; k < X.rows(); ++k) {
    out << format_double(X(k, 0)) << ',' << format_double(X(k, 1)) << ',' << modes(k) + 1 << '\n';
  }
}

}  // namespace

std::array<Dataset, 3> simulate_splits(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.regressors.q != 1) throw usage_error("benchmark data has a single input (q = 1)");
  const Index lag = cfg.regressors.max_lag();
  const SeriesData series = generate(cfg.n_samples + lag - 1, cfg.noise_std, cfg.seed);
  return split(build_regressors(series, cfg.regressors), cfg.split.train, cfg.split.val,
               cfg.split.test);
}

std::array<Dataset, 3> load_splits(const RunConfig& cfg) {
  const std::string train = cfg.paths.resolve(cfg.paths.train, "train.csv");
  const std::string val = cfg.paths.resolve(cfg.paths.val, "val.csv");
  const std::string test = cfg.paths.resolve(cfg.paths.test, "test.csv");
  require_file(train, "training data");
  require_file(test, "test data");
  std::array<Dataset, 3> out;
  out[0] = build_regressors(read_csv(train), cfg.regressors);
  if (fs::exists(val)) out[1] = build_regressors(read_csv(val), cfg.regressors);
  out[2] = build_regressors(read_csv(test), cfg.regressors);
  return out;
}

GenerateOutput cmd_generate(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (cfg.regressors.q != 1) throw usage_error("benchmark data has a single input (q = 1)");
  ensure_dir(cfg.paths.out_dir);

  const Index lag = cfg.regressors.max_lag();
  const SeriesData series = generate(cfg.n_samples + lag - 1, cfg.noise_std, cfg.seed);

  GenerateOutput out;
  out.series = cfg.paths.resolve("", "series.csv");
  out.train = cfg.paths.resolve(cfg.paths.train, "train.csv");
  out.val = cfg.paths.resolve(cfg.paths.val, "val.csv");
  out.test = cfg.paths.resolve(cfg.paths.test, "test.csv");
  out.true_theta = cfg.paths.resolve(cfg.paths.true_theta, "true_theta.csv");

  write_csv(series, out.series);
  write_csv(slice(series, 0, cfg.split.train + lag), out.train);
  write_csv(slice(series, cfg.split.train, cfg.split.val + lag), out.val);
  write_csv(slice(series, cfg.split.train + cfg.split.val, cfg.split.test + lag), out.test);
  write_theta_csv(BenchmarkSystem::true_thetas(), out.true_theta);

  log << "generated " << cfg.n_samples << " samples (seed " << cfg.seed << ", noise std "
      << cfg.noise_std << ")\n"
      << "  train " << cfg.split.train << " -> " << out.train << '\n'
      << "  val   " << cfg.split.val << " -> " << out.val << '\n'
      << "  test  " << cfg.split.test << " -> " << out.test << '\n';
  return out;
}

FitResult cmd_fit(const RunConfig& cfg, std::ostream& log) {
  cfg.regressors.validate();
  cfg.em.validate();
  const std::string train_path = cfg.paths.resolve(cfg.paths.train, "train.csv");
  require_file(train_path, "training data");
  const Dataset train = build_regressors(read_csv(train_path), cfg.regressors);
  ensure_dir(cfg.paths.out_dir);

  EmConfig em = cfg.em;
  em.rng_seed = cfg.seed;
  FitResult result = fit(train, em, cfg.model);

  ModelFile file{cfg.regressors, result.model,
                 {result.restarts[result.best_restart].seed,
                  result.restarts[result.best_restart].iterations,
                  result.restarts[result.best_restart].final_loglik, result.trace.termination}};
  const std::string model_path = cfg.paths.resolve(cfg.paths.model, "model.json");
  save_model(file, model_path);
  write_trace_csv(result.traces, cfg.paths.resolve("", "trace.csv"));

  auto restarts = open_out(cfg.paths.resolve("", "restarts.csv"));
  restarts << "restart,seed,iterations,final_loglik,termination\n";
  for (const auto& r : result.restarts) {
    restarts << r.restart << ',' << r.seed << ',' << r.iterations << ','
             << format_double(r.final_loglik) << ",\"" << r.termination << "\"\n";
  }

  log << "fit " << train.size() << " samples, " << em.n_restarts << " restarts\n";
  for (const auto& r : result.restarts) {
    log << "  restart " << r.restart << " seed " << r.seed << ": " << r.iterations
        << " iterations, loglik " << std::setprecision(10) << r.final_loglik << " ("
        << r.termination << ")\n";
  }
  log << "best restart " << result.best_restart << " -> " << model_path << '\n';
  for (int s = 0; s < result.model.S(); ++s) {
    log << "  theta_" << s + 1 << " = [" << result.model.modes[s].theta.transpose()
        << "], sigma " << result.model.modes[s].sigma << '\n';
  }
  const std::string val_path = cfg.paths.resolve(cfg.paths.val, "val.csv");
  if (fs::exists(val_path)) {
    const Dataset val = build_regressors(read_csv(val_path), cfg.regressors);
    if (val.size() > 0) {
      log << "validation loglik per sample " << observed_loglik(result.model, val) / val.size()
          << '\n';
    }
  }
  return result;
}

EvalReport cmd_evaluate(const RunConfig& cfg, std::ostream& log) {
  const std::string model_path = cfg.paths.resolve(cfg.paths.model, "model.json");
  const std::string test_path = cfg.paths.resolve(cfg.paths.test, "test.csv");
  require_file(model_path, "model file");
  require_file(test_path, "test data");

  ModelFile file = load_model(model_path);
  const Dataset test = build_regressors(read_csv(test_path), file.regressors);
  std::optional<MatrixXd> truth;
  if (!cfg.paths.true_theta.empty()) {
    require_file(cfg.paths.true_theta, "true parameter file");
    truth = read_theta_csv(cfg.paths.true_theta);
    if (truth->rows() != file.model.S() || truth->cols() != file.model.regressor_dim()) {
      throw data_error("true parameters are " + std::to_string(truth->rows()) + "x" +
                       std::to_string(truth->cols()) + ", model has " +
                       std::to_string(file.model.S()) + "x" +
                       std::to_string(file.model.regressor_dim()));
    }
  }

  EvalReport rep = evaluate(file.model, test, truth);
  ensure_dir(cfg.paths.out_dir);

  json notices = json::array();
  json doc;
  doc["format"] = "npwarx-report/1";
  doc["n_test"] = test.size();
  doc["modes"] = file.model.S();
  doc["permutation"] = rep.permutation;
  doc["thetas"] = matrix_to_json(file.model.thetas());
  doc["sigma"] = rep.sigma;
  doc["sigma2"] = rep.sigma * rep.sigma;
  doc["residual_rms"] = test.size() ? std::sqrt(rep.residuals.squaredNorm() / test.size()) : 0.0;
  if (rep.F_theta) {
    doc["F_theta"] = *rep.F_theta;
    doc["theta_errors"] = rep.theta_errors;
  } else {
    doc["F_theta"] = nullptr;
    notices.push_back("no true parameters given: F_theta omitted");
  }
  if (rep.F_s) {
    doc["F_s"] = *rep.F_s;
  } else {
    doc["F_s"] = nullptr;
    notices.push_back("test data has no mode labels: F_s omitted");
  }
  if (is_linear(file.model.gate)) doc["partition"] = to_json(file)["partition"];
  doc["notices"] = notices;

  auto report = open_out(cfg.paths.resolve("", "report.json"));
  report << doc.dump(2) << '\n';

  auto resid = open_out(cfg.paths.resolve("", "residuals.csv"));
  resid << "k,y,y_hat,residual,mode" << (test.labels ? ",true_mode" : "") << '\n';
  for (Index k = 0; k < test.size(); ++k) {
    resid << k << ',' << format_double(test.y(k)) << ','
          << format_double(test.y(k) - rep.residuals(k)) << ',' << format_double(rep.residuals(k))
          << ',' << rep.assigned(k);
    if (test.labels) resid << ',' << (*test.labels)(k);
    resid << '\n';
  }

  if (is_benchmark_layout(file.regressors)) {
    write_grid(file.model, cfg.paths.resolve("", "partition_grid.csv"));
  } else {
    notices.push_back("mode map skipped: needs n_a = n_b = q = 1");
  }

  log << "evaluated " << model_path << " on " << test.size() << " test samples\n";
  if (rep.F_theta) log << "  F_theta = " << std::setprecision(6) << *rep.F_theta << '\n';
  if (rep.F_s) log << "  F_s     = " << std::setprecision(6) << *rep.F_s << '\n';
  log << "  sigma   = " << rep.sigma << " (sigma^2 = " << rep.sigma * rep.sigma << ")\n";
  for (const auto& n : notices) log << "  note: " << n.get<std::string>() << '\n';
  return rep;
}

TrialsSummary cmd_trials(const RunConfig& cfg, int n_trials, std::ostream& log) {
  if (n_trials < 1) throw usage_error("trials: number of trials must be at least 1");
  cfg.validate();
  const bool from_files = !cfg.paths.train.empty();
  const auto splits = from_files ? load_splits(cfg) : simulate_splits(cfg);
  const Dataset& train = splits[0];
  const Dataset& test = splits[2];
  const MatrixXd truth = cfg.paths.true_theta.empty() ? BenchmarkSystem::true_thetas()
                                                      : read_theta_csv(cfg.paths.true_theta);
  ensure_dir(cfg.paths.out_dir);

  TrialsSummary summary;
  for (int t = 0; t < n_trials; ++t) {
    EmConfig em = cfg.em;
    em.rng_seed = cfg.seed + static_cast<std::uint64_t>(t) * cfg.em.n_restarts;
    FitResult res = fit(train, em, cfg.model);
    EvalReport rep = evaluate(res.model, test, truth);

    TrialRecord rec;
    rec.trial = t;
    rec.seed = em.rng_seed;
    rec.iterations = static_cast<int>(res.trace.records.size());
    rec.loglik = res.restarts[res.best_restart].final_loglik;
    rec.thetas = res.model.thetas();
    rec.sigma = rep.sigma;
    rec.F_theta = rep.F_theta.value_or(0.0);
    rec.F_s = rep.F_s.value_or(0.0);
    summary.trials.push_back(rec);
    log << "trial " << t + 1 << "/" << n_trials << ": F_theta " << std::setprecision(5)
        << rec.F_theta << ", F_s " << rec.F_s << ", sigma " << rec.sigma << ", "
        << rec.iterations << " iterations\n";
  }

  const double n = static_cast<double>(n_trials);
  const Index S = truth.rows(), r = truth.cols();
  summary.theta_mean = MatrixXd::Zero(S, r);
  for (const auto& t : summary.trials) summary.theta_mean += t.thetas / n;
  summary.theta_std = MatrixXd::Zero(S, r);
  for (const auto& t : summary.trials) {
    summary.theta_std.array() += (t.thetas - summary.theta_mean).array().square() / n;
  }
  summary.theta_std = summary.theta_std.cwiseSqrt();
  for (const auto& t : summary.trials) {
    summary.sigma2_mean += t.sigma * t.sigma / n;
    summary.sigma_mean += t.sigma / n;
    summary.F_theta_mean += t.F_theta / n;
    summary.F_s_mean += t.F_s / n;
  }
  for (const auto& t : summary.trials) {
    summary.sigma2_std += std::pow(t.sigma * t.sigma - summary.sigma2_mean, 2) / n;
  }
  summary.sigma2_std = std::sqrt(summary.sigma2_std);

  auto csv = open_out(cfg.paths.resolve("", "trials.csv"));
  csv << "trial,seed,iterations,loglik";
  for (Index s = 1; s <= S; ++s) {
    for (Index j = 1; j <= r; ++j) csv << ",theta_" << s << '_' << j;
  }
  csv << ",sigma,sigma2,F_theta,F_s\n";
  for (const auto& t : summary.trials) {
    csv << t.trial << ',' << t.seed << ',' << t.iterations << ',' << format_double(t.loglik);
    for (Index s = 0; s < S; ++s) {
      for (Index j = 0; j < r; ++j) csv << ',' << format_double(t.thetas(s, j));
    }
    csv << ',' << format_double(t.sigma) << ',' << format_double(t.sigma * t.sigma) << ','
        << format_double(t.F_theta) << ',' << format_double(t.F_s) << '\n';
  }

  auto fmt_row = [](const Eigen::RowVectorXd& v, int prec, bool sci) {
    std::ostringstream os;
    os << '[';
    for (Index j = 0; j < v.size(); ++j) {
      if (j) os << ", ";
      if (sci) os << std::scientific << std::setprecision(1) << v(j);
      else os << std::fixed << std::setprecision(prec) << v(j);
    }
    os << ']';
    return os.str();
  };
  log << "\nIdentified ARX parameters (" << n_trials << " trials)\n"
      << "coefficients ordered as the extended regressor [x 1]\n"
      << std::left << std::setw(9) << "" << std::setw(26) << "True" << std::setw(30) << "Mean"
      << "Std\n";
  for (Index s = 0; s < S; ++s) {
    log << std::setw(9) << ("theta_" + std::to_string(s + 1)) << std::setw(26)
        << fmt_row(truth.row(s), 2, false) << std::setw(30)
        << fmt_row(summary.theta_mean.row(s), 3, false)
        << fmt_row(summary.theta_std.row(s), 1, true) << '\n';
  }
  std::ostringstream sig;
  sig << std::fixed << std::setprecision(3) << summary.sigma2_mean;
  std::ostringstream sig_std;
  sig_std << std::scientific << std::setprecision(1) << summary.sigma2_std;
  std::ostringstream sd;
  sd << std::fixed << std::setprecision(3) << summary.sigma_mean;
  log << std::setw(9) << "sigma^2" << std::setw(26) << format_double(cfg.noise_std * cfg.noise_std)
      << std::setw(30) << sig.str() << sig_std.str() << '\n'
      << std::setw(9) << "sigma" << std::setw(26) << format_double(cfg.noise_std) << sd.str()
      << '\n'
      << std::right << "mean F_theta " << std::setprecision(4) << summary.F_theta_mean
      << ", mean F_s " << summary.F_s_mean << '\n';
  return summary;
}

}  // namespace npwarx
