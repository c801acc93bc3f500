// Command-line front end: generate, fit, evaluate, trials.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "npwarx/commands.hpp"
#include "npwarx/error.hpp"

namespace {

using npwarx::ErrorKind;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return 2;
    case ErrorKind::io: return 3;
    case ErrorKind::data: return 4;
    case ErrorKind::numeric: return 5;
  }
  return 1;
}

struct CommonFlags {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<int> restarts;
  std::optional<int> max_iters;
  std::optional<int> epochs;
  std::optional<double> output_init_std;
  std::optional<int> modes;
  std::string gate;
  std::string variance;
  std::string train, val, test, model, true_theta;
  std::optional<long> samples;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration");
  cmd->add_option("--preset", f.preset, "Named preset")->check(CLI::IsMember({"benchmark"}));
  cmd->add_option("--seed", f.seed, "Base random seed");
  cmd->add_option("--out-dir", f.out_dir, "Output directory");
  cmd->add_option("--restarts", f.restarts, "EM restarts");
  cmd->add_option("--max-iters", f.max_iters, "EM iteration cap");
  cmd->add_option("--epochs", f.epochs, "Gate epochs per M-step");
  cmd->add_option("--output-init-std", f.output_init_std,
                  "Initial weight std of the gate output layer (0: same as hidden)");
  cmd->add_option("--modes", f.modes, "Number of modes S");
  cmd->add_option("--gate", f.gate, "Gate type")->check(CLI::IsMember({"neural", "linear"}));
  cmd->add_option("--variance", f.variance, "Variance estimator")
      ->check(CLI::IsMember({"pooled", "map"}));
  cmd->add_option("--train", f.train, "Training CSV");
  cmd->add_option("--val", f.val, "Validation CSV");
  cmd->add_option("--test", f.test, "Test CSV");
  cmd->add_option("--model", f.model, "Model file");
  cmd->add_option("--true-theta", f.true_theta, "Reference parameters CSV");
}

npwarx::RunConfig resolve_config(const CommonFlags& f) {
  npwarx::RunConfig cfg = npwarx::benchmark_preset();
  if (!f.config.empty()) cfg = npwarx::load_config(f.config, cfg);
  if (f.seed) cfg.seed = *f.seed;
  if (!f.out_dir.empty()) cfg.paths.out_dir = f.out_dir;
  if (f.restarts) cfg.em.n_restarts = *f.restarts;
  if (f.max_iters) cfg.em.max_iters = *f.max_iters;
  if (f.epochs) cfg.em.adam.epochs_per_m_step = *f.epochs;
  if (f.output_init_std) cfg.em.output_init_std = *f.output_init_std;
  if (f.modes) cfg.model.S = *f.modes;
  if (!f.gate.empty()) {
    cfg.model.gate = f.gate == "linear" ? npwarx::GateKind::linear : npwarx::GateKind::neural;
  }
  if (!f.variance.empty()) cfg.em.variance = npwarx::parse_variance_mode(f.variance);
  if (!f.train.empty()) cfg.paths.train = f.train;
  if (!f.val.empty()) cfg.paths.val = f.val;
  if (!f.test.empty()) cfg.paths.test = f.test;
  if (!f.model.empty()) cfg.paths.model = f.model;
  if (!f.true_theta.empty()) cfg.paths.true_theta = f.true_theta;
  if (f.samples) {
    if (*f.samples < 1) throw npwarx::usage_error("--samples must be at least 1");
    // Keep the benchmark proportions (4/6 train, 1/6 val, rest test) for custom lengths.
    cfg.n_samples = *f.samples;
    cfg.split.train = cfg.n_samples * 4 / 6;
    cfg.split.val = cfg.n_samples / 6;
    cfg.split.test = cfg.n_samples - cfg.split.train - cfg.split.val;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Identification of piecewise ARX models with neural or linear gates"};
  app.require_subcommand(1);

  CommonFlags flags;
  int n_trials = 20;

  auto* generate = app.add_subcommand("generate", "Simulate the benchmark system");
  add_common(generate, flags);
  generate->add_option("--samples", flags.samples, "Number of regression samples");

  auto* fit = app.add_subcommand("fit", "Fit a mixture by EM");
  add_common(fit, flags);

  auto* evaluate = app.add_subcommand("evaluate", "Score a saved model on test data");
  add_common(evaluate, flags);

  auto* trials = app.add_subcommand("trials", "Repeat fit + evaluate with distinct seeds");
  add_common(trials, flags);
  trials->add_option("--trials", n_trials, "Number of trials");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    const npwarx::RunConfig cfg = resolve_config(flags);
    if (generate->parsed()) npwarx::cmd_generate(cfg, std::cout);
    if (fit->parsed()) npwarx::cmd_fit(cfg, std::cout);
    if (evaluate->parsed()) npwarx::cmd_evaluate(cfg, std::cout);
    if (trials->parsed()) npwarx::cmd_trials(cfg, n_trials, std::cout);
  } catch (const npwarx::Error& e) {
    std::cerr << "error[" << npwarx::to_string(e.kind()) << "]: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
