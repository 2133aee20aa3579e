#include "betaips/cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "betaips/config.hpp"
#include "betaips/errors.hpp"
#include "betaips/evaluation.hpp"
#include "betaips/io.hpp"
#include "betaips/learning.hpp"
#include "betaips/parallel.hpp"
#include "betaips/simulator.hpp"

namespace betaips {
namespace {

struct CommonOptions {
  std::string config_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  bool print_config = false;
};

// Failure inside a named library operation.
class OperationError : public std::runtime_error {
 public:
  OperationError(const std::string& op, const std::exception& cause)
      : std::runtime_error(op + ": " + cause.what()) {}
};

template <typename F>
auto run_op(const char* op, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw OperationError(op, e);
  }
}

ExperimentConfig effective_config(const CommonOptions& opts) {
  ExperimentConfig cfg = opts.config_path.empty() ? config_from_json(nlohmann::json::object())
                                                  : load_config(opts.config_path);
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.threads) {
    if (*opts.threads < 1) throw ConfigError("--threads must be >= 1");
    cfg.threads = *opts.threads;
  }
  cfg.apply_globals();
  return cfg;
}

void require_out(const CommonOptions& opts, const char* command) {
  if (opts.out_path.empty()) {
    throw ConfigError(std::string(command) + " requires --out PATH");
  }
}

int cmd_simulate(const ExperimentConfig& cfg, const CommonOptions& opts, std::ostream& out) {
  require_out(opts, "simulate");
  const Environment env = run_op("generate_environment", [&] { return generate_environment(cfg.environment); });
  const LoggedDataset data = run_op("generate_logged_dataset", [&] {
    return generate_logged_dataset(env, cfg.environment);
  });
  run_op("write_dataset", [&] { write_dataset(opts.out_path, data); });
  out << "wrote " << data.size() << " interactions (d=" << data.context_dim()
      << ", K=" << data.num_actions() << ") to " << opts.out_path << '\n';
  return 0;
}

BaselineMode training_mode(const ExperimentConfig& cfg, const LoggedDataset& data) {
  BaselineMode mode = parse_baseline_mode(cfg.train.estimator);
  if (auto* fixed = std::get_if<baseline::FixedLambda>(&mode)) {
    // A bare "banditnet" takes lambda from train.lambda.
    if (cfg.train.estimator == "banditnet") {
      if (const double* l = std::get_if<double>(&cfg.train.lambda)) {
        fixed->lambda = *l;
      } else {
        fixed->lambda = data.mean_reward();
      }
    }
  }
  return mode;
}

void check_training_combination(const ExperimentConfig& cfg) {
  const BaselineMode mode = parse_baseline_mode(cfg.train.estimator);
  const bool full = !cfg.optimizer.batch_size.has_value();
  if (std::holds_alternative<baseline::SelfNormalized>(mode) && !full) {
    throw ConfigError(
        "train: estimator 'snips' requires optimizer.batch_size = \"full\": the "
        "self-normalised objective is a ratio over the whole dataset and no longer "
        "decomposes into a sum over mini-batches");
  }
  if (std::holds_alternative<baseline::EstimatorOptimal>(mode) && !full) {
    throw ConfigError(
        "train: estimator 'beta_ips' (estimator-variance-optimal baseline) is a "
        "full-batch method; use 'beta_ips_grad' for mini-batch training");
  }
  if ((std::holds_alternative<baseline::FixedLambda>(mode) ||
       std::holds_alternative<baseline::GradOptimal>(mode)) && full) {
    throw ConfigError("train: estimator '" + cfg.train.estimator +
                      "' is a mini-batch method; set optimizer.batch_size to an integer");
  }
  if (std::holds_alternative<baseline::DoublyRobust>(mode)) {
    throw ConfigError("train: doubly robust estimators are evaluation-only");
  }
}

void append_training_rows(std::vector<ResultRecord>& rows, const std::string& experiment,
                          const std::string& estimator, std::uint64_t seed,
                          const ExperimentConfig& cfg, const TrainingReport& report) {
  for (const EpochRecord& e : report.epochs) {
    auto add = [&](const char* metric, double value) {
      rows.push_back({experiment, estimator, seed, e.epoch, cfg.environment.num_actions,
                      cfg.environment.inverse_temperature, cfg.environment.dataset_size,
                      metric, value});
    };
    add("test_value", e.test_policy_value);
    add("grad_variance", e.mean_minibatch_gradient_variance);
    add("beta_used", e.beta_used);
  }
}

int cmd_train(const ExperimentConfig& cfg, const CommonOptions& opts, std::ostream& out) {
  require_out(opts, "train");
  check_training_combination(cfg);
  const bool full = !cfg.optimizer.batch_size.has_value();
  const Environment env = run_op("generate_environment", [&] { return generate_environment(cfg.environment); });
  Rng test_rng = make_rng(cfg.seed, Stream::kTestContexts);
  const PolicyValueOracle oracle(env, cfg.train.test_contexts, test_rng);
  std::vector<std::optional<TrainingReport>> reports(cfg.train.runs);
  std::vector<std::string> names(cfg.train.runs);
  parallel_for(cfg.train.runs, cfg.threads, [&](std::size_t run) {
    const std::uint64_t run_seed = cfg.seed + run;
    Rng rng = make_rng(run_seed, Stream::kLoggedData);
    const LoggedDataset data = run_op("generate_logged_dataset", [&] {
      return generate_logged_dataset(env, cfg.environment.inverse_temperature,
                                     cfg.environment.dataset_size, rng);
    });
    const BaselineMode mode = training_mode(cfg, data);
    names[run] = baseline_mode_name(mode);
    OptimizerConfig opt = cfg.optimizer;
    opt.seed = run_seed;
    reports[run] = full ? run_op("train_full_batch", [&] {
      return train_full_batch(data, mode, opt, std::cref(oracle));
    })
                        : run_op("train_mini_batch", [&] {
                            return train_mini_batch(data, mode, opt, std::cref(oracle));
                          });
  });
  std::vector<ResultRecord> rows;
  const std::string experiment = full ? "train_full_batch" : "train_mini_batch";
  for (std::size_t run = 0; run < cfg.train.runs; ++run) {
    append_training_rows(rows, experiment, names[run], cfg.seed + run, cfg, *reports[run]);
  }
  run_op("write_results", [&] { write_results(opts.out_path, rows); });
  if (!cfg.train.policy_out.empty()) {
    run_op("write_policy", [&] { write_policy(cfg.train.policy_out, reports[0]->final_policy); });
  }
  for (std::size_t run = 0; run < cfg.train.runs; ++run) {
    out << "run " << run << " (seed " << cfg.seed + run << ", " << names[run]
        << "): final test value " << std::setprecision(6)
        << reports[run]->epochs.back().test_policy_value << '\n';
  }
  return 0;
}

int cmd_sweep(const ExperimentConfig& cfg, const CommonOptions& opts, std::ostream& out) {
  require_out(opts, "sweep");
  if (!cfg.optimizer.batch_size) {
    throw ConfigError("sweep trains BanditNet with mini-batches; optimizer.batch_size must be an integer");
  }
  const Environment env = run_op("generate_environment", [&] { return generate_environment(cfg.environment); });
  const LoggedDataset data = run_op("generate_logged_dataset", [&] {
    return generate_logged_dataset(env, cfg.environment);
  });
  const auto n_valid = static_cast<std::size_t>(
      std::ceil(cfg.sweep.validation_fraction * static_cast<double>(data.size())));
  if (n_valid < 1 || n_valid + 2 > data.size()) {
    throw ConfigError("sweep: dataset too small for the requested validation split");
  }
  const LoggedDataset train = data.slice(0, data.size() - n_valid);
  const LoggedDataset validation = data.slice(data.size() - n_valid, data.size());
  Rng test_rng = make_rng(cfg.seed, Stream::kTestContexts);
  const PolicyValueOracle oracle(env, cfg.train.test_contexts, test_rng);
  const LambdaSweepResult result = run_op("lambda_sweep", [&] {
    return lambda_sweep(train, validation, cfg.sweep.lambda_grid, cfg.optimizer,
                        std::cref(oracle), cfg.threads);
  });
  std::vector<ResultRecord> rows;
  for (std::size_t i = 0; i < result.lambdas.size(); ++i) {
    append_training_rows(rows, "sweep",
                         baseline_mode_name(baseline::FixedLambda{result.lambdas[i]}),
                         cfg.seed, cfg, result.reports[i]);
    out << "lambda " << format_real(result.lambdas[i]) << ": validation SNIPS "
        << std::setprecision(6) << result.validation_values[i] << ", test value "
        << result.reports[i].epochs.back().test_policy_value << '\n';
  }
  run_op("write_results", [&] { write_results(opts.out_path, rows); });
  out << "best lambda: " << format_real(result.best_lambda) << '\n';
  return 0;
}

int cmd_ope(const ExperimentConfig& cfg, const CommonOptions& opts, std::ostream& out) {
  require_out(opts, "ope");
  const std::vector<OpeResultRow> table =
      run_op("run_ope_experiment", [&] { return run_ope_experiment(cfg.ope); });
  std::vector<ResultRecord> rows;
  for (const OpeResultRow& r : table) {
    auto add = [&](const char* metric, double value) {
      rows.push_back({"ope", r.estimator, cfg.seed, std::nullopt, r.k_actions,
                      r.inv_temperature, r.n_logged, metric, value});
    };
    add("mse", r.mse);
    add("bias_sq", r.bias_squared);
    add("est_variance", r.variance);
  }
  run_op("write_results", [&] { write_results(opts.out_path, rows); });
  out << "wrote " << rows.size() << " rows for " << table.size()
      << " (estimator, K, tau, n) combinations\n";
  return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg, const CommonOptions& opts, std::ostream& out) {
  require_out(opts, "evaluate");
  if (cfg.evaluate.dataset.empty() || cfg.evaluate.policy.empty()) {
    throw ConfigError("evaluate requires evaluate.dataset and evaluate.policy");
  }
  if (!cfg.evaluate.reference_value || *cfg.evaluate.reference_value == 0.0) {
    throw ConfigError("evaluate requires a nonzero evaluate.reference_value");
  }
  std::vector<BaselineMode> modes;
  for (const auto& name : cfg.evaluate.estimators) modes.push_back(parse_baseline_mode(name));
  const LinearSoftmaxPolicy policy =
      run_op("read_policy", [&] { return read_policy(cfg.evaluate.policy); });
  const auto estimates = run_op("evaluate_on_logged_file", [&] {
    return evaluate_on_logged_file(cfg.evaluate.dataset, policy, modes,
                                   *cfg.evaluate.reference_value);
  });
  std::string csv = "estimator,value,reference_value,rel_abs_error\n";
  for (const auto& e : estimates) {
    csv += e.estimator + ',' + format_real(e.value) + ',' +
           format_real(*cfg.evaluate.reference_value) + ',' + format_real(e.rel_abs_error) + '\n';
    out << std::left << std::setw(16) << e.estimator << std::setprecision(6)
        << " value " << e.value << "  rel. abs. error " << e.rel_abs_error << '\n';
  }
  run_op("write_estimates", [&] { write_text_file(opts.out_path, csv); });
  return 0;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Baseline-corrected off-policy estimation and learning experiments", "betaips"};
  app.require_subcommand(1);
  CommonOptions opts;
  struct Command {
    const char* name;
    const char* help;
    int (*run)(const ExperimentConfig&, const CommonOptions&, std::ostream&);
  };
  const Command commands[] = {
      {"simulate", "Generate an environment and a logged dataset CSV", cmd_simulate},
      {"train", "Train a policy (full or mini-batch) and write per-epoch results", cmd_train},
      {"ope", "Run the off-policy evaluation grid and write MSE results", cmd_ope},
      {"sweep", "BanditNet lambda sweep with held-out SNIPS selection", cmd_sweep},
      {"evaluate", "Estimate a policy's value on a logged dataset file", cmd_evaluate},
  };
  for (const Command& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", opts.config_path, "JSON experiment config");
    sub->add_option("--out", opts.out_path, "Output file");
    sub->add_option("--seed", opts.seed, "Override the config seed");
    sub->add_option("--threads", opts.threads, "Worker threads");
    sub->add_flag("--print-config", opts.print_config,
                  "Print the effective config (all defaults explicit) to stdout");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "betaips: " << e.what() << '\n';
    return 2;
  }

  const Command* selected = nullptr;
  for (const Command& c : commands) {
    if (app.got_subcommand(c.name)) selected = &c;
  }
  try {
    const ExperimentConfig cfg = effective_config(opts);
    err << "betaips " << selected->name << ": effective config digest "
        << config_digest(cfg) << '\n';
    if (opts.print_config) out << dump_config(cfg) << '\n';
    return selected->run(cfg, opts, out);
  } catch (const ConfigError& e) {
    err << "betaips " << selected->name << ": config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "betaips " << selected->name << ": error in " << e.what() << '\n';
    return 1;
  }
}

}  // namespace betaips
