// Acceptance suite: one PASS/FAIL line per criterion. Run a subset with
// `acceptance 1 3 9`.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "betaips/cli.hpp"
#include "betaips/estimators.hpp"
#include "betaips/evaluation.hpp"
#include "betaips/io.hpp"
#include "betaips/learning.hpp"
#include "betaips/log.hpp"
#include "betaips/simulator.hpp"
#include "oracles.hpp"

namespace {

using namespace betaips;
namespace fs = std::filesystem;

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(4);
  os << x;
  return os.str();
}

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst[3] = {0, 0, 0};
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto inst = oracle::random_instance(1000 + i, 5, 3, 50);
    const Matrix& theta = inst.policy.weights();
    const double beta = 0.3;
    const auto check = [&](int slot, const GradientVector& analytic,
                           const std::function<double(const LinearSoftmaxPolicy&)>& f) {
      const Matrix fd = oracle::finite_difference_gradient(f, theta);
      worst[slot] = std::max(worst[slot], (analytic - fd).cwiseAbs().maxCoeff());
    };
    check(0, ips_gradient(inst.data, inst.policy),
          [&](const LinearSoftmaxPolicy& p) { return ips_value(inst.data, p).value; });
    check(1, beta_ips_gradient(inst.data, inst.policy, beta), [&](const LinearSoftmaxPolicy& p) {
      return beta_ips_value(inst.data, p, beta).value;
    });
    check(2, snips_gradient(inst.data, inst.policy),
          [&](const LinearSoftmaxPolicy& p) { return snips_value(inst.data, p).value; });
  }
  const double secs = seconds_since(t0);
  const bool pass = *std::max_element(worst, worst + 3) <= 1e-6 && secs < 60;
  return {pass, "max |analytic - FD|: ips " + fmt(worst[0]) + ", beta_ips " + fmt(worst[1]) +
                    ", snips " + fmt(worst[2]) + " (tol 1e-6); " + fmt(secs) + " s"};
}

Outcome beta_optimality() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_est = -1e300;
  double worst_grad = -1e300;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto inst = oracle::random_instance(2000 + i, 5, 3, 200, 1.0, 1.0);
    const double b_est = beta_estimator_optimal(inst.data, inst.policy);
    const auto grid_est = oracle::grid_minimum(
        [&](double b) { return estimator_variance_objective(inst.data, inst.policy, b); }, -2.0,
        2.0, 0.001);
    worst_est = std::max(worst_est, estimator_variance_objective(inst.data, inst.policy, b_est) -
                                        grid_est.value);
    const double b_grad = beta_grad_optimal(inst.data, inst.policy);
    const auto grid_grad = oracle::grid_minimum(
        [&](double b) { return gradient_variance_objective(inst.data, inst.policy, b); }, -2.0,
        2.0, 0.001);
    worst_grad = std::max(worst_grad, gradient_variance_objective(inst.data, inst.policy, b_grad) -
                                          grid_grad.value);
  }
  const double secs = seconds_since(t0);
  const bool pass = worst_est <= 1e-9 && worst_grad <= 1e-9 && secs < 60;
  return {pass, "max objective(closed form) - grid min: estimator " + fmt(worst_est) +
                    ", gradient " + fmt(worst_grad) + " (tol 1e-9); " + fmt(secs) + " s"};
}

Outcome three_way_equivalence() {
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const auto inst = oracle::random_instance(3000 + i, 5, 3, 100);
    Rng rng(3000 + i, {7});
    const double c = rng.uniform() * 2.0 - 0.5;
    const GradientVector g_beta = beta_ips_gradient(inst.data, inst.policy, c);
    const GradientVector g_dr = dr_gradient(inst.data, inst.policy, ConstantReward{c});
    const GradientVector g_lambda = lambda_ips_gradient(inst.data, inst.policy, c);
    worst = std::max({worst, (g_beta - g_dr).cwiseAbs().maxCoeff(),
                      (g_beta - g_lambda).cwiseAbs().maxCoeff(),
                      (g_dr - g_lambda).cwiseAbs().maxCoeff()});
  }
  return {worst <= 1e-12, "max pairwise difference " + fmt(worst) + " (tol 1e-12)"};
}

Outcome unbiasedness() {
  const auto t0 = std::chrono::steady_clock::now();
  EnvironmentConfig cfg;
  cfg.context_dim = 3;
  cfg.num_actions = 5;
  cfg.inverse_temperature = 1.0;
  cfg.dataset_size = 500;
  cfg.seed = 4;
  const Environment env = generate_environment(cfg);
  Rng prng(4, {99});
  const LinearSoftmaxPolicy policy(oracle::random_weights(5, 3, 0.5, prng));
  Rng truth_rng = make_rng(4, Stream::kTrueValue);
  const double truth = true_policy_value(env, policy, 4'000'000, truth_rng);
  const double betas[] = {-1.0, 0.0, 0.5, 2.0};
  constexpr std::size_t kReps = 2000;
  std::vector<std::vector<double>> estimates(4, std::vector<double>(kReps));
  for (std::size_t r = 0; r < kReps; ++r) {
    Rng rng = make_rng(4, Stream::kReplication, r);
    const LoggedDataset data = generate_logged_dataset(env, 1.0, 500, rng);
    for (std::size_t b = 0; b < 4; ++b) {
      estimates[b][r] = beta_ips_value(data, policy, betas[b]).value;
    }
  }
  bool pass = seconds_since(t0) < 300;
  std::string detail = "true value " + fmt(truth) + ";";
  for (std::size_t b = 0; b < 4; ++b) {
    double mean = 0.0;
    for (double e : estimates[b]) mean += e;
    mean /= kReps;
    const double se = std::sqrt(oracle::two_pass_variance(estimates[b]) / kReps);
    const double z = (mean - truth) / se;
    pass = pass && std::abs(z) <= 3.0;
    detail += " beta=" + fmt(betas[b]) + ": z=" + fmt(z);
  }
  return {pass, detail + " (|z| <= 3); " + fmt(seconds_since(t0)) + " s"};
}

// Seed-averaged per-epoch curves of a training metric.
std::vector<double> averaged(const std::vector<TrainingReport>& reports,
                             double EpochRecord::*field) {
  std::vector<double> mean(reports.front().epochs.size(), 0.0);
  for (const auto& rep : reports) {
    for (std::size_t e = 0; e < mean.size(); ++e) mean[e] += rep.epochs[e].*field;
  }
  for (double& m : mean) m /= static_cast<double>(reports.size());
  return mean;
}

Outcome minibatch_variance_ordering() {
  const auto t0 = std::chrono::steady_clock::now();
  EnvironmentConfig env_cfg;  // d=5, K=10, tau=1, n=1e4
  const Environment env = generate_environment(env_cfg);
  OptimizerConfig opt;
  opt.learning_rate = 0.01;
  opt.batch_size = 1024;
  opt.epochs = 50;
  std::vector<TrainingReport> ips, banditnet, beta;
  for (std::uint64_t s = 0; s < 8; ++s) {
    Rng rng = make_rng(s, Stream::kLoggedData);
    const LoggedDataset data = generate_logged_dataset(env, 1.0, 10000, rng);
    opt.seed = s;
    ips.push_back(train_mini_batch(data, baseline::Zero{}, opt));
    banditnet.push_back(
        train_mini_batch(data, baseline::FixedLambda{data.mean_reward()}, opt));
    beta.push_back(train_mini_batch(data, baseline::GradOptimal{}, opt));
  }
  const auto v_ips = averaged(ips, &EpochRecord::mean_minibatch_gradient_variance);
  const auto v_bn = averaged(banditnet, &EpochRecord::mean_minibatch_gradient_variance);
  const auto v_beta = averaged(beta, &EpochRecord::mean_minibatch_gradient_variance);
  std::size_t ok = 0;
  for (std::size_t e = 0; e < v_ips.size(); ++e) {
    if (v_beta[e] <= v_bn[e] && v_bn[e] <= v_ips[e]) ++ok;
  }
  const double secs = seconds_since(t0);
  return {ok >= 45 && secs < 600,
          std::to_string(ok) + "/50 epochs with beta_ips <= banditnet <= ips (need 45); epoch 50: " +
              fmt(v_beta.back()) + " / " + fmt(v_bn.back()) + " / " + fmt(v_ips.back()) + "; " +
              fmt(secs) + " s"};
}

Outcome fullbatch_value_ordering() {
  const auto t0 = std::chrono::steady_clock::now();
  EnvironmentConfig env_cfg;
  const Environment env = generate_environment(env_cfg);
  Rng test_rng = make_rng(0, Stream::kTestContexts);
  const PolicyValueOracle test(env, 100000, test_rng);
  OptimizerConfig opt;
  opt.batch_size = std::nullopt;
  opt.epochs = 200;
  std::vector<TrainingReport> ips, snips, beta;
  for (std::uint64_t s = 0; s < 8; ++s) {
    Rng rng = make_rng(s, Stream::kLoggedData);
    const LoggedDataset data = generate_logged_dataset(env, 1.0, 10000, rng);
    ips.push_back(train_full_batch(data, baseline::Zero{}, opt, std::cref(test)));
    snips.push_back(train_full_batch(data, baseline::SelfNormalized{}, opt, std::cref(test)));
    beta.push_back(train_full_batch(data, baseline::EstimatorOptimal{}, opt, std::cref(test)));
  }
  const auto c_ips = averaged(ips, &EpochRecord::test_policy_value);
  const auto c_snips = averaged(snips, &EpochRecord::test_policy_value);
  const auto c_beta = averaged(beta, &EpochRecord::test_policy_value);
  const double target = 0.95 * c_snips.back();
  const auto first_reaching = [&](const std::vector<double>& curve) {
    for (std::size_t e = 0; e < curve.size(); ++e) {
      if (curve[e] >= target) return e + 1;
    }
    return curve.size() + 1;
  };
  const std::size_t e_beta = first_reaching(c_beta);
  const std::size_t e_snips = first_reaching(c_snips);
  const double secs = seconds_since(t0);
  const bool pass = c_beta.back() >= c_ips.back() && c_snips.back() >= c_ips.back() &&
                    e_beta <= e_snips && secs < 900;
  return {pass, "final value beta_ips " + fmt(c_beta.back()) + ", snips " + fmt(c_snips.back()) +
                    ", ips " + fmt(c_ips.back()) + "; epochs to 95% of snips final: beta_ips " +
                    std::to_string(e_beta) + ", snips " + std::to_string(e_snips) + "; " +
                    fmt(secs) + " s"};
}

Outcome ope_grid_pattern() {
  const auto t0 = std::chrono::steady_clock::now();
  OpeExperimentConfig cfg;  // full desk-scale grid, 100 replications
  cfg.estimators = {baseline::Zero{}, baseline::SelfNormalized{}, baseline::EstimatorOptimal{}};
  const auto rows = run_ope_experiment(cfg);
  std::map<std::tuple<std::size_t, double, std::size_t>, std::map<std::string, double>> cells;
  for (const auto& r : rows) cells[{r.k_actions, r.inv_temperature, r.n_logged}][r.estimator] = r.mse;
  std::size_t beat_ips = 0, beat_snips = 0, snips_cells = 0;
  std::string failures;
  for (const auto& [key, mse] : cells) {
    const auto& [k, tau, n] = key;
    const double b = mse.at("beta_ips");
    const std::string label =
        " K=" + std::to_string(k) + ",tau=" + fmt(tau) + ",n=" + std::to_string(n);
    if (b <= mse.at("ips")) {
      ++beat_ips;
    } else {
      failures += label + "(vs ips)";
    }
    if (n >= 1000) {
      ++snips_cells;
      if (b <= mse.at("snips")) {
        ++beat_snips;
      } else {
        failures += label + "(vs snips)";
      }
    }
  }
  const double secs = seconds_since(t0);
  const bool pass = beat_ips == cells.size() && beat_snips == snips_cells && secs < 1800;
  return {pass, "beta_ips MSE <= ips in " + std::to_string(beat_ips) + "/" +
                    std::to_string(cells.size()) + " cells, <= snips in " +
                    std::to_string(beat_snips) + "/" + std::to_string(snips_cells) +
                    " cells with n >= 1e3" + (failures.empty() ? "" : "; failing:" + failures) +
                    "; " + fmt(secs) + " s"};
}

Outcome snips_translation_invariance() {
  double worst_snips = 0.0;
  double least_ips = 1e300;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto inst = oracle::random_instance(8000 + i, 5, 3, 200);
    const GradientVector s0 = snips_gradient(inst.data, inst.policy);
    const GradientVector i0 = ips_gradient(inst.data, inst.policy);
    for (double c : {-3.0, 7.0}) {
      const LoggedDataset shifted = inst.data.with_reward_shift(c);
      const GradientVector s1 = snips_gradient(shifted, inst.policy);
      const GradientVector i1 = ips_gradient(shifted, inst.policy);
      worst_snips = std::max(worst_snips, (s1 - s0).norm() / s0.norm());
      least_ips = std::min(least_ips, (i1 - i0).norm() / i0.norm());
    }
  }
  return {worst_snips < 1e-8 && least_ips > 1e-3,
          "max relative snips change " + fmt(worst_snips) + " (tol 1e-8); min relative ips change " +
              fmt(least_ips)};
}

std::string file_bytes(const fs::path& p) { return read_text_file(p); }

Outcome cli_determinism() {
  const fs::path dir = fs::temp_directory_path() / "betaips_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path cfg = dir / "config.json";
  write_text_file(cfg, R"({
  "seed": 11,
  "threads": 2,
  "environment": {"dataset_size": 2000},
  "optimizer": {"epochs": 5, "batch_size": 256},
  "train": {"estimator": "beta_ips_grad", "runs": 2, "test_contexts": 5000},
  "sweep": {"lambda_grid": [0.0, 0.5]},
  "ope": {"action_space_sizes": [10], "inverse_temperatures": [-1.0, 1.0],
          "dataset_sizes": [100, 500], "replications": 5,
          "true_value_contexts": 20000, "target_train_size": 1000}
})");
  std::ostringstream sink;
  const auto run = [&](std::vector<std::string> args) {
    args.insert(args.end(), {"--config", cfg.string()});
    return cli_dispatch(args, sink, sink);
  };
  // evaluate needs a dataset and a policy on disk.
  if (run({"simulate", "--out", (dir / "eval_data.csv").string()}) != 0) {
    return {false, "simulate failed: " + sink.str()};
  }
  write_text_file(dir / "policy.csv", format_real(10) + ",5\n" + [] {
    std::string rows;
    for (int k = 0; k < 10; ++k) rows += "0.1,-0.2,0.3,0,0.05\n";
    return rows;
  }());
  const fs::path eval_cfg = dir / "eval.json";
  write_text_file(eval_cfg, R"({"evaluate": {"dataset": ")" + (dir / "eval_data.csv").string() +
                                R"(", "policy": ")" + (dir / "policy.csv").string() +
                                R"(", "reference_value": 0.5}})");

  std::vector<std::string> commands = {"simulate", "train", "sweep", "ope", "evaluate"};
  std::vector<std::string> identical;
  std::vector<std::string> differing;
  for (const auto& cmd : commands) {
    std::string outputs[2];
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path out = dir / (cmd + "_" + std::to_string(rep) + ".csv");
      std::vector<std::string> args = {cmd, "--out", out.string(), "--seed", "5"};
      int code;
      if (cmd == "evaluate") {
        args.insert(args.end(), {"--config", eval_cfg.string()});
        code = cli_dispatch(args, sink, sink);
      } else {
        code = run(args);
      }
      if (code != 0) return {false, cmd + " exited with " + std::to_string(code) + ": " + sink.str()};
      outputs[rep] = file_bytes(out);
    }
    (outputs[0] == outputs[1] && !outputs[0].empty() ? identical : differing).push_back(cmd);
  }
  fs::remove_all(dir);
  std::string detail = std::to_string(identical.size()) + "/5 subcommands byte-identical";
  for (const auto& c : differing) detail += " [differs: " + c + "]";
  return {differing.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  set_warnings_enabled(false);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient correctness vs finite differences", gradient_correctness},
      {"closed-form baselines hit the grid minimum", beta_optimality},
      {"beta-IPS / constant DR / lambda-IPS gradient equivalence", three_way_equivalence},
      {"beta-IPS unbiased for fixed beta", unbiasedness},
      {"mini-batch gradient variance ordering", minibatch_variance_ordering},
      {"full-batch final value and convergence ordering", fullbatch_value_ordering},
      {"OPE MSE pattern over the desk-scale grid", ope_grid_pattern},
      {"SNIPS gradient translation invariance", snips_translation_invariance},
      {"CLI determinism", cli_determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] criterion %d: %s: %s\n", o.pass ? "PASS" : "FAIL", id,
                criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
