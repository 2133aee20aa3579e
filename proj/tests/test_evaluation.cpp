#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "betaips/errors.hpp"
#include "betaips/evaluation.hpp"
#include "betaips/io.hpp"
#include "betaips/log.hpp"
#include "oracles.hpp"

using namespace betaips;
namespace fs = std::filesystem;

namespace {

struct Quiet {
  Quiet() { set_warnings_enabled(false); }
} quiet;

OpeExperimentConfig tiny_grid() {
  OpeExperimentConfig cfg;
  cfg.action_space_sizes = {5};
  cfg.inverse_temperatures = {-1.0, 1.0};
  cfg.dataset_sizes = {100, 400};
  cfg.replications = 30;
  cfg.true_value_contexts = 20000;
  cfg.target_train_size = 1000;
  cfg.target_optimizer.epochs = 3;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("relative absolute error") {
  CHECK(relative_absolute_error(0.11, 0.10) == doctest::Approx(0.1));
  CHECK(relative_absolute_error(0.09, 0.10) == doctest::Approx(0.1));
  CHECK(relative_absolute_error(0.3, 0.3) == 0.0);
  CHECK_THROWS_AS(relative_absolute_error(0.3, 0.0), ContractViolation);
}

TEST_CASE("replication summary decomposes the MSE") {
  const std::vector<double> est{0.4, 0.55, 0.61, 0.47, 0.52};
  const auto row = summarize_replications(est, 0.5);
  double mse = 0.0;
  for (double e : est) mse += (e - 0.5) * (e - 0.5);
  mse /= 5;
  CHECK(row.mse == doctest::Approx(mse));
  CHECK(row.mean_estimate == doctest::Approx(0.51));
  CHECK(row.bias_squared == doctest::Approx(0.0001));
  CHECK(std::abs(row.mse - (row.bias_squared + row.variance * 4.0 / 5.0)) <= 1e-9);
}

TEST_CASE("untrained target is uniform; training helps and is deterministic") {
  OptimizerConfig cfg;
  cfg.epochs = 0;
  const auto inst = oracle::random_instance(1, 5, 3, 500);
  CHECK(train_target_policy(inst.data, cfg).weights().isZero());

  cfg.epochs = 20;
  int improved = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    EnvironmentConfig env_cfg;
    env_cfg.seed = s;
    const Environment env = generate_environment(env_cfg);
    const LoggedDataset data = generate_logged_dataset(env, env_cfg);
    const auto target = train_target_policy(data, cfg);
    Rng r1(s, {1}), r2(s, {1});
    if (true_policy_value(env, target, 20000, r1) >=
        true_policy_value(env, LinearSoftmaxPolicy(10, 5), 20000, r2)) {
      ++improved;
    }
    if (s == 0) CHECK(train_target_policy(data, cfg).weights() == target.weights());
  }
  CHECK(improved == 10);
}

TEST_CASE("OPE grid rows, bookkeeping and determinism") {
  const auto cfg = tiny_grid();
  const auto rows = run_ope_experiment(cfg);
  CHECK(rows.size() == cfg.estimators.size() * 2 * 2);
  std::set<std::string> names;
  for (const auto& r : rows) {
    names.insert(r.estimator);
    CHECK(r.replications == 30);
    CHECK(std::abs(r.mse - (r.bias_squared + r.variance * 29.0 / 30.0)) <= 1e-9);
    CHECK(r.mse >= 0.0);
  }
  CHECK(names == std::set<std::string>{"ips", "snips", "dr", "beta_ips"});

  auto threaded = cfg;
  threaded.threads = 3;
  const auto again = run_ope_experiment(threaded);
  REQUIRE(again.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(again[i].mse == rows[i].mse);
    CHECK(again[i].true_value == rows[i].true_value);
  }
}

TEST_CASE("a cell does not depend on the rest of the grid") {
  auto cfg = tiny_grid();
  const auto full = run_ope_experiment(cfg);
  cfg.inverse_temperatures = {1.0};
  cfg.dataset_sizes = {400};
  const auto single = run_ope_experiment(cfg);
  for (const auto& s : single) {
    for (const auto& f : full) {
      if (f.estimator == s.estimator && f.inv_temperature == 1.0 && f.n_logged == 400) {
        CHECK(f.mse == s.mse);
      }
    }
  }
}

TEST_CASE("IPS MSE shrinks with n up to Monte-Carlo noise") {
  auto cfg = tiny_grid();
  cfg.estimators = {baseline::Zero{}, baseline::FixedLambda{0.5}};
  cfg.dataset_sizes = {100, 1000};
  cfg.replications = 60;
  const auto rows = run_ope_experiment(cfg);
  for (const auto& small : rows) {
    if (small.n_logged != 100) continue;
    for (const auto& large : rows) {
      if (large.n_logged != 1000 || large.estimator != small.estimator ||
          large.inv_temperature != small.inv_temperature) {
        continue;
      }
      // Standard error of an MSE estimate: sd of squared errors / sqrt(R);
      // for near-normal errors that is about mse * sqrt(2 / R).
      const double se = small.mse * std::sqrt(2.0 / 60.0) + large.mse * std::sqrt(2.0 / 60.0);
      CHECK(large.mse <= small.mse + 2 * se);
    }
  }
}

TEST_CASE("logged-file evaluation") {
  const fs::path dir = fs::temp_directory_path() / "betaips_eval_test";
  fs::create_directories(dir);
  SUBCASE("two-sample fixture") {
    write_text_file(dir / "two.csv",
                    "x_0,action,reward,propensity\n1,0,1,0.25\n-1,1,0,1\n");
    const BaselineMode modes[] = {baseline::Zero{}, baseline::SelfNormalized{}};
    const auto est = evaluate_on_logged_file(dir / "two.csv", LinearSoftmaxPolicy(2, 1), modes, 0.9);
    CHECK(est[0].value == doctest::Approx(1.0));
    CHECK(est[1].value == doctest::Approx(0.8));
    CHECK(est[0].rel_abs_error == doctest::Approx(0.1 / 0.9));
  }
  SUBCASE("unit weights give the mean reward everywhere") {
    // Balanced actions, so the fitted DR model also averages to the mean.
    write_text_file(dir / "unit.csv",
                    "x_0,x_1,action,reward,propensity\n1,2,0,1,0.5\n0,1,1,0,0.5\n"
                    "3,1,1,1,0.5\n2,2,0,1,0.5\n");
    const BaselineMode modes[] = {baseline::Zero{}, baseline::SelfNormalized{},
                                  baseline::DoublyRobust{}, baseline::EstimatorOptimal{}};
    for (const auto& e : evaluate_on_logged_file(dir / "unit.csv", LinearSoftmaxPolicy(2, 2), modes, 1.0)) {
      CHECK(e.value == doctest::Approx(0.75));
    }
  }
  SUBCASE("missing propensity column") {
    write_text_file(dir / "bad.csv", "x_0,action,reward\n1,0,1\n");
    const BaselineMode modes[] = {baseline::Zero{}};
    try {
      evaluate_on_logged_file(dir / "bad.csv", LinearSoftmaxPolicy(2, 1), modes, 1.0);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.column() == "propensity");
    }
  }
  fs::remove_all(dir);
}
