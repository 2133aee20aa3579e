#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "betaips/core.hpp"
#include "betaips/estimators.hpp"
#include "betaips/learning.hpp"

namespace betaips {

struct OpeExperimentConfig {
  std::vector<std::size_t> action_space_sizes{10, 100};
  std::vector<double> inverse_temperatures{-5.0, -1.0, 1.0, 5.0};
  std::vector<std::size_t> dataset_sizes{100, 1000, 10000};
  std::size_t replications = 100;
  std::vector<BaselineMode> estimators{baseline::Zero{}, baseline::SelfNormalized{},
                                       baseline::DoublyRobust{},
                                       baseline::EstimatorOptimal{}};
  std::uint64_t seed = 0;
  std::size_t context_dim = 5;
  // Monte-Carlo contexts for the ground-truth value of each target policy.
  std::size_t true_value_contexts = 1'000'000;
  // Logged rows used to train each (K, tau) cell's target policy.
  std::size_t target_train_size = 10000;
  OptimizerConfig target_optimizer{0.01, 0.01, 0.9, 0.999, 1e-8, 20, 1024, 0};
  std::size_t threads = 1;

  void validate() const;
};

struct OpeResultRow {
  std::string estimator;
  std::size_t k_actions = 0;
  double inv_temperature = 0.0;
  std::size_t n_logged = 0;
  double mse = 0.0;
  double bias_squared = 0.0;
  // Sample variance across replications (n - 1 divisor).
  double variance = 0.0;
  double mean_estimate = 0.0;
  double true_value = 0.0;
  std::size_t replications = 0;
  // Replications whose closed-form baseline fell back to beta = 0.
  std::size_t baseline_fallbacks = 0;
};

// MSE, squared bias and sample variance of replicated estimates; satisfies
// mse = bias_squared + variance * (R - 1) / R.
OpeResultRow summarize_replications(std::span<const double> estimates,
                                    double true_value);

// Mini-batch IPS training from the uniform policy (theta = 0).
LinearSoftmaxPolicy train_target_policy(const LoggedDataset& logged,
                                        const OptimizerConfig& config);

// One row per (estimator, K, tau, n). Each (K, tau) cell trains one target
// policy that is shared across dataset sizes.
std::vector<OpeResultRow> run_ope_experiment(const OpeExperimentConfig& config);

// |estimate - reference| / |reference|; reference must be nonzero.
double relative_absolute_error(double estimate, double reference_value);

struct LoggedFileEstimate {
  std::string estimator;
  double value = 0.0;
  double rel_abs_error = 0.0;
  bool baseline_fallback = false;
};

std::vector<LoggedFileEstimate> evaluate_on_logged_data(
    const LoggedDataset& data, const LinearSoftmaxPolicy& policy,
    std::span<const BaselineMode> estimators, double reference_value);

// Parses `path` with the dataset schema (K taken from the policy).
std::vector<LoggedFileEstimate> evaluate_on_logged_file(
    const std::filesystem::path& path, const LinearSoftmaxPolicy& policy,
    std::span<const BaselineMode> estimators, double reference_value);

}  // namespace betaips
