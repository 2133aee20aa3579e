#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "betaips/core.hpp"
#include "betaips/estimators.hpp"

namespace betaips {

struct OptimizerConfig {
  double learning_rate = 0.01;
  // Inverse-time decay per epoch: lr_t = lr / (1 + decay_rate * t).
  double decay_rate = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t epochs = 500;
  // std::nullopt means full batch.
  std::optional<std::size_t> batch_size = 1024;
  // Seeds the per-epoch shuffle of mini-batch training.
  std::uint64_t seed = 0;

  void validate() const;
  double learning_rate_at(std::size_t epoch) const {
    return learning_rate / (1.0 + decay_rate * static_cast<double>(epoch));
  }
};

struct AdamState {
  Matrix first_moment;
  Matrix second_moment;
  std::size_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState(Eigen::Index rows, Eigen::Index cols, double beta1 = 0.9,
            double beta2 = 0.999, double epsilon = 1e-8);
};

// Bias-corrected Adam *ascent* step: params move along +gradient.
// Throws NumericError on a non-finite gradient.
void adam_step(AdamState& state, Matrix& params, const GradientVector& gradient,
               double learning_rate);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  // NaN when no value oracle was supplied.
  double test_policy_value = 0.0;
  // Mean over the epoch's (mini-)batches of gradient_sample_variance at the
  // baseline actually applied.
  double mean_minibatch_gradient_variance = 0.0;
  // Mean baseline over the epoch's batches.
  double beta_used = 0.0;
};

struct TrainingReport {
  std::vector<EpochRecord> epochs;
  LinearSoftmaxPolicy final_policy;
  std::size_t baseline_fallbacks = 0;
};

// Test-time evaluation of a policy. Training never sees the environment
// except through this callback.
using ValueOracle = std::function<double(const LinearSoftmaxPolicy&)>;

// Full-batch Adam on the whole dataset. Modes: Zero (IPS), SelfNormalized
// (SNIPS) and EstimatorOptimal (beta-IPS, beta re-estimated every epoch).
// For SNIPS the reported baseline is the SNIPS value, the reward translation
// its gradient is equivalent to.
TrainingReport train_full_batch(const LoggedDataset& data,
                                const BaselineMode& mode,
                                const OptimizerConfig& config,
                                const ValueOracle& oracle = {},
                                std::optional<LinearSoftmaxPolicy> initial = {});

// Mini-batch Adam. Modes: Zero (IPS), FixedLambda (BanditNet) and
// GradOptimal (beta-IPS, beta re-estimated on every batch). A tail batch with
// fewer than 2 rows is merged into the previous batch.
TrainingReport train_mini_batch(const LoggedDataset& data,
                                const BaselineMode& mode,
                                const OptimizerConfig& config,
                                const ValueOracle& oracle = {},
                                std::optional<LinearSoftmaxPolicy> initial = {});

// Row partition used by train_mini_batch for one epoch.
std::vector<std::vector<std::size_t>> partition_batches(
    std::span<const std::size_t> order, std::size_t batch_size);

struct LambdaSweepResult {
  double best_lambda = 0.0;
  std::vector<double> lambdas;
  std::vector<TrainingReport> reports;
  // SNIPS estimate of each final policy on the held-out split.
  std::vector<double> validation_values;
};

// BanditNet hyper-parameter search: one mini-batch run per lambda; picks the
// lambda whose final policy has the highest SNIPS value on `validation`
// (first wins on ties).
LambdaSweepResult lambda_sweep(const LoggedDataset& train,
                               const LoggedDataset& validation,
                               std::span<const double> lambda_grid,
                               const OptimizerConfig& config,
                               const ValueOracle& oracle = {},
                               std::size_t threads = 1);

}  // namespace betaips
