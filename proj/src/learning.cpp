#include "betaips/learning.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "betaips/errors.hpp"
#include "betaips/log.hpp"
#include "betaips/parallel.hpp"
#include "betaips/simulator.hpp"

namespace betaips {
namespace {

struct StepGradient {
  GradientVector gradient;
  double beta = 0.0;
  bool fallback = false;
};

template <typename Solver>
double solve_or_zero(Solver&& solver, const char* name, bool& fallback) {
  try {
    return solver();
  } catch (const DegenerateBaseline& e) {
    warn(std::string(name) + ": " + e.what() + "; falling back to beta = 0");
    fallback = true;
    return 0.0;
  }
}

StepGradient compute_step(const LoggedDataset& data,
                          const LinearSoftmaxPolicy& policy,
                          const BaselineMode& mode) {
  StepGradient out;
  if (std::holds_alternative<baseline::SelfNormalized>(mode)) {
    out.gradient = snips_gradient(data, policy);
    out.beta = snips_value(data, policy).value;
    return out;
  }
  if (std::holds_alternative<baseline::Zero>(mode)) {
    out.beta = 0.0;
  } else if (const auto* fixed = std::get_if<baseline::FixedLambda>(&mode)) {
    out.beta = fixed->lambda;
  } else if (std::holds_alternative<baseline::GradOptimal>(mode)) {
    out.beta = solve_or_zero([&] { return beta_grad_optimal(data, policy); },
                             "beta_grad_optimal", out.fallback);
  } else if (std::holds_alternative<baseline::EstimatorOptimal>(mode)) {
    out.beta = solve_or_zero([&] { return beta_estimator_optimal(data, policy); },
                             "beta_estimator_optimal", out.fallback);
  } else {
    throw ContractViolation("doubly robust estimation is not a training mode");
  }
  out.gradient = beta_ips_gradient(data, policy, out.beta);
  return out;
}

LinearSoftmaxPolicy initial_policy(const LoggedDataset& data,
                                   std::optional<LinearSoftmaxPolicy> initial) {
  if (initial) {
    if (initial->num_actions() != data.num_actions() ||
        initial->context_dim() != data.context_dim()) {
      throw ContractViolation("initial policy shape does not match dataset");
    }
    return std::move(*initial);
  }
  return LinearSoftmaxPolicy(data.num_actions(), data.context_dim());
}

double evaluate(const ValueOracle& oracle, const LinearSoftmaxPolicy& policy) {
  return oracle ? oracle(policy) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

void OptimizerConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ContractViolation("learning_rate must be finite and >= 0");
  }
  if (!(decay_rate >= 0.0)) throw ContractViolation("decay_rate must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) ||
      !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ContractViolation("Adam moment decays must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ContractViolation("adam_epsilon must be > 0");
  if (batch_size && *batch_size < 2) {
    throw ContractViolation("batch_size must be >= 2");
  }
}

AdamState::AdamState(Eigen::Index rows, Eigen::Index cols, double b1, double b2,
                     double eps)
    : first_moment(Matrix::Zero(rows, cols)),
      second_moment(Matrix::Zero(rows, cols)),
      beta1(b1),
      beta2(b2),
      epsilon(eps) {}

void adam_step(AdamState& state, Matrix& params, const GradientVector& gradient,
               double learning_rate) {
  if (gradient.rows() != params.rows() || gradient.cols() != params.cols() ||
      state.first_moment.rows() != params.rows() ||
      state.first_moment.cols() != params.cols()) {
    throw ContractViolation("adam_step: gradient/state shape mismatch");
  }
  if (!gradient.allFinite()) {
    throw NumericError("adam_step: non-finite gradient");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * gradient;
  state.second_moment = state.beta2 * state.second_moment +
                        (1.0 - state.beta2) * gradient.cwiseAbs2();
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  params.array() += learning_rate * (state.first_moment.array() / correction1) /
                    ((state.second_moment.array() / correction2).sqrt() + state.epsilon);
}

TrainingReport train_full_batch(const LoggedDataset& data,
                                const BaselineMode& mode,
                                const OptimizerConfig& config,
                                const ValueOracle& oracle,
                                std::optional<LinearSoftmaxPolicy> initial) {
  config.validate();
  if (!std::holds_alternative<baseline::Zero>(mode) &&
      !std::holds_alternative<baseline::SelfNormalized>(mode) &&
      !std::holds_alternative<baseline::EstimatorOptimal>(mode)) {
    throw ContractViolation("train_full_batch supports ips, snips and beta_ips, got " +
                            baseline_mode_name(mode));
  }
  if (data.size() < 2) throw ContractViolation("training needs at least 2 rows");
  TrainingReport report{{}, initial_policy(data, std::move(initial)), 0};
  Matrix& theta = report.final_policy.weights();
  AdamState adam(theta.rows(), theta.cols(), config.adam_beta1,
                 config.adam_beta2, config.adam_epsilon);
  report.epochs.reserve(config.epochs);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const StepGradient step = compute_step(data, report.final_policy, mode);
    report.baseline_fallbacks += step.fallback ? 1 : 0;
    const double variance =
        gradient_sample_variance(data, report.final_policy, step.beta);
    adam_step(adam, theta, step.gradient, config.learning_rate_at(epoch));
    report.epochs.push_back({epoch + 1, evaluate(oracle, report.final_policy),
                             variance, step.beta});
  }
  return report;
}

std::vector<std::vector<std::size_t>> partition_batches(
    std::span<const std::size_t> order, std::size_t batch_size) {
  if (batch_size < 2) throw ContractViolation("batch_size must be >= 2");
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
    const std::size_t end = std::min(order.size(), begin + batch_size);
    if (end - begin < 2 && !batches.empty()) {
      batches.back().insert(batches.back().end(), order.begin() + static_cast<std::ptrdiff_t>(begin),
                            order.begin() + static_cast<std::ptrdiff_t>(end));
    } else {
      batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                           order.begin() + static_cast<std::ptrdiff_t>(end));
    }
  }
  return batches;
}

TrainingReport train_mini_batch(const LoggedDataset& data,
                                const BaselineMode& mode,
                                const OptimizerConfig& config,
                                const ValueOracle& oracle,
                                std::optional<LinearSoftmaxPolicy> initial) {
  config.validate();
  if (!std::holds_alternative<baseline::Zero>(mode) &&
      !std::holds_alternative<baseline::FixedLambda>(mode) &&
      !std::holds_alternative<baseline::GradOptimal>(mode)) {
    throw ContractViolation(
        "train_mini_batch supports ips, banditnet and beta_ips_grad, got " +
        baseline_mode_name(mode));
  }
  if (data.size() < 2) throw ContractViolation("training needs at least 2 rows");
  const std::size_t batch_size = config.batch_size.value_or(data.size());
  TrainingReport report{{}, initial_policy(data, std::move(initial)), 0};
  Matrix& theta = report.final_policy.weights();
  AdamState adam(theta.rows(), theta.cols(), config.adam_beta1,
                 config.adam_beta2, config.adam_epsilon);
  Rng rng = make_rng(config.seed, Stream::kShuffle);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  report.epochs.reserve(config.epochs);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    const auto batches = partition_batches(order, batch_size);
    const double lr = config.learning_rate_at(epoch);
    double variance_sum = 0.0;
    double beta_sum = 0.0;
    for (const auto& rows : batches) {
      const LoggedDataset batch = data.subset(rows);
      const StepGradient step = compute_step(batch, report.final_policy, mode);
      report.baseline_fallbacks += step.fallback ? 1 : 0;
      variance_sum += gradient_sample_variance(batch, report.final_policy, step.beta);
      beta_sum += step.beta;
      adam_step(adam, theta, step.gradient, lr);
    }
    const double count = static_cast<double>(batches.size());
    report.epochs.push_back({epoch + 1, evaluate(oracle, report.final_policy),
                             variance_sum / count, beta_sum / count});
  }
  return report;
}

LambdaSweepResult lambda_sweep(const LoggedDataset& train,
                               const LoggedDataset& validation,
                               std::span<const double> lambda_grid,
                               const OptimizerConfig& config,
                               const ValueOracle& oracle, std::size_t threads) {
  if (lambda_grid.empty()) throw ContractViolation("lambda grid is empty");
  LambdaSweepResult result;
  result.lambdas.assign(lambda_grid.begin(), lambda_grid.end());
  std::vector<std::optional<TrainingReport>> reports(lambda_grid.size());
  result.validation_values.resize(lambda_grid.size());
  parallel_for(lambda_grid.size(), threads, [&](std::size_t i) {
    reports[i] = train_mini_batch(train, baseline::FixedLambda{lambda_grid[i]},
                                  config, oracle);
    result.validation_values[i] = snips_value(validation, reports[i]->final_policy).value;
  });
  std::size_t best = 0;
  for (std::size_t i = 1; i < lambda_grid.size(); ++i) {
    if (result.validation_values[i] > result.validation_values[best]) best = i;
  }
  result.best_lambda = lambda_grid[best];
  result.reports.reserve(reports.size());
  for (auto& r : reports) result.reports.push_back(std::move(*r));
  return result;
}

}  // namespace betaips
