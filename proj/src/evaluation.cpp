#include "betaips/evaluation.hpp"

#include <bit>
#include <cmath>
#include <numeric>

#include "betaips/errors.hpp"
#include "betaips/io.hpp"
#include "betaips/parallel.hpp"
#include "betaips/simulator.hpp"

namespace betaips {

void OpeExperimentConfig::validate() const {
  if (action_space_sizes.empty() || inverse_temperatures.empty() ||
      dataset_sizes.empty() || estimators.empty()) {
    throw ContractViolation("OPE grid axes and estimator list must be nonempty");
  }
  if (replications < 2) throw ContractViolation("replications must be >= 2");
  for (const std::size_t k : action_space_sizes) {
    if (k < 2) throw ContractViolation("action space sizes must be >= 2");
  }
  for (const std::size_t n : dataset_sizes) {
    if (n < 1) throw ContractViolation("dataset sizes must be positive");
  }
  for (const double t : inverse_temperatures) {
    if (!std::isfinite(t)) throw ContractViolation("inverse temperatures must be finite");
  }
  if (context_dim < 1) throw ContractViolation("context_dim must be >= 1");
  if (true_value_contexts < 1) throw ContractViolation("true_value_contexts must be >= 1");
  if (target_train_size < 2) throw ContractViolation("target_train_size must be >= 2");
  target_optimizer.validate();
}

OpeResultRow summarize_replications(std::span<const double> estimates,
                                    double true_value) {
  if (estimates.size() < 2) throw ContractViolation("need at least 2 replications");
  const double r = static_cast<double>(estimates.size());
  OpeResultRow row;
  row.replications = estimates.size();
  row.true_value = true_value;
  row.mean_estimate = std::accumulate(estimates.begin(), estimates.end(), 0.0) / r;
  double squared_error = 0.0;
  for (const double v : estimates) squared_error += (v - true_value) * (v - true_value);
  row.mse = squared_error / r;
  row.bias_squared = (row.mean_estimate - true_value) * (row.mean_estimate - true_value);
  row.variance = estimator_sample_variance(estimates);
  return row;
}

LinearSoftmaxPolicy train_target_policy(const LoggedDataset& logged,
                                        const OptimizerConfig& config) {
  if (logged.empty()) throw ContractViolation("train_target_policy: empty dataset");
  if (config.epochs == 0) {
    return LinearSoftmaxPolicy(logged.num_actions(), logged.context_dim());
  }
  return train_mini_batch(logged, baseline::Zero{}, config).final_policy;
}

namespace {

// Substreams are keyed by the cell's (K, tau) values, so a cell's draws do
// not depend on which other cells are in the grid.
struct Cell {
  std::size_t k;
  double tau;
  std::uint64_t key;
};

struct PreparedCell {
  Environment env;
  LinearSoftmaxPolicy target;
  double true_value;
};

}  // namespace

std::vector<OpeResultRow> run_ope_experiment(const OpeExperimentConfig& config) {
  config.validate();
  std::vector<Cell> cells;
  for (std::size_t ki = 0; ki < config.action_space_sizes.size(); ++ki) {
    for (std::size_t ti = 0; ti < config.inverse_temperatures.size(); ++ti) {
      const std::size_t k = config.action_space_sizes[ki];
      const double tau = config.inverse_temperatures[ti];
      cells.push_back({k, tau, derive_seed(k, {std::bit_cast<std::uint64_t>(tau)})});
    }
  }

  // Per cell: environment (shared by all tau for the same K), target policy
  // and ground-truth value.
  std::vector<std::optional<PreparedCell>> prepared(cells.size());
  parallel_for(cells.size(), config.threads, [&](std::size_t c) {
    const Cell& cell = cells[c];
    EnvironmentConfig env_config;
    env_config.context_dim = config.context_dim;
    env_config.num_actions = cell.k;
    env_config.inverse_temperature = cell.tau;
    env_config.dataset_size = config.target_train_size;
    env_config.seed = derive_seed(config.seed, {cell.k});
    Environment env = generate_environment(env_config);

    Rng train_rng = make_rng(config.seed, Stream::kTargetTraining, cell.key);
    const LoggedDataset train =
        generate_logged_dataset(env, cell.tau, config.target_train_size, train_rng);
    OptimizerConfig opt = config.target_optimizer;
    opt.seed = derive_seed(config.seed, {cell.key, 0x7a});
    LinearSoftmaxPolicy target = train_target_policy(train, opt);

    Rng value_rng = make_rng(config.seed, Stream::kTrueValue, cell.key);
    const double truth = true_policy_value(env, target, config.true_value_contexts, value_rng);
    prepared[c] = PreparedCell{std::move(env), std::move(target), truth};
  });

  const std::size_t num_sizes = config.dataset_sizes.size();
  const std::size_t num_est = config.estimators.size();
  const std::size_t reps = config.replications;
  // estimates[((c * num_sizes + s) * reps + r) * num_est + e]
  std::vector<double> estimates(cells.size() * num_sizes * reps * num_est);
  std::vector<unsigned char> fallbacks(estimates.size(), 0);
  parallel_for(cells.size() * num_sizes * reps, config.threads, [&](std::size_t task) {
    const std::size_t r = task % reps;
    const std::size_t s = (task / reps) % num_sizes;
    const std::size_t c = task / (reps * num_sizes);
    const Cell& cell = cells[c];
    const PreparedCell& prep = *prepared[c];
    Rng rng = make_rng(config.seed, Stream::kReplication, cell.key,
                       config.dataset_sizes[s], r);
    const LoggedDataset data =
        generate_logged_dataset(prep.env, cell.tau, config.dataset_sizes[s], rng);
    for (std::size_t e = 0; e < num_est; ++e) {
      const std::size_t slot = task * num_est + e;
      try {
        const EstimateBreakdown est = estimate_value(data, prep.target, config.estimators[e]);
        estimates[slot] = est.value;
        fallbacks[slot] = est.baseline_fallback ? 1 : 0;
      } catch (const DegenerateSupport&) {
        // SNIPS with all-zero weights cannot happen for a softmax target;
        // record the IPS value (zero) rather than aborting the grid.
        estimates[slot] = 0.0;
        fallbacks[slot] = 1;
      }
    }
  });

  std::vector<OpeResultRow> rows;
  rows.reserve(cells.size() * num_sizes * num_est);
  std::vector<double> values(reps);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (std::size_t s = 0; s < num_sizes; ++s) {
      for (std::size_t e = 0; e < num_est; ++e) {
        std::size_t fallback_count = 0;
        for (std::size_t r = 0; r < reps; ++r) {
          const std::size_t slot = ((c * num_sizes + s) * reps + r) * num_est + e;
          values[r] = estimates[slot];
          fallback_count += fallbacks[slot];
        }
        OpeResultRow row = summarize_replications(values, prepared[c]->true_value);
        row.estimator = baseline_mode_name(config.estimators[e]);
        row.k_actions = cells[c].k;
        row.inv_temperature = cells[c].tau;
        row.n_logged = config.dataset_sizes[s];
        row.baseline_fallbacks = fallback_count;
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

double relative_absolute_error(double estimate, double reference_value) {
  if (reference_value == 0.0) {
    throw ContractViolation("relative_absolute_error: reference value is zero");
  }
  return std::abs(estimate - reference_value) / std::abs(reference_value);
}

std::vector<LoggedFileEstimate> evaluate_on_logged_data(
    const LoggedDataset& data, const LinearSoftmaxPolicy& policy,
    std::span<const BaselineMode> estimators, double reference_value) {
  std::vector<LoggedFileEstimate> out;
  out.reserve(estimators.size());
  for (const BaselineMode& mode : estimators) {
    const EstimateBreakdown est = estimate_value(data, policy, mode);
    out.push_back({baseline_mode_name(mode), est.value,
                   relative_absolute_error(est.value, reference_value),
                   est.baseline_fallback});
  }
  return out;
}

std::vector<LoggedFileEstimate> evaluate_on_logged_file(
    const std::filesystem::path& path, const LinearSoftmaxPolicy& policy,
    std::span<const BaselineMode> estimators, double reference_value) {
  const LoggedDataset data = read_dataset(path, policy.num_actions());
  if (data.context_dim() != policy.context_dim()) {
    throw ContractViolation("dataset has d=" + std::to_string(data.context_dim()) +
                            " but the policy expects d=" +
                            std::to_string(policy.context_dim()));
  }
  return evaluate_on_logged_data(data, policy, estimators, reference_value);
}

}  // namespace betaips
