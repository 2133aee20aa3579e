#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "betaips/core.hpp"

namespace betaips {

// Reward models for doubly robust estimation.
struct ConstantReward {
  double value = 0.0;
};

// Per-action expected reward, ignoring the context.
struct TabularReward {
  Vector per_action;
};

using RewardModel = std::variant<ConstantReward, TabularReward>;

// r_hat(a, x) for every action a; throws ContractViolation when a tabular
// model does not cover all `num_actions` actions.
Vector predict_rewards(const RewardModel& model, ConstVectorRef context,
                       std::size_t num_actions);

// Per-action mean logged reward; actions never logged get the global mean.
TabularReward fit_tabular_reward(const LoggedDataset& data);

// How the baseline / control variate is chosen.
namespace baseline {
struct Zero {};                  // plain IPS
struct FixedLambda {             // BanditNet reward translation
  double lambda = 0.0;
};
struct GradOptimal {};           // minimises gradient variance, per batch
struct EstimatorOptimal {};      // minimises estimator variance
struct SelfNormalized {};        // SNIPS
struct DoublyRobust {            // DR; no model means "fit a tabular model
  std::optional<RewardModel> model;  // on the data being estimated"
};
}  // namespace baseline

using BaselineMode =
    std::variant<baseline::Zero, baseline::FixedLambda, baseline::GradOptimal,
                 baseline::EstimatorOptimal, baseline::SelfNormalized,
                 baseline::DoublyRobust>;

// Canonical names: ips, banditnet:<lambda>, beta_ips_grad, beta_ips, snips,
// dr, dr_const:<c>. "banditnet" without a value means lambda = 0 only when
// parsed with a default; see parse_baseline_mode.
std::string baseline_mode_name(const BaselineMode& mode);
// Throws ContractViolation for unknown names.
BaselineMode parse_baseline_mode(std::string_view name,
                                 double default_lambda = 0.0);

struct EstimateBreakdown {
  double value = 0.0;
  std::vector<double> weights;  // w_i = pi(a_i|x_i) / pi0(a_i|x_i)
  double normalizer = 0.0;      // S = mean of weights
  std::optional<double> beta_used;
  std::size_t sample_count = 0;
  // A closed-form baseline was degenerate and beta fell back to 0.
  bool baseline_fallback = false;
};

// n x K matrix of target-policy action probabilities for every logged row.
Matrix batch_action_probabilities(const LoggedDataset& data,
                                  const LinearSoftmaxPolicy& policy);

std::vector<double> importance_weights(const LoggedDataset& data,
                                       const LinearSoftmaxPolicy& policy);

// --- value estimators -------------------------------------------------------

EstimateBreakdown ips_value(const LoggedDataset& data,
                            const LinearSoftmaxPolicy& policy);
// Throws DegenerateSupport when every weight is zero.
EstimateBreakdown snips_value(const LoggedDataset& data,
                              const LinearSoftmaxPolicy& policy);
EstimateBreakdown dr_value(const LoggedDataset& data,
                           const LinearSoftmaxPolicy& policy,
                           const RewardModel& model);
// beta + mean_i w_i (r_i - beta); unbiased for every fixed beta.
EstimateBreakdown beta_ips_value(const LoggedDataset& data,
                                 const LinearSoftmaxPolicy& policy, double beta);
// BanditNet objective mean_i w_i (r_i - lambda). Not a value estimate for
// lambda != 0; used for training and the gradient equivalence checks.
double lambda_ips_objective(const LoggedDataset& data,
                            const LinearSoftmaxPolicy& policy, double lambda);

// Dispatches on `mode`. Degenerate closed-form baselines fall back to
// beta = 0 with a warning and set `baseline_fallback`. FixedLambda reports the
// (unbiased) beta-IPS value at beta = lambda.
EstimateBreakdown estimate_value(const LoggedDataset& data,
                                 const LinearSoftmaxPolicy& policy,
                                 const BaselineMode& mode);

// --- closed-form baselines --------------------------------------------------

// sum_i weight_i r_i / sum_i weight_i. Throws DegenerateBaseline when the
// weights sum to zero.
double weighted_baseline(std::span<const double> weights,
                         std::span<const double> rewards);

// Plug-in estimate of the estimator-variance-optimal baseline,
// sum (w^2 - w) r / sum (w^2 - w). Biased for finite n, consistent.
// Throws DegenerateBaseline when |mean(w^2 - w)| < 1e-12.
double beta_estimator_optimal(std::span<const double> weights,
                              std::span<const double> rewards);
double beta_estimator_optimal(const LoggedDataset& data,
                              const LinearSoftmaxPolicy& policy);

// Gradient-variance-optimal baseline: weighted mean reward with weights
// g_i = ||grad pi(a_i|x_i)||^2 / pi0(a_i|x_i)^2.
std::vector<double> gradient_norm_weights(const LoggedDataset& batch,
                                          const LinearSoftmaxPolicy& policy);
double beta_grad_optimal(const LoggedDataset& batch,
                         const LinearSoftmaxPolicy& policy);

// On-policy optimal baseline with weights ||grad log pi(a_i|x_i)||^2. Only
// meaningful when `data` was sampled from `policy` itself.
double onpolicy_beta_optimal(const LoggedDataset& data,
                             const LinearSoftmaxPolicy& policy);

// Quadratics in beta minimised exactly by the closed forms above:
//   estimator: mean_i (w_i^2 - w_i)(r_i - beta)^2, which in expectation is
//              Var[w (r - beta)] minus a beta-free term;
//   gradient:  mean_i g_i (r_i - beta)^2, the second moment of the
//              per-sample gradient terms (their mean is beta-free).
double estimator_variance_objective(const LoggedDataset& data,
                                    const LinearSoftmaxPolicy& policy,
                                    double beta);
double gradient_variance_objective(const LoggedDataset& batch,
                                   const LinearSoftmaxPolicy& policy,
                                   double beta);

// --- gradient estimators ----------------------------------------------------

// (1/|B|) sum_i grad pi(a_i|x_i) / pi0_i * r_i.
GradientVector ips_gradient(const LoggedDataset& batch,
                            const LinearSoftmaxPolicy& policy);
// (1/|B|) sum_i grad pi(a_i|x_i) / pi0_i * (r_i - beta).
GradientVector beta_ips_gradient(const LoggedDataset& batch,
                                 const LinearSoftmaxPolicy& policy, double beta);
// Gradient of lambda_ips_objective, accumulated sample by sample from
// grad_prob (independent of the vectorised path used by beta_ips_gradient).
GradientVector lambda_ips_gradient(const LoggedDataset& batch,
                                   const LinearSoftmaxPolicy& policy,
                                   double lambda);
// Full gradient of dr_value, including the direct-method term
// sum_a' grad pi(a'|x) r_hat(a', x).
GradientVector dr_gradient(const LoggedDataset& batch,
                           const LinearSoftmaxPolicy& policy,
                           const RewardModel& model);
// Gradient of snips_value over the whole dataset (does not decompose over
// mini-batches). Throws DegenerateSupport when every weight is zero.
GradientVector snips_gradient(const LoggedDataset& data,
                              const LinearSoftmaxPolicy& policy);

// Sum over the K*d components of the unbiased sample variance (n - 1
// divisor) of t_i = grad pi(a_i|x_i) / pi0_i * (r_i - beta). Needs n >= 2.
double gradient_sample_variance(const LoggedDataset& batch,
                                const LinearSoftmaxPolicy& policy, double beta);

// Unbiased sample variance across replications. Needs >= 2 values.
double estimator_sample_variance(std::span<const double> values);

}  // namespace betaips
