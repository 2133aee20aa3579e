#include "betaips/estimators.hpp"

#include <charconv>
#include <cmath>
#include <numeric>
#include <string>

#include "betaips/errors.hpp"
#include "betaips/log.hpp"

namespace betaips {
namespace {

void require_nonempty(const LoggedDataset& data, const char* op) {
  if (data.empty()) throw ContractViolation(std::string(op) + ": empty dataset");
}

void require_shape(const LoggedDataset& data, const LinearSoftmaxPolicy& policy) {
  if (data.num_actions() != policy.num_actions() ||
      data.context_dim() != policy.context_dim()) {
    throw ContractViolation("policy shape (" + std::to_string(policy.num_actions()) +
                            " x " + std::to_string(policy.context_dim()) +
                            ") does not match dataset (K=" +
                            std::to_string(data.num_actions()) +
                            ", d=" + std::to_string(data.context_dim()) + ")");
  }
}

void require_finite(double value, const char* what) {
  if (!std::isfinite(value)) {
    throw ContractViolation(std::string(what) + " must be finite");
  }
}

// Rows v_i = pi(a_i|x_i) (e_{a_i} - p_i), so that grad pi(a_i|x_i) = v_i x_i^T.
Matrix prob_jacobian_rows(const LoggedDataset& data, const Matrix& probs) {
  Matrix v = probs;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const auto a = static_cast<Eigen::Index>(data.action(i));
    const double pa = probs(row, a);
    v.row(row) *= -pa;
    v(row, a) += pa;
  }
  return v;
}

// sum_i coeff_i grad pi(a_i|x_i).
GradientVector accumulate_prob_gradient(const LoggedDataset& data,
                                        const Matrix& jacobian_rows,
                                        const Vector& coeff) {
  const Matrix scaled = jacobian_rows.array().colwise() * coeff.array();
  return scaled.transpose() * data.contexts();
}

double mean(std::span<const double> values) {
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

EstimateBreakdown make_breakdown(std::vector<double> weights, double value) {
  EstimateBreakdown out;
  out.sample_count = weights.size();
  out.normalizer = mean(weights);
  out.weights = std::move(weights);
  out.value = value;
  return out;
}

std::string format_double(double value) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, end);
}

double parse_double(std::string_view text, std::string_view full) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
    throw ContractViolation("invalid numeric parameter in estimator name '" +
                            std::string(full) + "'");
  }
  return value;
}

}  // namespace

Vector predict_rewards(const RewardModel& model, ConstVectorRef /*context*/,
                       std::size_t num_actions) {
  const auto k = static_cast<Eigen::Index>(num_actions);
  if (const auto* c = std::get_if<ConstantReward>(&model)) {
    return Vector::Constant(k, c->value);
  }
  const auto& table = std::get<TabularReward>(model);
  if (table.per_action.size() != k) {
    throw ContractViolation("tabular reward model covers " +
                            std::to_string(table.per_action.size()) +
                            " actions, expected " + std::to_string(num_actions));
  }
  return table.per_action;
}

TabularReward fit_tabular_reward(const LoggedDataset& data) {
  require_nonempty(data, "fit_tabular_reward");
  const auto k = static_cast<Eigen::Index>(data.num_actions());
  Vector sums = Vector::Zero(k);
  Vector counts = Vector::Zero(k);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto a = static_cast<Eigen::Index>(data.action(i));
    sums[a] += data.reward(i);
    counts[a] += 1.0;
  }
  const double global = data.mean_reward();
  Vector table(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    table[a] = counts[a] > 0.0 ? sums[a] / counts[a] : global;
  }
  return {std::move(table)};
}

std::string baseline_mode_name(const BaselineMode& mode) {
  return std::visit(
      [](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, baseline::Zero>) {
          return "ips";
        } else if constexpr (std::is_same_v<T, baseline::FixedLambda>) {
          return "banditnet:" + format_double(m.lambda);
        } else if constexpr (std::is_same_v<T, baseline::GradOptimal>) {
          return "beta_ips_grad";
        } else if constexpr (std::is_same_v<T, baseline::EstimatorOptimal>) {
          return "beta_ips";
        } else if constexpr (std::is_same_v<T, baseline::SelfNormalized>) {
          return "snips";
        } else {
          if (m.model) {
            if (const auto* c = std::get_if<ConstantReward>(&*m.model)) {
              return "dr_const:" + format_double(c->value);
            }
            return "dr_tabular";
          }
          return "dr";
        }
      },
      mode);
}

BaselineMode parse_baseline_mode(std::string_view name, double default_lambda) {
  const auto colon = name.find(':');
  const std::string_view head = name.substr(0, colon);
  const bool has_arg = colon != std::string_view::npos;
  const auto arg = [&] { return parse_double(name.substr(colon + 1), name); };
  if (head == "ips" && !has_arg) return baseline::Zero{};
  if (head == "snips" && !has_arg) return baseline::SelfNormalized{};
  if (head == "beta_ips" && !has_arg) return baseline::EstimatorOptimal{};
  if (head == "beta_ips_grad" && !has_arg) return baseline::GradOptimal{};
  if (head == "dr" && !has_arg) return baseline::DoublyRobust{};
  if (head == "dr_const") {
    return baseline::DoublyRobust{ConstantReward{has_arg ? arg() : 0.0}};
  }
  if (head == "banditnet" || head == "lambda") {
    return baseline::FixedLambda{has_arg ? arg() : default_lambda};
  }
  throw ContractViolation(
      "unknown estimator '" + std::string(name) +
      "' (expected ips, snips, dr, dr_const:<c>, beta_ips, beta_ips_grad or "
      "banditnet:<lambda>)");
}

Matrix batch_action_probabilities(const LoggedDataset& data,
                                  const LinearSoftmaxPolicy& policy) {
  require_shape(data, policy);
  Matrix logits = data.contexts() * policy.weights().transpose();
  const Vector row_max = logits.rowwise().maxCoeff();
  logits.colwise() -= row_max;
  Matrix probs = logits.array().exp().matrix();
  const Vector norm = probs.rowwise().sum();
  probs.array().colwise() /= norm.array();
  return probs;
}

std::vector<double> importance_weights(const LoggedDataset& data,
                                       const LinearSoftmaxPolicy& policy) {
  const Matrix probs = batch_action_probabilities(data, policy);
  std::vector<double> w(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    w[i] = probs(static_cast<Eigen::Index>(i),
                 static_cast<Eigen::Index>(data.action(i))) /
           data.propensity(i);
  }
  return w;
}

EstimateBreakdown ips_value(const LoggedDataset& data,
                            const LinearSoftmaxPolicy& policy) {
  require_nonempty(data, "ips_value");
  std::vector<double> w = importance_weights(data, policy);
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) total += w[i] * data.reward(i);
  return make_breakdown(std::move(w), total / static_cast<double>(data.size()));
}

EstimateBreakdown snips_value(const LoggedDataset& data,
                              const LinearSoftmaxPolicy& policy) {
  require_nonempty(data, "snips_value");
  std::vector<double> w = importance_weights(data, policy);
  double weighted = 0.0;
  double total_weight = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    weighted += w[i] * data.reward(i);
    total_weight += w[i];
  }
  if (!(total_weight > 0.0)) {
    throw DegenerateSupport("snips_value: all importance weights are zero");
  }
  return make_breakdown(std::move(w), weighted / total_weight);
}

EstimateBreakdown dr_value(const LoggedDataset& data,
                           const LinearSoftmaxPolicy& policy,
                           const RewardModel& model) {
  require_nonempty(data, "dr_value");
  const Matrix probs = batch_action_probabilities(data, policy);
  std::vector<double> w(data.size());
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const auto a = static_cast<Eigen::Index>(data.action(i));
    const Vector r_hat = predict_rewards(model, data.context(i), data.num_actions());
    w[i] = probs(row, a) / data.propensity(i);
    total += w[i] * (data.reward(i) - r_hat[a]) + probs.row(row).dot(r_hat);
  }
  return make_breakdown(std::move(w), total / static_cast<double>(data.size()));
}

EstimateBreakdown beta_ips_value(const LoggedDataset& data,
                                 const LinearSoftmaxPolicy& policy, double beta) {
  require_nonempty(data, "beta_ips_value");
  require_finite(beta, "beta");
  std::vector<double> w = importance_weights(data, policy);
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) total += w[i] * (data.reward(i) - beta);
  EstimateBreakdown out =
      make_breakdown(std::move(w), beta + total / static_cast<double>(data.size()));
  out.beta_used = beta;
  return out;
}

double lambda_ips_objective(const LoggedDataset& data,
                            const LinearSoftmaxPolicy& policy, double lambda) {
  require_nonempty(data, "lambda_ips_objective");
  require_finite(lambda, "lambda");
  const std::vector<double> w = importance_weights(data, policy);
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) total += w[i] * (data.reward(i) - lambda);
  return total / static_cast<double>(data.size());
}

namespace {

// beta-IPS at a closed-form baseline, falling back to beta = 0.
template <typename Solver>
EstimateBreakdown beta_ips_with_solver(const LoggedDataset& data,
                                       const LinearSoftmaxPolicy& policy,
                                       Solver&& solver, const char* name) {
  try {
    return beta_ips_value(data, policy, solver());
  } catch (const DegenerateBaseline& e) {
    warn(std::string(name) + ": " + e.what() + "; falling back to beta = 0");
    EstimateBreakdown out = beta_ips_value(data, policy, 0.0);
    out.baseline_fallback = true;
    return out;
  }
}

}  // namespace

EstimateBreakdown estimate_value(const LoggedDataset& data,
                                 const LinearSoftmaxPolicy& policy,
                                 const BaselineMode& mode) {
  return std::visit(
      [&](const auto& m) -> EstimateBreakdown {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, baseline::Zero>) {
          return ips_value(data, policy);
        } else if constexpr (std::is_same_v<T, baseline::FixedLambda>) {
          return beta_ips_value(data, policy, m.lambda);
        } else if constexpr (std::is_same_v<T, baseline::GradOptimal>) {
          return beta_ips_with_solver(
              data, policy, [&] { return beta_grad_optimal(data, policy); },
              "beta_grad_optimal");
        } else if constexpr (std::is_same_v<T, baseline::EstimatorOptimal>) {
          const std::vector<double> w = importance_weights(data, policy);
          return beta_ips_with_solver(
              data, policy,
              [&] { return beta_estimator_optimal(w, data.rewards()); },
              "beta_estimator_optimal");
        } else if constexpr (std::is_same_v<T, baseline::SelfNormalized>) {
          return snips_value(data, policy);
        } else {
          if (m.model) return dr_value(data, policy, *m.model);
          return dr_value(data, policy, fit_tabular_reward(data));
        }
      },
      mode);
}

double weighted_baseline(std::span<const double> weights,
                         std::span<const double> rewards) {
  if (weights.size() != rewards.size() || weights.empty()) {
    throw ContractViolation("weighted_baseline: size mismatch or empty input");
  }
  double numerator = 0.0;
  double denominator = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    numerator += weights[i] * rewards[i];
    denominator += weights[i];
  }
  if (!(std::abs(denominator) > 0.0)) {
    throw DegenerateBaseline("baseline weights sum to zero");
  }
  return numerator / denominator;
}

double beta_estimator_optimal(std::span<const double> weights,
                              std::span<const double> rewards) {
  if (weights.size() != rewards.size() || weights.empty()) {
    throw ContractViolation("beta_estimator_optimal: size mismatch or empty input");
  }
  double numerator = 0.0;
  double denominator = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double c = weights[i] * weights[i] - weights[i];
    numerator += c * rewards[i];
    denominator += c;
  }
  const double n = static_cast<double>(weights.size());
  if (std::abs(denominator / n) < 1e-12) {
    throw DegenerateBaseline("mean(w^2 - w) is below 1e-12 in magnitude");
  }
  return numerator / denominator;
}

double beta_estimator_optimal(const LoggedDataset& data,
                              const LinearSoftmaxPolicy& policy) {
  require_nonempty(data, "beta_estimator_optimal");
  return beta_estimator_optimal(importance_weights(data, policy), data.rewards());
}

std::vector<double> gradient_norm_weights(const LoggedDataset& batch,
                                          const LinearSoftmaxPolicy& policy) {
  const Matrix probs = batch_action_probabilities(batch, policy);
  const Matrix v = prob_jacobian_rows(batch, probs);
  std::vector<double> g(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double p0 = batch.propensity(i);
    // ||v x^T||_F^2 = ||v||^2 ||x||^2
    g[i] = v.row(static_cast<Eigen::Index>(i)).squaredNorm() *
           batch.context(i).squaredNorm() / (p0 * p0);
  }
  return g;
}

double beta_grad_optimal(const LoggedDataset& batch,
                         const LinearSoftmaxPolicy& policy) {
  require_nonempty(batch, "beta_grad_optimal");
  const std::vector<double> g = gradient_norm_weights(batch, policy);
  try {
    return weighted_baseline(g, batch.rewards());
  } catch (const DegenerateBaseline&) {
    throw DegenerateBaseline("every ||grad pi||^2 / pi0^2 is zero");
  }
}

double onpolicy_beta_optimal(const LoggedDataset& data,
                             const LinearSoftmaxPolicy& policy) {
  require_nonempty(data, "onpolicy_beta_optimal");
  const Matrix probs = batch_action_probabilities(data, policy);
  std::vector<double> norms(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    Vector score = -probs.row(static_cast<Eigen::Index>(i)).transpose();
    score[static_cast<Eigen::Index>(data.action(i))] += 1.0;
    norms[i] = score.squaredNorm() * data.context(i).squaredNorm();
  }
  try {
    return weighted_baseline(norms, data.rewards());
  } catch (const DegenerateBaseline&) {
    throw DegenerateBaseline("every ||grad log pi||^2 is zero");
  }
}

double estimator_variance_objective(const LoggedDataset& data,
                                    const LinearSoftmaxPolicy& policy,
                                    double beta) {
  require_nonempty(data, "estimator_variance_objective");
  const std::vector<double> w = importance_weights(data, policy);
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double residual = data.reward(i) - beta;
    total += (w[i] * w[i] - w[i]) * residual * residual;
  }
  return total / static_cast<double>(w.size());
}

double gradient_variance_objective(const LoggedDataset& batch,
                                   const LinearSoftmaxPolicy& policy,
                                   double beta) {
  require_nonempty(batch, "gradient_variance_objective");
  const std::vector<double> g = gradient_norm_weights(batch, policy);
  double total = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double residual = batch.reward(i) - beta;
    total += g[i] * residual * residual;
  }
  return total / static_cast<double>(g.size());
}

GradientVector ips_gradient(const LoggedDataset& batch,
                            const LinearSoftmaxPolicy& policy) {
  return beta_ips_gradient(batch, policy, 0.0);
}

GradientVector beta_ips_gradient(const LoggedDataset& batch,
                                 const LinearSoftmaxPolicy& policy, double beta) {
  require_nonempty(batch, "beta_ips_gradient");
  require_finite(beta, "beta");
  const Matrix probs = batch_action_probabilities(batch, policy);
  const Matrix v = prob_jacobian_rows(batch, probs);
  const double n = static_cast<double>(batch.size());
  Vector coeff(static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    coeff[static_cast<Eigen::Index>(i)] =
        (batch.reward(i) - beta) / (batch.propensity(i) * n);
  }
  return accumulate_prob_gradient(batch, v, coeff);
}

GradientVector lambda_ips_gradient(const LoggedDataset& batch,
                                   const LinearSoftmaxPolicy& policy,
                                   double lambda) {
  require_nonempty(batch, "lambda_ips_gradient");
  require_finite(lambda, "lambda");
  GradientVector total = GradientVector::Zero(policy.weights().rows(),
                                              policy.weights().cols());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    total += grad_prob(policy, batch.context(i), batch.action(i)) *
             ((batch.reward(i) - lambda) / batch.propensity(i));
  }
  return total / static_cast<double>(batch.size());
}

GradientVector dr_gradient(const LoggedDataset& batch,
                           const LinearSoftmaxPolicy& policy,
                           const RewardModel& model) {
  require_nonempty(batch, "dr_gradient");
  require_shape(batch, policy);
  GradientVector total = GradientVector::Zero(policy.weights().rows(),
                                              policy.weights().cols());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto x = batch.context(i);
    const Vector probs = action_probabilities(policy, x);
    const Vector r_hat = predict_rewards(model, x, batch.num_actions());
    const auto a = static_cast<Eigen::Index>(batch.action(i));
    // Importance-weighted residual term.
    total += grad_prob(policy, x, batch.action(i)) *
             ((batch.reward(i) - r_hat[a]) / batch.propensity(i));
    // Direct-method term: d/dtheta sum_a' pi(a'|x) r_hat(a') has rows
    // pi_b (r_hat_b - pi . r_hat) x^T.
    const Vector direct =
        probs.cwiseProduct(r_hat.array().matrix() -
                           Vector::Constant(r_hat.size(), probs.dot(r_hat)));
    total += direct * x.transpose();
  }
  return total / static_cast<double>(batch.size());
}

GradientVector snips_gradient(const LoggedDataset& data,
                              const LinearSoftmaxPolicy& policy) {
  require_nonempty(data, "snips_gradient");
  const Matrix probs = batch_action_probabilities(data, policy);
  const Matrix v = prob_jacobian_rows(data, probs);
  double total_weight = 0.0;
  double weighted_reward = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double w = probs(static_cast<Eigen::Index>(i),
                           static_cast<Eigen::Index>(data.action(i))) /
                     data.propensity(i);
    total_weight += w;
    weighted_reward += w * data.reward(i);
  }
  if (!(total_weight > 0.0)) {
    throw DegenerateSupport("snips_gradient: all importance weights are zero");
  }
  // [(sum grad_w r)(sum w) - (sum w r)(sum grad_w)] / (sum w)^2, written as
  // sum grad_w (r - V_snips) / sum w so a reward translation cancels exactly
  // in the centred residuals.
  const double snips = weighted_reward / total_weight;
  Vector coeff(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    coeff[static_cast<Eigen::Index>(i)] =
        (data.reward(i) - snips) / (data.propensity(i) * total_weight);
  }
  return accumulate_prob_gradient(data, v, coeff);
}

double gradient_sample_variance(const LoggedDataset& batch,
                                const LinearSoftmaxPolicy& policy, double beta) {
  if (batch.size() < 2) {
    throw ContractViolation("gradient_sample_variance needs a batch of at least 2");
  }
  require_finite(beta, "beta");
  const Matrix probs = batch_action_probabilities(batch, policy);
  const Matrix v = prob_jacobian_rows(batch, probs);
  const auto n = static_cast<double>(batch.size());
  Vector coeff(static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    coeff[static_cast<Eigen::Index>(i)] =
        (batch.reward(i) - beta) / batch.propensity(i);
  }
  const GradientVector mean_term = accumulate_prob_gradient(batch, v, coeff) / n;
  double squared_deviation = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const GradientVector t =
        coeff[row] * v.row(row).transpose() * batch.context(i).transpose();
    squared_deviation += (t - mean_term).squaredNorm();
  }
  return squared_deviation / (n - 1.0);
}

double estimator_sample_variance(std::span<const double> values) {
  if (values.size() < 2) {
    throw ContractViolation("estimator_sample_variance needs at least 2 values");
  }
  const double m = mean(values);
  double total = 0.0;
  for (const double v : values) total += (v - m) * (v - m);
  return total / static_cast<double>(values.size() - 1);
}

}  // namespace betaips
