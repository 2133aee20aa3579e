#include "betaips/core.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "betaips/errors.hpp"

namespace betaips {

LoggedDataset::LoggedDataset(std::size_t context_dim, std::size_t num_actions)
    : context_dim_(context_dim), num_actions_(num_actions) {
  if (context_dim == 0) throw ContractViolation("context_dim must be >= 1");
  if (num_actions == 0) throw ContractViolation("num_actions must be >= 1");
}

void LoggedDataset::add(const LoggedInteraction& interaction) {
  add(interaction.context, interaction.action, interaction.reward,
      interaction.propensity);
}

void LoggedDataset::add(ConstVectorRef context, std::size_t action,
                        double reward, double propensity) {
  if (static_cast<std::size_t>(context.size()) != context_dim_) {
    throw ContractViolation("context has dimension " +
                            std::to_string(context.size()) + ", expected " +
                            std::to_string(context_dim_));
  }
  if (action >= num_actions_) {
    throw ContractViolation("action " + std::to_string(action) +
                            " out of range for K=" + std::to_string(num_actions_));
  }
  if (!(propensity > 0.0) || propensity > 1.0) {
    throw ContractViolation("propensity must lie in (0, 1], got " +
                            std::to_string(propensity));
  }
  contexts_.insert(contexts_.end(), context.data(),
                   context.data() + context.size());
  actions_.push_back(action);
  rewards_.push_back(reward);
  propensities_.push_back(propensity);
}

void LoggedDataset::reserve(std::size_t n) {
  contexts_.reserve(n * context_dim_);
  actions_.reserve(n);
  rewards_.reserve(n);
  propensities_.reserve(n);
}

LoggedInteraction LoggedDataset::interaction(std::size_t i) const {
  return {Vector(context(i)), actions_[i], rewards_[i], propensities_[i]};
}

LoggedDataset LoggedDataset::subset(std::span<const std::size_t> rows) const {
  LoggedDataset out(context_dim_, num_actions_);
  out.reserve(rows.size());
  for (const std::size_t i : rows) {
    out.contexts_.insert(out.contexts_.end(),
                         contexts_.begin() + static_cast<std::ptrdiff_t>(i * context_dim_),
                         contexts_.begin() + static_cast<std::ptrdiff_t>((i + 1) * context_dim_));
    out.actions_.push_back(actions_[i]);
    out.rewards_.push_back(rewards_[i]);
    out.propensities_.push_back(propensities_[i]);
  }
  return out;
}

LoggedDataset LoggedDataset::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw ContractViolation("slice out of range");
  std::vector<std::size_t> rows(end - begin);
  std::iota(rows.begin(), rows.end(), begin);
  return subset(rows);
}

LoggedDataset LoggedDataset::with_reward_shift(double shift) const {
  LoggedDataset out = *this;
  for (double& r : out.rewards_) r += shift;
  return out;
}

double LoggedDataset::mean_reward() const {
  if (empty()) throw ContractViolation("mean_reward of empty dataset");
  return std::accumulate(rewards_.begin(), rewards_.end(), 0.0) /
         static_cast<double>(size());
}

LinearSoftmaxPolicy::LinearSoftmaxPolicy(std::size_t num_actions,
                                         std::size_t context_dim)
    : weights_(Matrix::Zero(static_cast<Eigen::Index>(num_actions),
                            static_cast<Eigen::Index>(context_dim))) {
  if (num_actions == 0 || context_dim == 0) {
    throw ContractViolation("policy shape must be at least 1 x 1");
  }
}

LinearSoftmaxPolicy::LinearSoftmaxPolicy(Matrix weights)
    : weights_(std::move(weights)) {
  if (weights_.rows() == 0 || weights_.cols() == 0) {
    throw ContractViolation("policy shape must be at least 1 x 1");
  }
}

void check_context(const LinearSoftmaxPolicy& policy, ConstVectorRef context) {
  if (static_cast<std::size_t>(context.size()) != policy.context_dim()) {
    throw ContractViolation("context has dimension " +
                            std::to_string(context.size()) +
                            ", policy expects " +
                            std::to_string(policy.context_dim()));
  }
}

Vector softmax(ConstVectorRef logits) {
  Vector out = (logits.array() - logits.maxCoeff()).exp();
  out /= out.sum();
  return out;
}

Vector action_probabilities(const LinearSoftmaxPolicy& policy,
                            ConstVectorRef context) {
  check_context(policy, context);
  return softmax(policy.weights() * context);
}

GradientVector grad_log_prob(const LinearSoftmaxPolicy& policy,
                             ConstVectorRef context, std::size_t action) {
  if (action >= policy.num_actions()) throw ContractViolation("action out of range");
  const Vector probs = action_probabilities(policy, context);
  if (probs[static_cast<Eigen::Index>(action)] < 1e-300) {
    throw NumericError("grad_log_prob: pi(a|x) underflowed below 1e-300");
  }
  Vector coeff = -probs;
  coeff[static_cast<Eigen::Index>(action)] += 1.0;
  return coeff * context.transpose();
}

GradientVector grad_prob(const LinearSoftmaxPolicy& policy,
                         ConstVectorRef context, std::size_t action) {
  if (action >= policy.num_actions()) throw ContractViolation("action out of range");
  const Vector probs = action_probabilities(policy, context);
  const double pa = probs[static_cast<Eigen::Index>(action)];
  Vector coeff = -pa * probs;
  coeff[static_cast<Eigen::Index>(action)] += pa;
  return coeff * context.transpose();
}

SampledAction sample_action(const LinearSoftmaxPolicy& policy,
                            ConstVectorRef context, Rng& rng) {
  const Vector probs = action_probabilities(policy, context);
  const std::size_t a = rng.categorical({probs.data(), static_cast<std::size_t>(probs.size())});
  return {a, probs[static_cast<Eigen::Index>(a)]};
}

}  // namespace betaips
