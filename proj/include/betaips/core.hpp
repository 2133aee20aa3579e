#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

#include "betaips/rng.hpp"

namespace betaips {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ConstVectorRef = Eigen::Ref<const Vector>;

// d/dtheta of a scalar objective, laid out like the policy weights (K x d).
using GradientVector = Eigen::MatrixXd;

struct LoggedInteraction {
  Vector context;
  std::size_t action = 0;
  double reward = 0.0;
  // Logging-policy probability of `action` given `context`.
  double propensity = 1.0;
};

// Bandit feedback logged under a behaviour policy. Contexts are stored
// contiguously, one row per interaction.
class LoggedDataset {
 public:
  LoggedDataset(std::size_t context_dim, std::size_t num_actions);

  // Throws ContractViolation on dimension mismatch, out-of-range action or
  // non-positive propensity.
  void add(const LoggedInteraction& interaction);
  void add(ConstVectorRef context, std::size_t action, double reward,
           double propensity);
  void reserve(std::size_t n);

  std::size_t size() const { return actions_.size(); }
  bool empty() const { return actions_.empty(); }
  std::size_t context_dim() const { return context_dim_; }
  std::size_t num_actions() const { return num_actions_; }

  Eigen::Map<const Vector> context(std::size_t i) const {
    return Eigen::Map<const Vector>(contexts_.data() + i * context_dim_,
                                    static_cast<Eigen::Index>(context_dim_));
  }
  std::size_t action(std::size_t i) const { return actions_[i]; }
  double reward(std::size_t i) const { return rewards_[i]; }
  double propensity(std::size_t i) const { return propensities_[i]; }
  LoggedInteraction interaction(std::size_t i) const;

  using RowMajorMatrix =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  // All contexts as an n x d matrix view.
  Eigen::Map<const RowMajorMatrix> contexts() const {
    return {contexts_.data(), static_cast<Eigen::Index>(size()),
            static_cast<Eigen::Index>(context_dim_)};
  }

  std::span<const std::size_t> actions() const { return actions_; }
  std::span<const double> rewards() const { return rewards_; }
  std::span<const double> propensities() const { return propensities_; }

  LoggedDataset subset(std::span<const std::size_t> rows) const;
  LoggedDataset slice(std::size_t begin, std::size_t end) const;
  // Copy with every reward translated by `shift`.
  LoggedDataset with_reward_shift(double shift) const;
  double mean_reward() const;

  friend bool operator==(const LoggedDataset&, const LoggedDataset&) = default;

 private:
  std::size_t context_dim_;
  std::size_t num_actions_;
  std::vector<double> contexts_;
  std::vector<std::size_t> actions_;
  std::vector<double> rewards_;
  std::vector<double> propensities_;
};

// Linear softmax policy without bias: pi(a|x) = softmax(W x)_a, W is K x d.
class LinearSoftmaxPolicy {
 public:
  // Zero weights, i.e. the uniform policy.
  LinearSoftmaxPolicy(std::size_t num_actions, std::size_t context_dim);
  explicit LinearSoftmaxPolicy(Matrix weights);

  const Matrix& weights() const { return weights_; }
  Matrix& weights() { return weights_; }
  std::size_t num_actions() const { return static_cast<std::size_t>(weights_.rows()); }
  std::size_t context_dim() const { return static_cast<std::size_t>(weights_.cols()); }

 private:
  Matrix weights_;
};

// Max-shifted softmax.
Vector softmax(ConstVectorRef logits);

Vector action_probabilities(const LinearSoftmaxPolicy& policy,
                            ConstVectorRef context);

// Gradient of pi(action|context) w.r.t. the weights. Row b equals
// pi(a|x) * (1[a == b] - pi(b|x)) * x^T.
GradientVector grad_prob(const LinearSoftmaxPolicy& policy,
                         ConstVectorRef context, std::size_t action);

// Gradient of log pi(action|context); row b equals (1[a == b] - pi(b|x)) x^T.
// Throws NumericError when pi(action|context) underflows below 1e-300.
GradientVector grad_log_prob(const LinearSoftmaxPolicy& policy,
                             ConstVectorRef context, std::size_t action);

struct SampledAction {
  std::size_t action;
  double propensity;
};

SampledAction sample_action(const LinearSoftmaxPolicy& policy,
                            ConstVectorRef context, Rng& rng);

// Throws ContractViolation if the context length differs from d.
void check_context(const LinearSoftmaxPolicy& policy, ConstVectorRef context);

}  // namespace betaips
