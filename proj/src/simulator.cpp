#include "betaips/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "betaips/errors.hpp"

namespace betaips {
namespace {

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

void EnvironmentConfig::validate() const {
  if (context_dim < 1) throw ContractViolation("context_dim must be >= 1");
  if (num_actions < 2) throw ContractViolation("num_actions must be >= 2");
  if (dataset_size < 1) throw ContractViolation("dataset_size must be >= 1");
  if (!std::isfinite(inverse_temperature)) {
    throw ContractViolation("inverse_temperature must be finite");
  }
}

Environment::Environment(Matrix action_embeddings, Vector action_biases)
    : embeddings_(std::move(action_embeddings)), biases_(std::move(action_biases)) {
  if (embeddings_.rows() != biases_.size()) {
    throw ContractViolation("embeddings and biases disagree on K");
  }
}

double Environment::expected_reward(ConstVectorRef context,
                                    std::size_t action) const {
  const auto a = static_cast<Eigen::Index>(action);
  return logistic(embeddings_.row(a).dot(context) + biases_[a]);
}

Vector Environment::expected_rewards(ConstVectorRef context) const {
  Vector z = embeddings_ * context + biases_;
  return z.unaryExpr([](double v) { return logistic(v); });
}

Environment generate_environment(const EnvironmentConfig& config) {
  config.validate();
  Rng rng = make_rng(config.seed, Stream::kEnvironment);
  const auto k = static_cast<Eigen::Index>(config.num_actions);
  const auto d = static_cast<Eigen::Index>(config.context_dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.context_dim));
  Matrix phi(k, d);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index j = 0; j < d; ++j) phi(a, j) = rng.normal(0.0, scale);
  }
  Vector b(k);
  for (Eigen::Index a = 0; a < k; ++a) b[a] = rng.normal(0.0, 0.5);
  return Environment(std::move(phi), std::move(b));
}

Vector draw_context(std::size_t context_dim, Rng& rng) {
  Vector x(static_cast<Eigen::Index>(context_dim));
  for (Eigen::Index j = 0; j < x.size(); ++j) x[j] = rng.normal();
  return x;
}

Vector logging_policy_probs(const Environment& env, ConstVectorRef context,
                            double inverse_temperature) {
  if (!std::isfinite(inverse_temperature)) {
    throw ContractViolation("inverse_temperature must be finite");
  }
  return softmax(inverse_temperature * env.expected_rewards(context));
}

LoggedDataset generate_logged_dataset(const Environment& env,
                                      double inverse_temperature,
                                      std::size_t size, Rng& rng) {
  LoggedDataset data(env.context_dim(), env.num_actions());
  data.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    const Vector x = draw_context(env.context_dim(), rng);
    const Vector q = env.expected_rewards(x);
    const Vector probs = softmax(inverse_temperature * q);
    const std::size_t a =
        rng.categorical({probs.data(), static_cast<std::size_t>(probs.size())});
    const auto ai = static_cast<Eigen::Index>(a);
    const double r = rng.bernoulli(q[ai]) ? 1.0 : 0.0;
    data.add(x, a, r, probs[ai]);
  }
  return data;
}

LoggedDataset generate_logged_dataset(const Environment& env,
                                      const EnvironmentConfig& config) {
  config.validate();
  Rng rng = make_rng(config.seed, Stream::kLoggedData);
  return generate_logged_dataset(env, config.inverse_temperature,
                                 config.dataset_size, rng);
}

double true_policy_value(const Environment& env,
                         const LinearSoftmaxPolicy& policy,
                         std::size_t num_contexts, Rng& rng) {
  if (num_contexts < 1) throw ContractViolation("num_contexts must be >= 1");
  if (policy.num_actions() != env.num_actions() ||
      policy.context_dim() != env.context_dim()) {
    throw ContractViolation("policy shape does not match environment");
  }
  // Contexts are drawn in order and evaluated in chunks of matrix products.
  constexpr std::size_t kChunk = 4096;
  double total = 0.0;
  for (std::size_t begin = 0; begin < num_contexts; begin += kChunk) {
    const std::size_t count = std::min(kChunk, num_contexts - begin);
    PolicyValueOracle chunk(env, count, rng);
    total += chunk(policy) * static_cast<double>(count);
  }
  return total / static_cast<double>(num_contexts);
}

PolicyValueOracle::PolicyValueOracle(const Environment& env,
                                     std::size_t num_contexts, Rng& rng) {
  if (num_contexts < 1) throw ContractViolation("num_contexts must be >= 1");
  const auto n = static_cast<Eigen::Index>(num_contexts);
  contexts_.resize(n, static_cast<Eigen::Index>(env.context_dim()));
  expected_rewards_.resize(n, static_cast<Eigen::Index>(env.num_actions()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector x = draw_context(env.context_dim(), rng);
    contexts_.row(i) = x.transpose();
    expected_rewards_.row(i) = env.expected_rewards(x).transpose();
  }
}

double PolicyValueOracle::operator()(const LinearSoftmaxPolicy& policy) const {
  if (policy.num_actions() != static_cast<std::size_t>(expected_rewards_.cols()) ||
      policy.context_dim() != static_cast<std::size_t>(contexts_.cols())) {
    throw ContractViolation("policy shape does not match oracle");
  }
  // Row-wise softmax of the n x K logit matrix.
  Matrix logits = contexts_ * policy.weights().transpose();
  const Vector row_max = logits.rowwise().maxCoeff();
  logits.colwise() -= row_max;
  logits = logits.array().exp().matrix();
  const Vector norm = logits.rowwise().sum();
  const Vector weighted = logits.cwiseProduct(expected_rewards_).rowwise().sum();
  return weighted.cwiseQuotient(norm).mean();
}

}  // namespace betaips
