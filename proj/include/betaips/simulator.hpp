#pragma once

#include <cstddef>
#include <cstdint>

#include "betaips/core.hpp"
#include "betaips/rng.hpp"

namespace betaips {

struct EnvironmentConfig {
  std::size_t context_dim = 5;
  std::size_t num_actions = 10;
  // Logging logits are inverse_temperature * q(x, a); negative values make
  // the logger prefer the worst actions.
  double inverse_temperature = 1.0;
  std::size_t dataset_size = 10000;
  std::uint64_t seed = 0;

  void validate() const;
};

// Synthetic contextual bandit with expected reward
// q(x, a) = logistic(phi_a . x + b_a); contexts are standard normal.
class Environment {
 public:
  Environment(Matrix action_embeddings, Vector action_biases);

  const Matrix& action_embeddings() const { return embeddings_; }
  const Vector& action_biases() const { return biases_; }
  std::size_t num_actions() const { return static_cast<std::size_t>(embeddings_.rows()); }
  std::size_t context_dim() const { return static_cast<std::size_t>(embeddings_.cols()); }

  double expected_reward(ConstVectorRef context, std::size_t action) const;
  Vector expected_rewards(ConstVectorRef context) const;

 private:
  Matrix embeddings_;
  Vector biases_;
};

// Substream ids used with Rng(seed, {stream, ...}).
enum class Stream : std::uint64_t {
  kEnvironment = 1,
  kLoggedData = 2,
  kTestContexts = 3,
  kTrueValue = 4,
  kShuffle = 5,
  kTargetTraining = 6,
  kReplication = 7,
};

inline Rng make_rng(std::uint64_t seed, Stream stream,
                    std::uint64_t a = 0, std::uint64_t b = 0,
                    std::uint64_t c = 0) {
  return Rng(seed, {static_cast<std::uint64_t>(stream), a, b, c});
}

// phi ~ N(0, 1/sqrt(d)) (std. dev.), b ~ N(0, 0.5), drawn from the seed.
Environment generate_environment(const EnvironmentConfig& config);

Vector draw_context(std::size_t context_dim, Rng& rng);

// softmax_a(tau * q(x, a)).
Vector logging_policy_probs(const Environment& env, ConstVectorRef context,
                            double inverse_temperature);

LoggedDataset generate_logged_dataset(const Environment& env,
                                      double inverse_temperature,
                                      std::size_t size, Rng& rng);
// Uses the config's seed, size and temperature.
LoggedDataset generate_logged_dataset(const Environment& env,
                                      const EnvironmentConfig& config);

// Monte-Carlo over fresh contexts with an exact sum over actions.
double true_policy_value(const Environment& env,
                         const LinearSoftmaxPolicy& policy,
                         std::size_t num_contexts, Rng& rng);

// Held-out full-information test set: pre-drawn contexts with their expected
// reward vectors. Evaluates mean_x sum_a pi(a|x) q(x, a).
class PolicyValueOracle {
 public:
  PolicyValueOracle(const Environment& env, std::size_t num_contexts, Rng& rng);

  double operator()(const LinearSoftmaxPolicy& policy) const;
  std::size_t size() const { return static_cast<std::size_t>(contexts_.rows()); }

 private:
  Matrix contexts_;          // n x d
  Matrix expected_rewards_;  // n x K
};

}  // namespace betaips
