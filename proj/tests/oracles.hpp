// Independent reference computations shared by the unit and acceptance tests.
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <utility>

#include "betaips/core.hpp"
#include "betaips/rng.hpp"
#include "betaips/simulator.hpp"

namespace betaips::oracle {

// Central finite differences of f at every entry of `theta`.
inline Matrix finite_difference_gradient(
    const std::function<double(const LinearSoftmaxPolicy&)>& f,
    const Matrix& theta, double step = 1e-5) {
  Matrix grad(theta.rows(), theta.cols());
  for (Eigen::Index r = 0; r < theta.rows(); ++r) {
    for (Eigen::Index c = 0; c < theta.cols(); ++c) {
      Matrix plus = theta;
      Matrix minus = theta;
      plus(r, c) += step;
      minus(r, c) -= step;
      grad(r, c) = (f(LinearSoftmaxPolicy(plus)) - f(LinearSoftmaxPolicy(minus))) /
                   (2.0 * step);
    }
  }
  return grad;
}

struct GridMinimum {
  double argmin;
  double value;
};

// Brute-force minimum over lo, lo + step, ..., hi.
inline GridMinimum grid_minimum(const std::function<double(double)>& f, double lo,
                                double hi, double step) {
  const auto count = static_cast<std::size_t>(std::llround((hi - lo) / step));
  GridMinimum best{lo, f(lo)};
  for (std::size_t i = 1; i <= count; ++i) {
    const double x = lo + static_cast<double>(i) * step;
    const double v = f(x);
    if (v < best.value) best = {x, v};
  }
  return best;
}

// Textbook two-pass sample variance with the n - 1 divisor.
inline double two_pass_variance(std::span<const double> xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size() - 1);
}

inline Matrix random_weights(std::size_t k, std::size_t d, double scale, Rng& rng) {
  Matrix w(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = scale * rng.normal();
  }
  return w;
}

// A simulated logged dataset plus a random target policy.
struct Instance {
  Environment env;
  LoggedDataset data;
  LinearSoftmaxPolicy policy;
};

inline Instance random_instance(std::uint64_t seed, std::size_t k, std::size_t d,
                                std::size_t n, double tau = 1.0,
                                double policy_scale = 0.5) {
  EnvironmentConfig cfg;
  cfg.context_dim = d;
  cfg.num_actions = k;
  cfg.inverse_temperature = tau;
  cfg.dataset_size = n;
  cfg.seed = seed;
  Environment env = generate_environment(cfg);
  LoggedDataset data = generate_logged_dataset(env, cfg);
  Rng rng(seed, {99});
  LinearSoftmaxPolicy policy(random_weights(k, d, policy_scale, rng));
  return {std::move(env), std::move(data), std::move(policy)};
}

}  // namespace betaips::oracle
