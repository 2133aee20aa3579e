#include "betaips/rng.hpp"

#include <cmath>
#include <numbers>

namespace betaips {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed,
                          std::initializer_list<std::uint64_t> ids) {
  std::uint64_t state = splitmix64(seed ^ 0x5851f42d4c957f2dULL);
  for (const std::uint64_t id : ids) state = splitmix64(state ^ splitmix64(id));
  return state;
}

Rng::Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

Rng::Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream) {
  std::uint64_t state = splitmix64(seed);
  for (const std::uint64_t id : stream) {
    state = splitmix64(state ^ splitmix64(id + 0x632be59bd9b4e019ULL));
  }
  engine_.seed(state);
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t Rng::uniform_index(std::size_t n) {
  // Rejection sampling removes modulo bias.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return static_cast<std::size_t>(x % bound);
}

double Rng::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_normal_ = radius * std::sin(angle);
  has_cached_normal_ = true;
  return radius * std::cos(angle);
}

std::size_t Rng::categorical(std::span<const double> probs) {
  const double u = uniform();
  double cumulative = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cumulative += probs[i];
    if (u < cumulative) return i;
  }
  // Rounding left u above the total mass: return the last action with
  // nonzero probability.
  for (std::size_t i = probs.size(); i > 0; --i) {
    if (probs[i - 1] > 0.0) return i - 1;
  }
  return probs.size() - 1;
}

}  // namespace betaips
