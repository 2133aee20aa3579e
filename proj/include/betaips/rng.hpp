#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace betaips {

// Deterministic random source. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; the transforms to uniform, normal and
// categorical draws are implemented here so that results are bit-identical
// across standard library implementations.
//
// Independent substreams are derived from (seed, stream ids...) through a
// splitmix64 mixing chain, so replications can run in any order or thread.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  // Uniform integer on [0, n).
  std::size_t uniform_index(std::size_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  bool bernoulli(double p) { return uniform() < p; }
  // Draw an index proportionally to `probs` (assumed to sum to ~1).
  std::size_t categorical(std::span<const double> probs);

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = uniform_index(i);
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

// Child seed for the sub-experiment identified by `ids`.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> ids);

}  // namespace betaips
