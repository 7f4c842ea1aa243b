#pragma once

#include <cstdint>
#include <string_view>

namespace aerotrack {

// Counter-based deterministic generator. Draw n is splitmix64's output
// function applied to seed + n*GOLDEN, so the stream depends only on
// (seed, counter) and is identical across platforms for the integer
// draws. See README for the exact algorithm.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64();

  // uniform in [0, 1), 53-bit resolution
  double uniform();
  double uniform(double lo, double hi);

  // Box-Muller; generates pairs, second value cached.
  double normal();
  double normal(double mean, double sigma);

  // Knuth inversion; intended for small lambda.
  int poisson(double lambda);

  // i in [0, n)
  std::uint64_t next_below(std::uint64_t n);

  std::uint64_t seed() const { return seed_; }

  // Stable sub-stream derivation: mixes a label hash into the seed.
  // All per-module / per-sequence randomness flows through this.
  static std::uint64_t derive_seed(std::uint64_t root, std::string_view label);
  static std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index);

private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace aerotrack
