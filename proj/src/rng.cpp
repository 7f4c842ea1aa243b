#include "aerotrack/rng.hpp"

#include <cmath>

#include "aerotrack/errors.hpp"

namespace aerotrack {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

// FNV-1a, for label-derived sub-streams
std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace

std::uint64_t Rng::next_u64() {
  ++counter_;
  return mix64(seed_ + counter_ * kGolden);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log1p(-u1));
  const double a = 2.0 * M_PI * u2;
  cached_normal_ = r * std::sin(a);
  has_cached_normal_ = true;
  return r * std::cos(a);
}

double Rng::normal(double mean, double sigma) { return mean + sigma * normal(); }

int Rng::poisson(double lambda) {
  if (lambda < 0.0) throw NumericError("poisson: negative lambda");
  if (lambda == 0.0) return 0;
  const double limit = std::exp(-lambda);
  int k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= uniform();
  } while (p > limit);
  return k - 1;
}

std::uint64_t Rng::next_below(std::uint64_t n) {
  if (n == 0) throw NumericError("next_below: n must be positive");
  // modulo bias is negligible for the small n used here, but reject anyway
  const std::uint64_t bound = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= bound);
  return v % n;
}

std::uint64_t Rng::derive_seed(std::uint64_t root, std::string_view label) {
  return mix64(root ^ fnv1a(label));
}

std::uint64_t Rng::derive_seed(std::uint64_t root, std::uint64_t index) {
  return mix64(root ^ mix64(index + kGolden));
}

}  // namespace aerotrack
