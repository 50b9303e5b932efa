#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace hsim {

// Deterministic RNG with hand-rolled distributions. std:: distributions are
// implementation-defined, which would break cross-platform reproducibility of
// logs and reports, so we only rely on raw generator output here.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {
    // splitmix warmup so nearby seeds decorrelate
    next_u64();
    next_u64();
  }

  /// Derived, independent stream for a named purpose.
  Rng derive(const std::string& stream) const {
    uint64_t h = 1469598103934665603ull;
    for (char c : stream) {
      h ^= static_cast<uint64_t>(static_cast<unsigned char>(c));
      h *= 1099511628211ull;
    }
    return Rng(state_ ^ h ^ 0x9e3779b97f4a7c15ull);
  }

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  uint64_t uniform_int(uint64_t n) {
    // modulo rejection to avoid bias
    uint64_t threshold = (0ull - n) % n;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  /// Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 1e-300) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hsim
