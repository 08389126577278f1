#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>

#include "synthgate/stats.hpp"

namespace synthgate {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

// All randomness flows from one master seed through named streams; the
// (label, index) pair identifies the consumer so reorderings elsewhere in
// the pipeline cannot shift anyone's draws.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                                 std::uint64_t index = 0) {
  std::uint64_t x = splitmix64(master ^ fnv1a64(label));
  return splitmix64(x ^ (index + 1));
}

// mt19937_64 engine (bit-exact per the standard) with hand-rolled variate
// transforms, so sequences do not depend on the standard library's
// distribution implementations.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}
  RngStream(std::uint64_t master, std::string_view label, std::uint64_t index = 0)
      : gen_(derive_seed(master, label, index)) {}

  std::uint64_t next_u64() { return gen_(); }

  // open interval (0,1); safe as input to inverse CDFs
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // inverse-CDF sampling: exactly one uniform consumed per normal draw
  double normal() { return normal_quantile(uniform01()); }
  double normal(double mu, double sd) { return mu + sd * normal(); }

  bool bernoulli(double p) { return uniform01() < p; }

  // unbiased integer in [0, n) by rejection
  std::uint64_t uniform_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_below: n == 0");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // Gamma(shape, rate) via Marsaglia-Tsang; shape < 1 boosted through
  // Gamma(shape+1) * U^(1/shape).
  double gamma(double shape, double rate) {
    if (shape <= 0 || rate <= 0) throw std::invalid_argument("gamma: non-positive parameter");
    if (shape < 1.0) {
      const double u = uniform01();
      return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0);
      v = v * v * v;
      const double u = uniform01();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace synthgate
