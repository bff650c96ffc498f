#pragma once

#include <cstdint>
#include <cmath>
#include <cstddef>
#include <vector>

namespace pstrat {

// Counter-keyed generator: every logical stream (bootstrap replicate, MCMC
// chain, imputation, simulated subject) is opened as Rng(seed, stream) and
// evolves independently of any other stream. Results therefore do not depend
// on how streams are scheduled across worker threads.
class Rng {
public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    // SplitMix64 mixing of (seed, stream) into the initial state.
    state_ = mix(seed + 0x9e3779b97f4a7c15ULL * (stream + 1));
    state_ = mix(state_ ^ mix(stream + 0x7f4a7c159e3779b9ULL));
    spare_valid_ = false;
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // Uniform on [0,1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer draw on [0, n) via rejection of the biased tail.
  std::uint64_t uniform_int(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Marsaglia polar method with one cached spare.
  double normal() {
    if (spare_valid_) {
      spare_valid_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    spare_valid_ = true;
    return u * f;
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double exponential(double rate = 1.0) { return -std::log(1.0 - uniform()) / rate; }

  double gamma(double shape) {
    // Marsaglia-Tsang; shape >= 1 directly, boost for shape < 1.
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double chi_squared(double df) { return 2.0 * gamma(df / 2.0); }

  // Index from unnormalized non-negative weights.
  std::size_t categorical(const std::vector<double>& w) {
    double total = 0.0;
    for (double x : w) total += x;
    double u = uniform() * total;
    for (std::size_t k = 0; k + 1 < w.size(); ++k) {
      u -= w[k];
      if (u < 0.0) return k;
    }
    return w.empty() ? 0 : w.size() - 1;
  }

private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool spare_valid_;
};

} // namespace pstrat
