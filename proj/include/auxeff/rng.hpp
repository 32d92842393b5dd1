#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace auxeff {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic RNG: the engine is std::mt19937_64 (bit-exact across platforms)
// and all variate transforms are implemented here rather than taken from
// std::*_distribution (whose algorithms are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Independent child stream r of a master seed; stable across runs.
  static std::uint64_t child_seed(std::uint64_t master, std::uint64_t r) {
    return splitmix64(splitmix64(master) ^ splitmix64(r + 0x632be59bd9b4e019ULL));
  }

  std::uint64_t next_u64() { return eng_(); }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform_pos() {
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return u;
  }

  int bernoulli(double p) { return uniform() < p ? 1 : 0; }

  // Box-Muller, second variate cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double r = std::sqrt(-2.0 * std::log(uniform_pos()));
    double th = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
  }

  double normal(double mu, double sd) { return mu + sd * normal(); }

  // Marsaglia-Tsang; boosted for shape < 1.
  double gamma(double shape, double scale) {
    if (shape < 1.0) {
      double u = uniform_pos();
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double z, v;
      do {
        z = normal();
        v = 1.0 + c * z;
      } while (v <= 0.0);
      v = v * v * v;
      double u = uniform_pos();
      if (std::log(u) < 0.5 * z * z + d - d * v + d * std::log(v)) return d * v * scale;
    }
  }

  double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

  // Uniform integer in [0, n).
  int below(int n) { return static_cast<int>(uniform() * n); }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace auxeff
