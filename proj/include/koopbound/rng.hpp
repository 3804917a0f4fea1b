#pragma once

#include <cstdint>
#include <cmath>
#include <random>

namespace koopbound {

// Deterministic random source. All draws go through explicit conversions
// (no std::*_distribution, whose output is implementation-defined), so a
// fixed seed reproduces the same stream on any standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Independent stream for a (master seed, task index) pair. Streams for
  // distinct indices are decorrelated by a splitmix64 scramble.
  static Rng for_task(std::uint64_t master_seed, std::uint64_t task_index) {
    return Rng(scramble(master_seed + 0x9e3779b97f4a7c15ULL * (task_index + 1)));
  }

  std::uint64_t next_u64() { return gen_(); }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller; second value cached
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(6.283185307179586476925286766559 * u2);
    has_spare_ = true;
    return mag * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Rademacher sign
  int sign() { return (next_u64() & 1) ? 1 : -1; }

 private:
  static std::uint64_t scramble(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace koopbound
