#pragma once

#include <cmath>
#include <cstdint>

namespace taskgroup {

// splitmix64-based generator. The standard <random> distributions are not
// bit-stable across library implementations, and several outputs of this
// project are compared byte for byte, so all randomness goes through this.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], inclusive. Modulo bias is irrelevant at the
  // ranges used here.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() %
                                 static_cast<std::uint64_t>(hi - lo + 1));
  }

  double normal() {
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 1e-300);
    const double u2 = uniform();
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  // Derive an independent stream so separate consumers do not perturb each
  // other's sequences.
  Rng fork(std::uint64_t salt) {
    return Rng(next_u64() ^ (0x9e3779b97f4a7c15ull * (salt + 1)));
  }

 private:
  std::uint64_t state_;
};

}  // namespace taskgroup
