#pragma once

#include <cstdint>
#include <complex>
#include <random>
#include <vector>

namespace usee {

// Seeded random source used everywhere. Wraps std::mt19937_64 but draws
// uniforms and Gaussians through fixed formulas so streams are identical
// across standard-library implementations.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t uniform_index(std::uint64_t n) {
    // modulo bias is negligible at these ranges
    return eng_() % n;
  }

  // standard normal via Box-Muller; caches the second draw
  double gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  std::complex<double> gaussian_complex() {
    double re = gaussian();
    double im = gaussian();
    return {re, im};
  }

  // splitmix64 over the (master, index) pair
  static std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) {
    std::uint64_t z = master_seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // independent child stream, e.g. one per dataset entry
  static Rng derive(std::uint64_t master_seed, std::uint64_t index) {
    return Rng(derive_seed(master_seed, index));
  }

private:
  std::mt19937_64 eng_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace usee
