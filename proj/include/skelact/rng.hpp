#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace skelact {

// splitmix64; used to whiten seeds and to derive independent substreams.
inline std::uint64_t hash_u64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return hash_u64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

// FNV-1a
inline std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Seeded RNG with distribution transforms implemented in-house so that a
// given seed yields the same stream on every platform and stdlib. The
// mt19937_64 engine itself is pinned by the standard; std::*_distribution
// is not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(hash_u64(seed)) {}

  std::uint64_t next_u64() { return eng_(); }

  // [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n); n >= 1. Lemire multiply-shift, slight bias irrelevant here.
  int uniform_int(int n) {
    return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                             static_cast<std::uint64_t>(n)) >>
                            64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  double normal(double mean = 0.0, double stddev = 1.0) {
    if (have_cached_) {
      have_cached_ = false;
      return mean + stddev * cached_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    cached_ = r * std::sin(2.0 * M_PI * u2);
    have_cached_ = true;
    return mean + stddev * r * std::cos(2.0 * M_PI * u2);
  }

  double exponential() {
    double u = 0.0;
    do {
      u = uniform();
    } while (u <= 0.0);
    return -std::log(u);
  }

  // Beta(2,2) as X/(X+Y) with X,Y ~ Gamma(2,1); Gamma(2,1) is the sum of
  // two unit exponentials.
  double beta22() {
    const double x = exponential() + exponential();
    const double y = exponential() + exponential();
    return x / (x + y);
  }

  // Independent stream keyed off this rng's seed material and a salt.
  Rng substream(std::uint64_t salt) {
    return Rng(hash_combine(next_u64(), salt));
  }

 private:
  std::mt19937_64 eng_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace skelact
