#pragma once

#include <cmath>
#include <cstdint>

namespace fusereg {

/// Counter-based pseudo-random generator. A draw is a pure function of
/// (key, counter), so streams can be split without sharing state:
/// split(stream_id) derives an independent key and every replication or
/// worker gets its own stream. This is what makes results independent of
/// thread count.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : key_(mix(seed ^ kKeyInit)), counter_(0) {}

  /// Derive an independent stream; the parent is unchanged.
  CounterRng split(std::uint64_t stream_id) const {
    CounterRng child(0);
    child.key_ = mix(key_ ^ mix(stream_id + kStreamSalt));
    child.counter_ = 0;
    return child;
  }

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGamma); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller (no caching, two uniforms per draw).
  double gaussian() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  /// Poisson draw by inversion of the exponential-product method; intended
  /// for small means (mean <= ~50).
  int poisson(double mean) {
    const double limit = std::exp(-mean);
    double prod = 1.0;
    int k = -1;
    do {
      prod *= uniform();
      ++k;
    } while (prod > limit);
    return k;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ull;
  static constexpr std::uint64_t kKeyInit = 0x8af26f5c3a5c91a3ull;
  static constexpr std::uint64_t kStreamSalt = 0xd1342543de82ef95ull;
  static constexpr double kPi = 3.141592653589793238462643383279502884;

  // splitmix64 finalizer
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace fusereg
