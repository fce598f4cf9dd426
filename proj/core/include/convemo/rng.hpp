#pragma once

#include <cmath>
#include <cstdint>

namespace convemo {

/// Deterministic random stream. Same seed plus same draw sequence gives the
/// same values on every platform, so std:: distributions (whose output is
/// implementation-defined) are avoided on purpose.
class RngState {
 public:
  explicit RngState(std::uint64_t seed = 0) : seed_(seed), state_(mix(seed)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t position() const { return position_; }

  std::uint64_t next_u64() {
    ++position_;
    // splitmix64 step
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0,1).
  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (one value per call, cached pair).
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_uniform();
    double u2 = next_uniform();
    while (u1 <= 0.0) u1 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  /// Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  /// Independent child stream keyed by id.
  RngState fork(std::uint64_t id) const {
    RngState child(mix(seed_ ^ (0x632be59bd9b4e019ULL * (id + 1))));
    return child;
  }

 private:
  static std::uint64_t mix(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ULL;
    x ^= x >> 33;
    return x;
  }

  std::uint64_t seed_;
  std::uint64_t state_;
  std::uint64_t position_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace convemo
