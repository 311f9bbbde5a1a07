#pragma once

#include <cmath>
#include <cstdint>

namespace driftmt {

// Counter-based generator. Each (seed, stream, draw) triple yields an
// independent substream, so parallel Monte-Carlo draws are reproducible
// no matter how they are scheduled across threads.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t draw)
      : state_(mix(mix(mix(0x9e3779b97f4a7c15ULL ^ seed, stream), draw), seed)) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix_final(state_);
  }

  // uniform on (0, 1); never returns 0 or 1 exactly
  double next_unit() {
    const std::uint64_t u = next_u64() >> 11;  // 53 bits
    return (static_cast<double>(u) + 0.5) * 0x1.0p-53;
  }

  // standard normal via the polar (Marsaglia) method; one spare cached
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_unit() - 1.0;
      v = 2.0 * next_unit() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double r = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * r;
    have_spare_ = true;
    return u * r;
  }

  // symmetric three-point law with unit variance and fourth moment m4:
  // P(+-sqrt(m4)) = 1/(2 m4), P(0) = 1 - 1/m4.  m4 = 1 is Rademacher.
  double next_three_point(double m4) {
    const double a = std::sqrt(m4);
    const double u = next_unit();
    if (u < 0.5 / m4) return a;
    if (u < 1.0 / m4) return -a;
    return 0.0;
  }

 private:
  static std::uint64_t mix(std::uint64_t h, std::uint64_t k) {
    h ^= k + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return mix_final(h);
  }

  // splitmix64 finalizer
  static std::uint64_t mix_final(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace driftmt
