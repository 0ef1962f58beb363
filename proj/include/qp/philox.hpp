#pragma once

#include <array>
#include <cmath>
#include <cstdint>

// Philox4x32-10 counter-based generator. A stream is keyed by (seed, stream
// id); blocks are pure functions of the counter, so any number of workers can
// draw from disjoint streams and reproduce the single-threaded results
// exactly.

namespace qp {

struct PhiloxBlock {
  std::array<std::uint32_t, 4> x;
};

inline PhiloxBlock philox4x32(std::array<std::uint32_t, 4> ctr,
                              std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    std::uint64_t p0 = std::uint64_t(M0) * ctr[0];
    std::uint64_t p1 = std::uint64_t(M1) * ctr[2];
    std::uint32_t hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
    std::uint32_t hi1 = std::uint64_t(p1) >> 32, lo1 = std::uint32_t(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += W0;
    key[1] += W1;
  }
  return {ctr};
}

class PhiloxStream {
 public:
  PhiloxStream(std::uint64_t seed, std::uint64_t stream)
      : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)},
        hi_{std::uint32_t(stream), std::uint32_t(stream >> 32)} {}

  // Uniform on (0,1]; consumes one 64-bit lane.
  double uniform() {
    std::uint64_t u = next64();
    return double((u >> 11) + 1) * 0x1p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; lanes are drawn in a fixed order.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t next64() {
    if (lane_ == 0) {
      block_ = philox4x32({std::uint32_t(ctr_), std::uint32_t(ctr_ >> 32),
                           hi_[0], hi_[1]},
                          key_);
      ++ctr_;
    }
    std::uint64_t v = (std::uint64_t(block_.x[2 * lane_ + 1]) << 32) |
                      block_.x[2 * lane_];
    lane_ ^= 1;
    return v;
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 2> hi_;
  std::uint64_t ctr_ = 0;
  PhiloxBlock block_{};
  int lane_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

} // namespace qp
