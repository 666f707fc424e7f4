#pragma once

// Philox4x32-10 counter-based generator. Every sample path owns the counter
// range (path, *), so a path's stream does not depend on which thread runs
// it or on how many paths are simulated.

#include <array>
#include <cmath>
#include <cstdint>

namespace covsteer {

class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;

  static Block generate(Block counter, std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      counter = single_round(counter, key);
      key[0] += 0x9E3779B9u;
      key[1] += 0xBB67AE85u;
    }
    return counter;
  }

 private:
  static Block single_round(const Block& c, const std::array<std::uint32_t, 2>& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(0xD2511F53u) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(0xCD9E8D57u) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// Sequential draws from the stream of one path.
class PathStream {
 public:
  PathStream(std::uint64_t seed, std::uint64_t path)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        path_lo_(static_cast<std::uint32_t>(path)), path_hi_(static_cast<std::uint32_t>(path >> 32)) {}

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() {
    if (used_ >= 2) refill();
    const std::uint64_t a = buffer_[2 * used_];
    const std::uint64_t b = buffer_[2 * used_ + 1];
    ++used_;
    const std::uint64_t bits = ((a << 21) ^ (b >> 11)) & ((std::uint64_t{1} << 53) - 1);
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double theta = 6.283185307179586476925 * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double exponential() { return -std::log(uniform()); }

 private:
  void refill() {
    buffer_ = Philox4x32::generate({path_lo_, path_hi_, static_cast<std::uint32_t>(counter_),
                                    static_cast<std::uint32_t>(counter_ >> 32)},
                                   key_);
    ++counter_;
    used_ = 0;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint32_t path_lo_, path_hi_;
  std::uint64_t counter_ = 0;
  Philox4x32::Block buffer_{};
  int used_ = 2;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace covsteer
