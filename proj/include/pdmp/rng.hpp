#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace pdmp {

/// Philox4x64-10 counter-based generator (Salmon et al., SC'11).
///
/// The 256-bit counter is pre-incremented before each block, which matches
/// numpy.random.Philox, so raw output can be checked against numpy.
class Philox4x64 {
 public:
  using result_type = std::uint64_t;
  using key_type = std::array<std::uint64_t, 2>;
  using counter_type = std::array<std::uint64_t, 4>;

  Philox4x64(key_type key, counter_type counter) : key_(key), counter_(counter) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (pos_ == 4) {
      increment();
      buffer_ = block(counter_, key_);
      pos_ = 0;
    }
    return buffer_[pos_++];
  }

  const counter_type& counter() const { return counter_; }
  const key_type& key() const { return key_; }

  static counter_type block(counter_type ctr, key_type key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const unsigned __int128 p0 = static_cast<unsigned __int128>(kMul0) * ctr[0];
      const unsigned __int128 p1 = static_cast<unsigned __int128>(kMul1) * ctr[2];
      const auto hi0 = static_cast<std::uint64_t>(p0 >> 64);
      const auto lo0 = static_cast<std::uint64_t>(p0);
      const auto hi1 = static_cast<std::uint64_t>(p1 >> 64);
      const auto lo1 = static_cast<std::uint64_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
  static constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
  static constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

  void increment() {
    for (auto& word : counter_) {
      if (++word != 0) break;
    }
  }

  key_type key_;
  counter_type counter_;
  counter_type buffer_{};
  int pos_ = 4;
};

/// Master seed plus replication stream. Identical configs give identical draws.
struct RngConfig {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  bool operator==(const RngConfig&) const = default;
};

/// Named sub-streams so that one consumer never perturbs another.
enum class SubStream : std::uint64_t {
  exponential_marks = 0,
  jump_sizes = 1,
  state_sampling = 2,
  kernel_draws = 3,
  auxiliary = 4,
};

/// Random source handed to samplers. Wraps one Philox sub-stream.
class Rng {
 public:
  using result_type = std::uint64_t;

  Rng(RngConfig config, SubStream sub)
      : engine_({config.seed, config.stream}, {0, 0, static_cast<std::uint64_t>(sub), 0}) {}

  static constexpr result_type min() { return Philox4x64::min(); }
  static constexpr result_type max() { return Philox4x64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on the open interval (0, 1).
  double uniform_open() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  /// Exp(1) by inversion.
  double exponential() { return -std::log(uniform_open()); }

 private:
  Philox4x64 engine_;
};

}  // namespace pdmp
