#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>

namespace cpath {

/// Mixes a 64-bit value (splitmix64 finalizer).
std::uint64_t mix64(std::uint64_t x);

/// Stable 64-bit hash of a string (FNV-1a followed by mix64).
std::uint64_t hash_string(std::string_view s);

/// Counter-based random stream (Philox4x32-10).
///
/// A stream is fully determined by the components it is keyed with, e.g.
/// (global_seed, epoch, sample_index, view_index). Two streams with equal
/// components produce identical sequences regardless of which thread owns
/// them or in what order they are created.
class RngStream {
 public:
  RngStream(std::initializer_list<std::uint64_t> components);
  explicit RngStream(std::span<const std::uint64_t> components);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);
  bool bernoulli(double p);
  /// Standard normal via Box-Muller.
  double normal();

 private:
  void refill();

  std::array<std::uint32_t, 2> key_{};
  std::array<std::uint32_t, 4> counter_{};
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
};

}  // namespace cpath
