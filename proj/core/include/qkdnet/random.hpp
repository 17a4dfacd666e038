#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace qkdnet {

/// Stable sub-seeding: the stream for `label` depends only on (seed, label),
/// so adding a link or a consumer never perturbs anyone else's stream.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 bits, independent of the standard library's
  // distribution implementations.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  void fill(std::span<std::uint8_t> out);
  std::vector<std::uint8_t> bytes(std::size_t n);
  std::uint64_t poisson(double mean);

 private:
  std::mt19937_64 engine_;
};

}  // namespace qkdnet
