#pragma once

#include <cstddef>
#include <cstdint>

#include "gradroute/checksum.hpp"

namespace gradroute {

// Counter-based SplitMix64 stream. Fully specified, so draws are identical
// across platforms and standard libraries.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, bound); bound > 0.
  std::size_t below(std::size_t bound) {
    const auto k = static_cast<std::size_t>(uniform() * static_cast<double>(bound));
    return k < bound ? k : bound - 1;
  }

 private:
  std::uint64_t state_;
};

}  // namespace gradroute
