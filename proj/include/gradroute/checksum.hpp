#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace gradroute {

// 64-bit FNV-1a; `seed` allows chaining over several buffers.
std::uint64_t fnv1a64(std::span<const std::byte> bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed = 0xcbf29ce484222325ULL);

// SplitMix64 finalizer; a good 64-bit bijective mixer.
std::uint64_t mix64(std::uint64_t x);

std::string to_hex(std::uint64_t value);

}  // namespace gradroute
