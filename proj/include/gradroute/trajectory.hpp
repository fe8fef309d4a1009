#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gradroute {

using TokenId = std::uint32_t;

struct Trajectory {
  std::string trajectory_id;
  std::vector<TokenId> tokens;
  // true = response token whose prediction contributes to the loss
  std::vector<bool> response_mask;
  // false = padding; never attended, never a loss target
  std::vector<bool> attention_mask;
  std::map<std::string, std::string> metadata;

  std::size_t response_token_count() const;
  // Number of leading attended positions (padding is always trailing).
  std::size_t active_length() const;
};

inline constexpr TokenId kPadToken = 0;

// Truncates (keeping the head) or pads to exactly `context_length`.
// Positions before `response_start` and padding positions get
// response_mask=false. Throws InputError when response_start is out of range
// and EmptyResponseError when truncation removes every response token.
Trajectory prepare_trajectory(std::span<const TokenId> raw_tokens, std::size_t response_start,
                              std::size_t context_length, std::string trajectory_id = {});

// Byte-level fallback tokenizer (vocabulary 256).
inline constexpr std::size_t kByteVocabSize = 256;
std::vector<TokenId> byte_tokenize(std::string_view text);

}  // namespace gradroute
