#include "gradroute/trajectory.hpp"

#include <algorithm>

#include "gradroute/error.hpp"

namespace gradroute {

std::size_t Trajectory::response_token_count() const {
  return static_cast<std::size_t>(std::count(response_mask.begin(), response_mask.end(), true));
}

std::size_t Trajectory::active_length() const {
  const auto it = std::find(attention_mask.begin(), attention_mask.end(), false);
  return static_cast<std::size_t>(it - attention_mask.begin());
}

Trajectory prepare_trajectory(std::span<const TokenId> raw_tokens, std::size_t response_start,
                              std::size_t context_length, std::string trajectory_id) {
  if (context_length == 0) throw InputError("context_length must be positive");
  if (response_start >= raw_tokens.size()) {
    throw InputError("response_start " + std::to_string(response_start) +
                     " is not before the end of a " + std::to_string(raw_tokens.size()) +
                     "-token sequence");
  }
  if (response_start >= context_length) {
    throw EmptyResponseError("truncation to " + std::to_string(context_length) +
                             " tokens removes every response token (response starts at " +
                             std::to_string(response_start) + ")");
  }

  const std::size_t kept = std::min(raw_tokens.size(), context_length);
  Trajectory t;
  t.trajectory_id = std::move(trajectory_id);
  t.tokens.assign(context_length, kPadToken);
  t.response_mask.assign(context_length, false);
  t.attention_mask.assign(context_length, false);
  for (std::size_t i = 0; i < kept; ++i) {
    t.tokens[i] = raw_tokens[i];
    t.attention_mask[i] = true;
    t.response_mask[i] = i >= response_start;
  }
  return t;
}

std::vector<TokenId> byte_tokenize(std::string_view text) {
  std::vector<TokenId> out;
  out.reserve(text.size());
  for (unsigned char c : text) out.push_back(c);
  return out;
}

}  // namespace gradroute
