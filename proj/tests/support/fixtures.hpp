#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "gradroute/metrics.hpp"
#include "gradroute/model.hpp"
#include "gradroute/probe.hpp"
#include "gradroute/random.hpp"
#include "gradroute/trajectory.hpp"

namespace gradroute::testing {

inline ProbeModelConfig toy_config(std::size_t layers, std::uint64_t seed = 7) {
  ProbeModelConfig c;
  c.num_layers = layers;
  c.model_dim = 16;
  c.num_heads = 4;
  c.ffn_hidden_dim = 24;
  c.vocab_size = 32;
  c.max_context = 32;
  c.rng_seed = seed;
  return c;
}

inline std::vector<TokenId> random_tokens(std::size_t n, std::size_t vocab, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<TokenId> t(n);
  for (auto& x : t) x = static_cast<TokenId>(rng.below(vocab));
  return t;
}

inline Trajectory toy_trajectory(std::size_t raw_len, std::size_t response_start,
                                 std::size_t context, std::size_t vocab, std::uint64_t seed,
                                 std::string id = "t0") {
  const auto tokens = random_tokens(raw_len, vocab, seed);
  return prepare_trajectory(tokens, response_start, context, std::move(id));
}

inline std::vector<double> random_vector(SplitMix64& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
  return v;
}

inline GradientVector make_vector(std::string id, std::vector<double> norms,
                                  std::vector<std::uint64_t> counts = {}) {
  GradientVector g;
  g.trajectory_id = std::move(id);
  const std::size_t n = norms.size();
  g.norms = std::move(norms);
  for (std::size_t j = 0; j < n; ++j) g.group_names.push_back("g" + std::to_string(j));
  g.group_param_counts = counts.empty() ? std::vector<std::uint64_t>(n, 64) : std::move(counts);
  g.loss_value = 1.0;
  return g;
}

// One group carries >= 90% of the total norm mass.
inline std::vector<double> concentrated_norms(SplitMix64& rng, std::size_t n) {
  std::vector<double> v = random_vector(rng, n, 0.01, 1.0);
  double rest = 0.0;
  for (double x : v) rest += x;
  const std::size_t hot = rng.below(n);
  rest -= v[hot];
  // hot / (hot + rest) >= 0.9  <=>  hot >= 9 * rest; add up to 2x margin.
  v[hot] = rest * (9.0 + 9.0 * rng.uniform());
  return v;
}

// max / min <= 1.2
inline std::vector<double> near_uniform_norms(SplitMix64& rng, std::size_t n) {
  const double base = 0.1 + rng.uniform();
  return random_vector(rng, n, base, base * 1.19);
}

inline ScoreSet make_scores(const std::vector<std::pair<std::string, double>>& items,
                            Metric metric = Metric::gini) {
  ScoreSet s;
  s.metric = metric;
  for (const auto& [id, v] : items) s.entries[id] = {v, false};
  return s;
}

inline std::string id_of(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "t%05zu", i);
  return buf;
}

}  // namespace gradroute::testing
