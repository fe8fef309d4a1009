#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "gradroute/metrics.hpp"

namespace gradroute {

struct RoutingRule {
  enum class Kind { median, quantile };
  Kind kind = Kind::median;
  double rl_fraction = 0.5;  // only meaningful for quantile
  bool inverted = false;

  // "median", "quantile(0.3)", "inverse-of(median)"
  std::string to_string() const;
  static RoutingRule parse(const std::string& text);
  bool operator==(const RoutingRule&) const = default;
};

struct Partition {
  std::set<std::string> sft_ids;
  std::set<std::string> rl_ids;
  double threshold = 0.0;
  RoutingRule rule;
  std::string metric_name;
  // All items landed on one side.
  bool degenerate = false;
  std::vector<std::string> warnings;

  std::size_t size() const { return sft_ids.size() + rl_ids.size(); }
  bool operator==(const Partition&) const = default;
};

// Median of all scores (mean of the two central order statistics for even
// counts). score <= median goes to SFT, score > median to RL.
Partition median_split(const ScoreSet& scores);

// The ceil(rl_fraction * n) highest scores go to RL; ties at the cut are
// broken by ascending trajectory_id. threshold is the lowest RL score.
Partition quantile_split(const ScoreSet& scores, double rl_fraction);

// Swaps the two sides. Involutive.
Partition inverse_partition(const Partition& p);

// Number of RL items quantile_split assigns for a corpus of size n.
std::size_t rl_count_for_fraction(double rl_fraction, std::size_t n);

// Throws ConsistencyError unless the sides are disjoint and together equal
// the ids of `scores`.
void check_partition_covers(const Partition& p, const ScoreSet& scores);

}  // namespace gradroute
