#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gradroute/metrics.hpp"
#include "gradroute/router.hpp"

namespace gradroute {

struct NamedPartition {
  std::string name;
  Partition partition;
};

struct ConsensusReport {
  std::vector<std::string> names;
  std::size_t corpus_size = 0;
  std::vector<std::size_t> rl_sizes;
  // Jaccard |A n B| / |A u B| of rl_ids, keyed by (name_a, name_b), a < b in
  // input order.
  std::map<std::pair<std::string, std::string>, double> pairwise_rl_overlap;
  std::map<std::pair<std::string, std::string>, std::size_t> pairwise_rl_intersection;
  // |intersection of all rl_ids|
  std::size_t all_rl_intersection = 0;
  // |intersection| / (corpus / 2): share of a high-conflict half that every
  // metric agrees on.
  double triple_rl_intersection_fraction = 0.0;
  // |intersection| / corpus
  double triple_rl_intersection_corpus_fraction = 0.0;
  // Expected values of the two fractions above for independent uniformly
  // random subsets with the observed RL sizes.
  double random_baseline = 0.0;
  double random_baseline_corpus = 0.0;
  // Optional Monte-Carlo estimate of random_baseline_corpus.
  std::optional<double> monte_carlo_baseline_corpus;
};

// Requires >= 2 partitions over the same id set.
ConsensusReport consensus(std::span<const NamedPartition> partitions);

// Monte-Carlo mean of |intersection| / corpus for `trials` draws of
// independent uniformly random RL subsets of the given sizes.
double monte_carlo_intersection(std::size_t corpus_size, std::span<const std::size_t> rl_sizes,
                                std::size_t trials, std::uint64_t seed);

// Uniformly random partition with exactly rl_size RL ids.
Partition random_partition(std::span<const std::string> ids, std::size_t rl_size,
                           std::uint64_t seed);

// Spearman rank correlation with average ranks for ties. nullopt when either
// side has no rank variance (every score tied).
std::optional<double> spearman(const ScoreSet& a, const ScoreSet& b);
std::optional<double> spearman(std::span<const double> a, std::span<const double> b);

// Average (1-based) ranks.
std::vector<double> average_ranks(std::span<const double> values);

struct SweepRow {
  double rl_fraction = 0.0;
  std::size_t sft_size = 0;
  std::size_t rl_size = 0;
  double threshold = 0.0;
  // Filled by an external evaluation pipeline.
  std::optional<double> downstream_score;
};

struct SweepReport {
  std::string metric_name;
  std::vector<SweepRow> rows;
  bool nesting_verified = false;
};

SweepReport ratio_sweep(const ScoreSet& scores, std::span<const double> fractions);

struct RobustnessReport {
  std::string metric_name;
  std::size_t corpus_size = 0;
  std::optional<double> rho;
  // Every score tied on at least one side; rho undefined.
  bool degenerate = false;
};

// Spearman between raw and sqrt(param-count)-normalized scores.
RobustnessReport normalization_robustness(std::span<const GradientVector> vectors, Metric metric,
                                          double epsilon = kDefaultEpsilon);

}  // namespace gradroute
