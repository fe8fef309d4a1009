#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gradroute/exec.hpp"
#include "gradroute/probe.hpp"

namespace gradroute {

// Denominator guard of the concentration formulas.
inline constexpr double kDefaultEpsilon = 1e-8;

enum class Metric { gini, kurtosis, cv, l2_magnitude };

std::string_view metric_name(Metric m);
// Accepts "gini", "kurtosis", "cv", "l2" and "l2_magnitude".
std::optional<Metric> parse_metric(std::string_view name);

// Sorted-order Gini: sum_j (2j - N - 1) g_(j) / (N sum g + eps), j 1-based.
// Requires N >= 2, entries finite and non-negative.
double gini(std::span<const double> g, double epsilon = kDefaultEpsilon);

struct KurtosisValue {
  double value = 0.0;
  // Set for constant input (zero spread); value is then exactly -3.
  bool degenerate = false;
};

// Population excess kurtosis: mean(((g - mu) / (sigma + eps))^4) - 3.
KurtosisValue kurtosis(std::span<const double> g, double epsilon = kDefaultEpsilon);

// Population sigma / (mu + eps). Requires entries finite and non-negative.
double cv(std::span<const double> g, double epsilon = kDefaultEpsilon);

// Euclidean norm of the group-norm vector. Not a concentration measure; the
// magnitude baseline.
double l2_magnitude(std::span<const double> g);

// g'_j = g_j / sqrt(count_j)
std::vector<double> normalize_by_size(std::span<const double> g,
                                      std::span<const std::uint64_t> param_counts);

struct ScoreEntry {
  double value = 0.0;
  bool degenerate = false;
  bool operator==(const ScoreEntry&) const = default;
};

struct ScoreSet {
  Metric metric = Metric::gini;
  bool normalized = false;
  double epsilon = kDefaultEpsilon;
  // Ordered by trajectory_id.
  std::map<std::string, ScoreEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  bool operator==(const ScoreSet&) const = default;
};

// Applies one operator per vector (after optional size normalization).
// Throws ConsistencyError when group orderings differ across vectors and
// InputError for duplicate trajectory ids.
ScoreSet score_corpus(std::span<const GradientVector> vectors, Metric metric, bool normalized,
                      double epsilon = kDefaultEpsilon, Exec exec = Exec::serial);

}  // namespace gradroute
