#include "gradroute/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gradroute/error.hpp"
#include "gradroute/random.hpp"

namespace gradroute {

namespace {

std::set<std::string> universe(const Partition& p) {
  std::set<std::string> all = p.sft_ids;
  all.insert(p.rl_ids.begin(), p.rl_ids.end());
  return all;
}

std::set<std::string> intersect(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::set<std::string> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
  return out;
}

}  // namespace

ConsensusReport consensus(std::span<const NamedPartition> partitions) {
  if (partitions.size() < 2) throw ParameterError("consensus needs at least two partitions");
  const std::set<std::string> corpus = universe(partitions.front().partition);
  for (const auto& np : partitions) {
    const Partition& p = np.partition;
    if (!intersect(p.sft_ids, p.rl_ids).empty()) {
      throw ConsistencyError("partition '" + np.name + "' is not disjoint");
    }
    if (universe(p) != corpus) {
      throw ConsistencyError("partition '" + np.name + "' covers a different corpus than '" +
                             partitions.front().name + "'");
    }
  }
  if (corpus.empty()) throw EmptyCorpusError("consensus over an empty corpus");

  ConsensusReport r;
  r.corpus_size = corpus.size();
  const auto n = static_cast<double>(r.corpus_size);
  for (const auto& np : partitions) {
    r.names.push_back(np.name);
    r.rl_sizes.push_back(np.partition.rl_ids.size());
  }

  for (std::size_t i = 0; i < partitions.size(); ++i) {
    for (std::size_t j = i + 1; j < partitions.size(); ++j) {
      const auto& a = partitions[i].partition.rl_ids;
      const auto& b = partitions[j].partition.rl_ids;
      const std::size_t inter = intersect(a, b).size();
      const std::size_t uni = a.size() + b.size() - inter;
      const auto key = std::make_pair(partitions[i].name, partitions[j].name);
      r.pairwise_rl_intersection[key] = inter;
      // Two empty RL sets are identical.
      r.pairwise_rl_overlap[key] = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    }
  }

  std::set<std::string> common = partitions.front().partition.rl_ids;
  for (std::size_t i = 1; i < partitions.size(); ++i) {
    common = intersect(common, partitions[i].partition.rl_ids);
  }
  r.all_rl_intersection = common.size();
  const double half = n / 2.0;
  r.triple_rl_intersection_fraction = std::min(1.0, static_cast<double>(common.size()) / half);
  r.triple_rl_intersection_corpus_fraction = static_cast<double>(common.size()) / n;

  double expected_share = 1.0;
  for (std::size_t k : r.rl_sizes) expected_share *= static_cast<double>(k) / n;
  r.random_baseline_corpus = expected_share;
  r.random_baseline = std::min(1.0, expected_share * n / half);
  return r;
}

Partition random_partition(std::span<const std::string> ids, std::size_t rl_size,
                           std::uint64_t seed) {
  if (rl_size > ids.size()) throw ParameterError("rl_size exceeds corpus size");
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 rng(seed);
  // Partial Fisher-Yates: the first rl_size slots become a uniform sample.
  for (std::size_t i = 0; i < rl_size; ++i) {
    const std::size_t j = i + rng.below(order.size() - i);
    std::swap(order[i], order[j]);
  }
  Partition p;
  p.metric_name = "random";
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < rl_size ? p.rl_ids : p.sft_ids).insert(ids[order[i]]);
  }
  return p;
}

double monte_carlo_intersection(std::size_t corpus_size, std::span<const std::size_t> rl_sizes,
                                std::size_t trials, std::uint64_t seed) {
  if (corpus_size == 0 || trials == 0) throw ParameterError("monte carlo needs a corpus and trials");
  for (std::size_t k : rl_sizes) {
    if (k > corpus_size) throw ParameterError("rl size exceeds corpus size");
  }
  SplitMix64 seeds(seed);
  std::vector<std::size_t> order(corpus_size);
  std::vector<unsigned> hits(corpus_size);
  double total = 0.0;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    std::fill(hits.begin(), hits.end(), 0u);
    for (std::size_t k : rl_sizes) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      SplitMix64 rng(seeds.next());
      for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.below(corpus_size - i);
        std::swap(order[i], order[j]);
        ++hits[order[i]];
      }
    }
    const auto all = static_cast<unsigned>(rl_sizes.size());
    const auto common = std::count(hits.begin(), hits.end(), all);
    total += static_cast<double>(common) / static_cast<double>(corpus_size);
  }
  return total / static_cast<double>(trials);
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i + 1;
    while (j < idx.size() && values[idx[j]] == values[idx[i]]) ++j;
    // Positions i..j-1 (0-based) share the mean 1-based rank.
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[idx[k]] = rank;
    i = j;
  }
  return ranks;
}

std::optional<double> spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConsistencyError("spearman inputs differ in length");
  if (a.size() < 2) throw ParameterError("spearman needs at least two entries");
  const std::vector<double> ra = average_ranks(a);
  const std::vector<double> rb = average_ranks(b);
  // Average ranks always sum to n(n+1)/2, so both means are (n+1)/2.
  const double mean = (static_cast<double>(a.size()) + 1.0) / 2.0;
  double cov = 0.0;
  double va = 0.0;
  double vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - mean;
    const double db = rb[i] - mean;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) return std::nullopt;
  return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

std::optional<double> spearman(const ScoreSet& a, const ScoreSet& b) {
  if (a.size() != b.size()) {
    throw ConsistencyError("score sets have " + std::to_string(a.size()) + " and " +
                           std::to_string(b.size()) + " entries");
  }
  std::vector<double> va;
  std::vector<double> vb;
  va.reserve(a.size());
  vb.reserve(b.size());
  auto ib = b.entries.begin();
  for (const auto& [id, e] : a.entries) {
    if (ib->first != id) {
      throw ConsistencyError("trajectory '" + id + "' is not present in both score sets");
    }
    va.push_back(e.value);
    vb.push_back(ib->second.value);
    ++ib;
  }
  return spearman(va, vb);
}

SweepReport ratio_sweep(const ScoreSet& scores, std::span<const double> fractions) {
  if (fractions.empty()) throw ParameterError("ratio_sweep needs at least one fraction");
  for (double q : fractions) {
    if (!(q > 0.0 && q < 1.0)) {
      throw ParameterError("sweep fraction " + std::to_string(q) + " outside (0, 1)");
    }
  }
  std::vector<double> sorted(fractions.begin(), fractions.end());
  std::sort(sorted.begin(), sorted.end());

  SweepReport report;
  report.metric_name = std::string(metric_name(scores.metric));
  report.nesting_verified = true;
  std::set<std::string> previous;
  for (double q : sorted) {
    const Partition p = quantile_split(scores, q);
    report.rows.push_back({q, p.sft_ids.size(), p.rl_ids.size(), p.threshold, std::nullopt});
    if (!std::includes(p.rl_ids.begin(), p.rl_ids.end(), previous.begin(), previous.end())) {
      report.nesting_verified = false;
    }
    previous = p.rl_ids;
  }
  return report;
}

RobustnessReport normalization_robustness(std::span<const GradientVector> vectors, Metric metric,
                                          double epsilon) {
  if (vectors.empty()) throw EmptyCorpusError("normalization_robustness needs vectors");
  for (const auto& v : vectors) {
    if (v.group_param_counts.empty() || v.group_param_counts.size() != v.norms.size()) {
      throw InputError("vector '" + v.trajectory_id + "' lacks parameter counts");
    }
  }
  const ScoreSet raw = score_corpus(vectors, metric, false, epsilon);
  const ScoreSet normed = score_corpus(vectors, metric, true, epsilon);
  RobustnessReport r;
  r.metric_name = std::string(metric_name(metric));
  r.corpus_size = raw.size();
  if (raw.size() >= 2) r.rho = spearman(raw, normed);
  r.degenerate = !r.rho.has_value();
  return r;
}

}  // namespace gradroute
