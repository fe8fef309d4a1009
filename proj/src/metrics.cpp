#include "gradroute/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <string>

#include "gradroute/error.hpp"

namespace gradroute {

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::gini: return "gini";
    case Metric::kurtosis: return "kurtosis";
    case Metric::cv: return "cv";
    case Metric::l2_magnitude: return "l2_magnitude";
  }
  return "?";
}

std::optional<Metric> parse_metric(std::string_view name) {
  if (name == "gini") return Metric::gini;
  if (name == "kurtosis") return Metric::kurtosis;
  if (name == "cv") return Metric::cv;
  if (name == "l2" || name == "l2_magnitude") return Metric::l2_magnitude;
  return std::nullopt;
}

namespace {

void require_size(std::span<const double> g, const char* op) {
  if (g.size() < 2) {
    throw InputError(std::string(op) + " needs at least 2 entries, got " +
                     std::to_string(g.size()));
  }
}

void require_finite(std::span<const double> g, const char* op) {
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (!std::isfinite(g[j])) {
      throw InputError(std::string(op) + ": non-finite entry at index " + std::to_string(j));
    }
  }
}

void require_non_negative(std::span<const double> g, const char* op) {
  require_finite(g, op);
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (g[j] < 0.0) {
      throw InputError(std::string(op) + ": negative entry at index " + std::to_string(j));
    }
  }
}

void require_epsilon(double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw InputError("epsilon must be positive and finite");
  }
}

struct Moments {
  long double mean = 0.0L;
  long double sigma = 0.0L;
};

Moments population_moments(std::span<const double> g) {
  const auto n = static_cast<long double>(g.size());
  long double sum = 0.0L;
  for (double v : g) sum += v;
  Moments m;
  m.mean = sum / n;
  long double ss = 0.0L;
  for (double v : g) {
    const long double d = v - m.mean;
    ss += d * d;
  }
  m.sigma = std::sqrt(ss / n);
  return m;
}

bool all_equal(std::span<const double> g) {
  return std::all_of(g.begin(), g.end(), [&](double v) { return v == g.front(); });
}

}  // namespace

double gini(std::span<const double> g, double epsilon) {
  require_size(g, "gini");
  require_non_negative(g, "gini");
  require_epsilon(epsilon);
  std::vector<double> sorted(g.begin(), g.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<long double>(sorted.size());
  long double weighted = 0.0L;
  long double total = 0.0L;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    const long double coef = 2.0L * static_cast<long double>(j + 1) - n - 1.0L;
    weighted += coef * sorted[j];
    total += sorted[j];
  }
  const auto value = static_cast<double>(weighted / (n * total + epsilon));
  return std::max(0.0, value);
}

KurtosisValue kurtosis(std::span<const double> g, double epsilon) {
  require_size(g, "kurtosis");
  require_finite(g, "kurtosis");
  require_epsilon(epsilon);
  // Zero spread: every standardized deviation is exactly 0.
  if (all_equal(g)) return {-3.0, true};
  const Moments m = population_moments(g);
  const long double denom = m.sigma + epsilon;
  long double acc = 0.0L;
  for (double v : g) {
    const long double z = (v - m.mean) / denom;
    const long double z2 = z * z;
    acc += z2 * z2;
  }
  return {static_cast<double>(acc / static_cast<long double>(g.size()) - 3.0L), false};
}

double cv(std::span<const double> g, double epsilon) {
  require_size(g, "cv");
  require_non_negative(g, "cv");
  require_epsilon(epsilon);
  if (all_equal(g)) return 0.0;
  const Moments m = population_moments(g);
  return static_cast<double>(m.sigma / (m.mean + epsilon));
}

double l2_magnitude(std::span<const double> g) {
  require_non_negative(g, "l2_magnitude");
  long double acc = 0.0L;
  for (double v : g) acc += static_cast<long double>(v) * v;
  return static_cast<double>(std::sqrt(acc));
}

std::vector<double> normalize_by_size(std::span<const double> g,
                                      std::span<const std::uint64_t> param_counts) {
  if (g.size() != param_counts.size()) {
    throw InputError("normalize_by_size: " + std::to_string(g.size()) + " norms but " +
                     std::to_string(param_counts.size()) + " parameter counts");
  }
  std::vector<double> out(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (param_counts[j] == 0) {
      throw InputError("normalize_by_size: parameter count at index " + std::to_string(j) +
                       " is not positive");
    }
    out[j] = g[j] / std::sqrt(static_cast<double>(param_counts[j]));
  }
  return out;
}

namespace {

ScoreEntry score_one(const GradientVector& v, Metric metric, bool normalized, double epsilon) {
  std::vector<double> normed;
  std::span<const double> g = v.norms;
  if (normalized) {
    normed = normalize_by_size(v.norms, v.group_param_counts);
    g = normed;
  }
  switch (metric) {
    case Metric::gini: return {gini(g, epsilon), false};
    case Metric::kurtosis: {
      const auto k = kurtosis(g, epsilon);
      return {k.value, k.degenerate};
    }
    case Metric::cv: return {cv(g, epsilon), false};
    case Metric::l2_magnitude: return {l2_magnitude(g), false};
  }
  return {};
}

}  // namespace

ScoreSet score_corpus(std::span<const GradientVector> vectors, Metric metric, bool normalized,
                      double epsilon, Exec exec) {
  require_epsilon(epsilon);
  ScoreSet out;
  out.metric = metric;
  out.normalized = normalized;
  out.epsilon = epsilon;
  if (vectors.empty()) return out;

  const auto& reference = vectors.front().group_names;
  for (const auto& v : vectors) {
    v.validate();
    if (v.group_names != reference) {
      throw ConsistencyError("vector '" + v.trajectory_id +
                             "' has a different group ordering than '" +
                             vectors.front().trajectory_id + "'");
    }
  }

  std::vector<ScoreEntry> values(vectors.size());
  if (exec == Exec::parallel) {
    std::vector<std::exception_ptr> errors(vectors.size());
    const auto n = static_cast<std::ptrdiff_t>(vectors.size());
#pragma omp parallel for schedule(static) num_threads(worker_count())
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      try {
        values[idx] = score_one(vectors[idx], metric, normalized, epsilon);
      } catch (...) {
        errors[idx] = std::current_exception();
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  } else {
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      values[i] = score_one(vectors[i], metric, normalized, epsilon);
    }
  }

  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (!out.entries.emplace(vectors[i].trajectory_id, values[i]).second) {
      throw ConsistencyError("duplicate trajectory_id '" + vectors[i].trajectory_id + "'");
    }
  }
  return out;
}

}  // namespace gradroute
