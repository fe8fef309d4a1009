#pragma once

// Brute-force reference computations. These deliberately avoid the code
// paths they check: no sorting, no rank arrays shared with the library.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace gradroute::testing {

// Mean absolute difference form: sum_i sum_j |g_i - g_j| / (2 N^2 mu), with
// an optional guard added to N * sum g as in the library.
inline double gini_oracle(std::span<const double> g, double epsilon = 0.0) {
  if (g.size() < 2) throw std::invalid_argument("gini_oracle needs N >= 2");
  const double n = static_cast<double>(g.size());
  long double sum = 0.0L;
  long double pair = 0.0L;
  for (double a : g) {
    if (!std::isfinite(a) || a < 0.0) throw std::invalid_argument("gini_oracle: bad entry");
    sum += a;
    for (double b : g) pair += std::fabs(static_cast<long double>(a) - b);
  }
  if (sum == 0.0L) return 0.0;
  return static_cast<double>(pair / 2.0L / (n * sum + epsilon));
}

// Rank by counting: 1 + #{smaller} + (#{equal} - 1) / 2.
inline std::vector<double> counting_ranks(std::span<const double> x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0.0;
    double equal = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (x[j] < x[i]) less += 1.0;
      if (x[j] == x[i]) equal += 1.0;
    }
    r[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return r;
}

// Pearson correlation of counting ranks, with explicit means. Returns NaN
// when a side has no rank variance.
inline double spearman_oracle(std::span<const double> a, std::span<const double> b) {
  const auto ra = counting_ranks(a);
  const auto rb = counting_ranks(b);
  const double n = static_cast<double>(a.size());
  long double ma = 0.0L;
  long double mb = 0.0L;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  long double sab = 0.0L;
  long double saa = 0.0L;
  long double sbb = 0.0L;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0L || sbb == 0.0L) return std::nan("");
  return static_cast<double>(sab / std::sqrt(saa * sbb));
}

// Classical no-ties formula 1 - 6 sum d^2 / (n (n^2 - 1)).
inline double spearman_rank_difference(std::span<const double> a, std::span<const double> b) {
  const auto ra = counting_ranks(a);
  const auto rb = counting_ranks(b);
  const double n = static_cast<double>(a.size());
  double d2 = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

// out[i][j] = sum_p a[i][p] * b[p][j], plain triple loop.
inline std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b,
                                        std::size_t m, std::size_t k, std::size_t n) {
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) out[i * n + j] += a[i * k + p] * b[p * n + j];
  return out;
}

}  // namespace gradroute::testing
