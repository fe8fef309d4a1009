#include "gradroute/kernels.hpp"

#include <omp.h>

#include <cmath>
#include <cstdlib>
#include <string>

namespace gradroute {

int worker_count() {
  if (const char* env = std::getenv("GRADROUTE_WORKERS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n > 0) return static_cast<int>(n);
  }
  return omp_get_max_threads();
}

namespace kernels {

namespace serial {

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b.data() + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      out[i * n + j] = acc;
    }
  }
}

void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* oi = out.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) oi[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* bp = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) oi[j] += aip * bp[j];
    }
  }
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t k, std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* oi = out.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) oi[j] = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
      const double ati = a[t * m + i];
      if (ati == 0.0) continue;
      const double* bt = b.data() + t * n;
      for (std::size_t j = 0; j < n; ++j) oi[j] += ati * bt[j];
    }
  }
}

}  // namespace serial

// The parallel kernels distribute output rows over threads. Each row is
// computed with exactly the loop nest of its serial twin, so results match
// bit for bit.
namespace parallel {

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) num_threads(worker_count())
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const double* ai = a.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b.data() + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      out[i * n + j] = acc;
    }
  }
}

void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) num_threads(worker_count())
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* oi = out.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) oi[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* bp = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) oi[j] += aip * bp[j];
    }
  }
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t k, std::size_t m, std::size_t n) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) num_threads(worker_count())
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* oi = out.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) oi[j] = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
      const double ati = a[t * m + i];
      if (ati == 0.0) continue;
      const double* bt = b.data() + t * n;
      for (std::size_t j = 0; j < n; ++j) oi[j] += ati * bt[j];
    }
  }
}

}  // namespace parallel

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t m, std::size_t k, std::size_t n, Exec exec) {
  if (exec == Exec::parallel) {
    parallel::matmul_nt(a, b, out, m, k, n);
  } else {
    serial::matmul_nt(a, b, out, m, k, n);
  }
}

void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t m, std::size_t k, std::size_t n, Exec exec) {
  if (exec == Exec::parallel) {
    parallel::matmul_nn(a, b, out, m, k, n);
  } else {
    serial::matmul_nn(a, b, out, m, k, n);
  }
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t k, std::size_t m, std::size_t n, Exec exec) {
  if (exec == Exec::parallel) {
    parallel::matmul_tn(a, b, out, k, m, n);
  } else {
    serial::matmul_tn(a, b, out, k, m, n);
  }
}

double frobenius_norm(std::span<const double> x) {
  long double acc = 0.0L;
  for (double v : x) acc += static_cast<long double>(v) * v;
  return static_cast<double>(std::sqrt(acc));
}

}  // namespace kernels
}  // namespace gradroute
