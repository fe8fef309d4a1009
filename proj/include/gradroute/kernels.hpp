#pragma once

#include <cstddef>
#include <span>

#include "gradroute/exec.hpp"

// Dense row-major kernels used by the probe model. Shapes are passed
// explicitly; spans must be at least rows*cols long.
namespace gradroute::kernels {

// out[m x n] = a[m x k] * b[n x k]^T   (activation times weight^T)
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t m, std::size_t k, std::size_t n, Exec exec = Exec::serial);

// out[m x n] = a[m x k] * b[k x n]     (upstream grad times weight)
void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t m, std::size_t k, std::size_t n, Exec exec = Exec::serial);

// out[m x n] = a[k x m]^T * b[k x n]   (weight gradient: dY^T X)
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t k, std::size_t m, std::size_t n, Exec exec = Exec::serial);

// sqrt(sum x^2), accumulated in extended precision.
double frobenius_norm(std::span<const double> x);

namespace serial {
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t m, std::size_t k, std::size_t n);
void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t m, std::size_t k, std::size_t n);
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t k, std::size_t m, std::size_t n);
}  // namespace serial

namespace parallel {
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t m, std::size_t k, std::size_t n);
void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t m, std::size_t k, std::size_t n);
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t k, std::size_t m, std::size_t n);
}  // namespace parallel

}  // namespace gradroute::kernels
