#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gradroute/exec.hpp"
#include "gradroute/model.hpp"
#include "gradroute/trajectory.hpp"

namespace gradroute {

inline constexpr const char* kInternalProbeSource = "internal-probe";

struct GradientVector {
  std::string trajectory_id;
  std::vector<double> norms;
  std::vector<std::string> group_names;
  std::vector<std::uint64_t> group_param_counts;
  double loss_value = 0.0;
  std::string source = kInternalProbeSource;

  std::size_t size() const { return norms.size(); }
  // Throws InputError on length mismatch, negative or non-finite norms.
  void validate() const;

  bool operator==(const GradientVector&) const = default;
};

// Mean next-token negative log-likelihood over positions whose next token is
// a response token. Causal; padding never attends and never counts.
// Throws InputError for out-of-vocabulary tokens, sequences longer than
// max_context, or trajectories with no loss target.
double forward_loss(const ProbeModel& model, const Trajectory& trajectory,
                    Exec exec = Exec::serial);

// One forward and one backward pass. Each projection's weight gradient is
// materialized into a single reused scratch buffer, reduced to its Frobenius
// norm and discarded before the next projection is visited. The model is not
// modified.
GradientVector probe_gradients(const ProbeModel& model, const Trajectory& trajectory,
                               Exec exec = Exec::serial);

// Probes every trajectory. With Exec::parallel trajectories are fanned out
// across workers (each probe runs the serial kernels); results are returned
// in input order either way.
std::vector<GradientVector> probe_corpus(const ProbeModel& model,
                                         std::span<const Trajectory> trajectories,
                                         Exec exec = Exec::serial);

struct MatrixEntry {
  std::size_t row = 0;
  std::size_t col = 0;
};

struct FiniteDifferenceResult {
  double max_relative_error = 0.0;
  // Set when some sampled entry produced bitwise-equal losses at w+h and w-h
  // while the analytic gradient was nonzero: the step is too small to resolve.
  bool degenerate_step = false;
  std::vector<double> analytic;
  std::vector<double> numeric;
};

// Relative error is |a - n| / max(|a|, |n|, kFiniteDifferenceFloor).
inline constexpr double kFiniteDifferenceFloor = 1e-6;

// Compares the analytic gradient of `group_index` against central
// differences at the sampled entries. Entries are perturbed in place and
// restored to their exact original bits. Throws InputError for step <= 0 or
// out-of-range coordinates.
FiniteDifferenceResult finite_difference_check(ProbeModel& model, const Trajectory& trajectory,
                                               std::size_t group_index,
                                               std::span<const MatrixEntry> entries,
                                               double step);

// Full gradient of one probed group, for verification code only.
Matrix group_gradient(const ProbeModel& model, const Trajectory& trajectory,
                      std::size_t group_index);

namespace detail {
// Test hook: probes with the loss multiplied by `loss_scale`. Not used by any
// pipeline path.
GradientVector probe_gradients_scaled(const ProbeModel& model, const Trajectory& trajectory,
                                      double loss_scale, Exec exec = Exec::serial);
}  // namespace detail

}  // namespace gradroute
