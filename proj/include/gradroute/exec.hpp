#pragma once

#include <cstddef>

namespace gradroute {

// Selects the serial reference kernels or their OpenMP counterparts. Both
// produce bit-identical results: the parallel versions split work across
// independent outputs and keep each output's accumulation order.
enum class Exec { serial, parallel };

// Worker count for parallel sections. Honors GRADROUTE_WORKERS when set to a
// positive integer, otherwise the OpenMP default.
int worker_count();

}  // namespace gradroute
