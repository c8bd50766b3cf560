#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace edet {

using Vec = std::vector<double>;

/// Selects between the serial reference loop and the OpenMP kernel for
/// data-parallel batch operations. Both paths produce bit-identical results.
enum class Execution { serial, parallel };

/// Number of OpenMP worker threads used by Execution::parallel paths.
void set_thread_count(int threads);
int thread_count();

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace edet
