#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

namespace smooth {

struct MeanStd {
  double mean = 0.0;
  std::optional<double> std_dev;  // absent below 2 values
};

/// Mean and sample (n-1) standard deviation.
MeanStd mean_std(const std::vector<double>& values);

/// Runs fn(0..n-1) on up to `threads` workers; results must be written to
/// per-index slots so assembly stays deterministic.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace smooth
