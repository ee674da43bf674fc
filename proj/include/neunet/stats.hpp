#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "neunet/errors.hpp"

namespace neunet {

/// q-quantile (q in [0, 1]) with linear interpolation between order
/// statistics at position q * (n - 1).
inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw ArgumentError("percentile of an empty set");
  if (q < 0.0 || q > 1.0) throw ArgumentError("percentile: q outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

/// Even counts average the two central order statistics.
inline double median(std::vector<double> values) { return percentile(std::move(values), 0.5); }

}  // namespace neunet
