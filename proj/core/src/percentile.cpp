#include "metsize/percentile.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "metsize/error.hpp"

namespace metsize {

double percentile(std::span<const double> values, double prob) {
  require(!values.empty(), "percentile: empty sample");
  require(prob >= 0.0 && prob <= 1.0, "percentile: prob must lie in [0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= sorted.size() || frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace metsize
