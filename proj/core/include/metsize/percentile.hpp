#pragma once

#include <span>

namespace metsize {

// Percentile by linear interpolation between closest order statistics
// (R type 7): position h = 1 + prob * (N - 1) in the sorted sample.
// prob in [0, 1]; values must be nonempty. The input is not modified.
double percentile(std::span<const double> values, double prob);

}  // namespace metsize
