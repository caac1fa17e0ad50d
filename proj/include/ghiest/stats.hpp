#pragma once

#include <span>
#include <vector>

namespace ghiest {

// Quantile of already sorted data by linear interpolation between order
// statistics placed at plotting positions (k - 0.5) / n (Hazen). Positions
// outside [0.5/n, 1 - 0.5/n] clamp to the extreme values.
double quantile_sorted(std::span<const double> sorted, double p);
double quantile(std::vector<double> values, double p);

double median(std::vector<double> values);
// Median absolute deviation from the median (unscaled).
double mad(std::span<const double> values);

}  // namespace ghiest
