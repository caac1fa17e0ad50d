#include "ghiest/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ghiest {

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  const double n = static_cast<double>(sorted.size());
  const double pos = n * p - 0.5;  // zero-based
  if (pos <= 0.0) return sorted.front();
  if (pos >= n - 1.0) return sorted.back();
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, p);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

double mad(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  const double m = median(v);
  for (auto& x : v) x = std::abs(x - m);
  return median(std::move(v));
}

}  // namespace ghiest
