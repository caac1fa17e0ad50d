#include <algorithm>
#include <cmath>
#include <numeric>

#include "ghiest/orientation_id.hpp"
#include "ghiest/stats.hpp"

namespace ghiest {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double log_normal_pdf(double x, double mean, double sigma) {
  const double z = (x - mean) / sigma;
  return -0.5 * z * z - std::log(sigma) - kLogSqrt2Pi;
}

}  // namespace

std::optional<Gmm2> fit_gmm2(std::span<const double> samples, int max_iterations, double tolerance) {
  if (samples.size() < kGmmMinSamples) return std::nullopt;
  const double n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double var = 0.0;
  for (double x : samples) var += (x - mean) * (x - mean);
  var /= n;

  Gmm2 fit;
  if (var <= 1e-12 * (1.0 + mean * mean)) {
    fit.degenerate = true;
    fit.high = {mean, 0.0, 1.0};
    fit.low = {mean, 0.0, 0.0};
    return fit;
  }

  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  double mu[2] = {quantile_sorted(sorted, 0.25), quantile_sorted(sorted, 0.75)};
  if (mu[0] == mu[1]) {
    mu[0] = sorted.front();
    mu[1] = sorted.back();
  }
  const double var_floor = std::max(1e-6 * var, 1e-300);
  double sd[2] = {std::sqrt(var), std::sqrt(var)};
  double w[2] = {0.5, 0.5};

  std::vector<double> resp(samples.size());  // responsibility of component 1
  double ll_prev = -std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < max_iterations; ++it) {
    // E step
    double ll = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double a = std::log(w[0]) + log_normal_pdf(samples[i], mu[0], sd[0]);
      const double b = std::log(w[1]) + log_normal_pdf(samples[i], mu[1], sd[1]);
      const double m = std::max(a, b);
      const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
      resp[i] = std::exp(b - lse);
      ll += lse;
    }
    // M step
    double r1 = 0.0, s1 = 0.0, s0 = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      r1 += resp[i];
      s1 += resp[i] * samples[i];
      s0 += (1.0 - resp[i]) * samples[i];
    }
    const double r0 = n - r1;
    if (r0 <= 1e-12 || r1 <= 1e-12) {
      // One component absorbed everything.
      fit.degenerate = true;
      fit.high = {mean, std::sqrt(var), 1.0};
      fit.low = {mean, std::sqrt(var), 0.0};
      fit.iterations = it;
      fit.log_likelihood = ll;
      return fit;
    }
    mu[0] = s0 / r0;
    mu[1] = s1 / r1;
    double v0 = 0.0, v1 = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      v0 += (1.0 - resp[i]) * (samples[i] - mu[0]) * (samples[i] - mu[0]);
      v1 += resp[i] * (samples[i] - mu[1]) * (samples[i] - mu[1]);
    }
    sd[0] = std::sqrt(std::max(v0 / r0, var_floor));
    sd[1] = std::sqrt(std::max(v1 / r1, var_floor));
    w[0] = r0 / n;
    w[1] = r1 / n;

    fit.log_likelihood = ll;
    if (std::abs(ll - ll_prev) <= tolerance * std::max(1.0, std::abs(ll))) {
      ++it;
      break;
    }
    ll_prev = ll;
  }
  fit.iterations = it;
  GaussianComponent c0{mu[0], sd[0], w[0]}, c1{mu[1], sd[1], w[1]};
  if (c0.mean <= c1.mean) {
    fit.low = c0;
    fit.high = c1;
  } else {
    fit.low = c1;
    fit.high = c0;
  }
  return fit;
}

}  // namespace ghiest
