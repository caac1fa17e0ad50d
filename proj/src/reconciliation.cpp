#include "ghiest/reconciliation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ghiest/stats.hpp"

namespace ghiest {

void ReconciliationConfig::validate() const {
  if (!(bin_deg > 0.0) || 90.0 / bin_deg < 1.0) throw InputError("reconciliation: bin_deg must be in (0, 90]");
  if (!(quantile > 0.0 && quantile < 1.0)) throw InputError("reconciliation: quantile must be in (0, 1)");
  if (!(power_floor >= 0.0)) throw InputError("reconciliation: power_floor must be non-negative");
  if (!(bandwidth_deg > 0.0)) throw InputError("reconciliation: bandwidth_deg must be positive");
  if (!(floor > 0.0)) throw InputError("reconciliation: floor must be positive");
  if (!(k_q > 0.0)) throw InputError("reconciliation: k_q must be positive");
}

ShadowMap::ShadowMap(double bin)
    : bin_deg(bin),
      n_azimuth(static_cast<int>(std::ceil(360.0 / bin - 1e-9))),
      n_zenith(static_cast<int>(std::ceil(90.0 / bin - 1e-9))),
      values(static_cast<std::size_t>(n_azimuth) * n_zenith, 0.0),
      valid(values.size(), false) {}

std::optional<std::size_t> ShadowMap::bin_of(const SolarPosition& sp) const {
  if (!sp.daylight()) return std::nullopt;
  const int ia = std::clamp(static_cast<int>(std::floor(sp.azimuth / kDeg / bin_deg)), 0, n_azimuth - 1);
  const int iz = std::clamp(static_cast<int>(std::floor(sp.zenith / kDeg / bin_deg)), 0, n_zenith - 1);
  return index(ia, iz);
}

std::optional<double> ShadowMap::lookup(const SolarPosition& sp) const {
  const auto b = bin_of(sp);
  if (!b || !valid[*b]) return std::nullopt;
  return values[*b];
}

std::size_t ShadowMap::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), true));
}

ShadowMap build_shadow_map(const PlantSeries& plant, std::span<const double> p_hat_clear, double pnom,
                           std::span<const SolarPosition> sun, const ReconciliationConfig& cfg) {
  if (p_hat_clear.size() != plant.size() || sun.size() != plant.size())
    throw InputError("shadow map: series lengths do not match");
  ShadowMap map(cfg.bin_deg);
  std::vector<std::vector<double>> samples(map.values.size());
  const double p_min = cfg.power_floor * pnom;
  for (std::size_t t = 0; t < plant.size(); ++t) {
    if (!plant.usable(t)) continue;
    const double p = plant.power[t];
    if (!(p > 0.0) || p < p_min) continue;
    if (const auto b = map.bin_of(sun[t])) samples[*b].push_back((p_hat_clear[t] - p) / p);
  }
  for (std::size_t b = 0; b < samples.size(); ++b) {
    if (samples[b].size() < std::max<std::size_t>(cfg.min_samples, 1)) continue;
    map.values[b] = quantile(std::move(samples[b]), cfg.quantile);
    map.valid[b] = true;
  }
  return map;
}

ShadowMap smooth_threshold_map(const ShadowMap& map, double bandwidth_deg, double floor) {
  ShadowMap out = map;
  const int reach = static_cast<int>(std::ceil(3.0 * bandwidth_deg / map.bin_deg));
  std::vector<double> kernel(2 * reach + 1);
  for (int k = -reach; k <= reach; ++k) {
    const double d = k * map.bin_deg / bandwidth_deg;
    kernel[k + reach] = std::exp(-0.5 * d * d);
  }
  for (int ia = 0; ia < map.n_azimuth; ++ia)
    for (int iz = 0; iz < map.n_zenith; ++iz) {
      const auto b = map.index(ia, iz);
      if (!map.valid[b]) continue;
      double num = 0.0, den = 0.0;
      for (int da = -reach; da <= reach; ++da) {
        const int ja = ((ia + da) % map.n_azimuth + map.n_azimuth) % map.n_azimuth;
        for (int dz = -reach; dz <= reach; ++dz) {
          const int jz = iz + dz;
          if (jz < 0 || jz >= map.n_zenith) continue;
          const auto c = map.index(ja, jz);
          if (!map.valid[c]) continue;
          const double w = kernel[da + reach] * kernel[dz + reach];
          num += w * map.values[c];
          den += w;
        }
      }
      out.values[b] = std::max(num / den, floor);
    }
  return out;
}

Eigen::MatrixXd trust_weights(std::span<const ShadowMap> maps, std::span<const SolarPosition> sun,
                              const std::vector<std::vector<bool>>& available, double floor) {
  if (maps.size() != available.size()) throw InputError("trust weights: one map per plant required");
  const auto n = static_cast<Eigen::Index>(maps.size());
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sun.size()), n);
  for (std::size_t t = 0; t < sun.size(); ++t) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!available[i][t]) continue;
      const auto re = maps[i].lookup(sun[t]);
      const double d = 1.0 / std::max(re.value_or(floor), floor);
      f(t, i) = d;
      sum += d;
    }
    if (sum > 0.0) f.row(t) /= sum;
  }
  return f;
}

Eigen::MatrixXd uniform_trust(const std::vector<std::vector<bool>>& available) {
  const auto n = static_cast<Eigen::Index>(available.size());
  const std::size_t steps = available.empty() ? 0 : available.front().size();
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(steps), n);
  for (std::size_t t = 0; t < steps; ++t) {
    double count = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) count += available[i][t] ? 1.0 : 0.0;
    if (count == 0.0) continue;
    for (Eigen::Index i = 0; i < n; ++i)
      if (available[i][t]) f(t, i) = 1.0 / count;
  }
  return f;
}

std::vector<bool> tukey_gate(std::span<const double> errors, double k_q) {
  std::vector<bool> keep(errors.size(), true);
  if (errors.size() <= 2) return keep;
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  const double q1 = quantile_sorted(sorted, 0.25);
  const double q3 = quantile_sorted(sorted, 0.75);
  const double iq = q3 - q1;
  const double lo = q1 - k_q * iq, hi = q3 + k_q * iq;
  for (std::size_t i = 0; i < errors.size(); ++i) keep[i] = errors[i] >= lo && errors[i] <= hi;
  return keep;
}

void write_shadow_map_csv(const std::filesystem::path& path, const ShadowMap& map) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "azimuth_bin,zenith_bin,value,valid\n";
  for (int ia = 0; ia < map.n_azimuth; ++ia)
    for (int iz = 0; iz < map.n_zenith; ++iz) {
      const auto b = map.index(ia, iz);
      out << format_number(ia * map.bin_deg) << ',' << format_number(iz * map.bin_deg) << ','
          << (map.valid[b] ? format_number(map.values[b]) : std::string()) << ',' << (map.valid[b] ? 1 : 0) << '\n';
    }
}

}  // namespace ghiest
