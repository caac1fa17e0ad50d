#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ghiest/core_data.hpp"
#include "ghiest/orientation_id.hpp"
#include "ghiest/pv_proxy.hpp"
#include "ghiest/solar_geometry.hpp"

namespace ghiest {

// ---------------------------------------------------------------- metrics

struct ErrorSummary {
  std::size_t n = 0;
  double rmse = 0.0;
  double bias = 0.0;  // mean(est - ref)
  double std = 0.0;   // population standard deviation of est - ref
};

struct DailyMetrics {
  std::string date;  // YYYY-MM-DD, UTC
  ErrorSummary summary;
};

struct MetricReport {
  double k_n = 0.0;  // mean of the strictly positive reference values
  double nrmse = 0.0;
  ErrorSummary overall;
  std::vector<DailyMetrics> daily;
  std::vector<std::pair<double, double>> abs_rel_error_quantiles;  // (p, value) over ref > 0
};

// Pairs where either value is missing are skipped.
ErrorSummary summarize_errors(std::span<const double> est, std::span<const double> ref);
MetricReport normalized_rmse(std::span<const double> est, std::span<const double> ref);
std::vector<DailyMetrics> bias_std_daily(std::span<const double> est, std::span<const double> ref,
                                         std::span<const Instant> ts);
MetricReport evaluate(std::span<const double> est, std::span<const double> ref, std::span<const Instant> ts);

struct Series {
  std::vector<Instant> timestamps;
  std::vector<double> values;
};

// Means over consecutive blocks of `period` aligned to the epoch; a block
// with no present value is missing.
Series block_average(std::span<const Instant> ts, std::span<const double> values, Seconds period);

// ---------------------------------------------------------------- synthetic data

struct SyntheticField {
  Orientation orientation;
  double pnom = 0.0;  // W
};

struct ShadowGate {
  double azimuth_min = 0.0, azimuth_max = 0.0;  // rad
  double zenith_min = 0.0, zenith_max = 0.0;    // rad
  double transmission = 0.0;                    // power factor inside the sector, [0, 1]
  int doy_start = 1, doy_end = 366;             // active window, inclusive; may wrap the year end

  bool covers(const SolarPosition& sp, int doy) const;
};

struct Corruption {
  double fraction = 0.0;  // share of daytime steps affected
  double factor = 1.0;    // power multiplier at affected steps
};

struct SyntheticPlant {
  std::string id;
  std::vector<SyntheticField> fields;
  std::vector<ShadowGate> shadows;
  std::optional<double> curtailment;  // cap as a fraction of the nominal power
  Corruption corruption;
};

struct CloudModel {
  double mean_logit = 0.0;
  double sd_logit = 8.0;  // stationary standard deviation; large values give a mostly clear/overcast sky
  double correlation_minutes = 60.0;
  double margin = 0.15;       // overshoot that makes exact 0 and 1 attenuations reachable
  double min_transmission = 0.1;
  bool enabled = true;
};

struct TemperatureModel {
  double mean = 15.0;
  double seasonal_amplitude = 8.0;
  double diurnal_amplitude = 5.0;
};

struct SyntheticSpec {
  // Timestamp grid, used by the file-driven entry points.
  Instant start = parse_instant("2021-06-01T00:00:00Z");
  int days = 3;
  Seconds period{600};

  std::vector<SyntheticPlant> plants;
  CloudModel cloud;
  TemperatureModel temperature;
  double noise_sigma = 0.0;  // relative
  double linke_turbidity = 3.0;

  void validate() const;
};

struct SyntheticDataset {
  AlignedDataset dataset;
  std::vector<SolarPosition> sun;
  ClearSkySeries clear;
  std::vector<double> ghi_true;
  std::vector<bool> sky_clear;  // attenuation exactly 1 and sun up
  std::vector<PlantOmega> omega_true;
};

// Clear-sky GHI attenuated by a seeded logit AR(1) process; plant power from
// the proxy chain per field, then shadow gates, corruption, noise and cap.
SyntheticDataset synthesize(const SyntheticSpec& spec, const Site& site, std::span<const Instant> ts,
                            std::uint64_t seed, const ProxyParams& p = {});

// Regular grid of `days` days starting at `start`.
std::vector<Instant> regular_timestamps(Instant start, int days, Seconds period);

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);

}  // namespace ghiest
