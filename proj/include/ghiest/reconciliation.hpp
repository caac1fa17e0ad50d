#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ghiest/core_data.hpp"
#include "ghiest/solar_geometry.hpp"

namespace ghiest {

struct ReconciliationConfig {
  double bin_deg = 2.0;
  std::size_t min_samples = 10;
  double quantile = 0.01;
  double power_floor = 0.02;  // fraction of estimated Pnom below which samples are skipped
  double bandwidth_deg = 6.0;
  double floor = 0.02;
  double k_q = 1.5;

  void validate() const;
};

/// Relative clear-sky error over (azimuth, zenith) bins. Azimuth covers
/// [0, 360) deg, zenith [0, 90) deg.
struct ShadowMap {
  double bin_deg = 2.0;
  int n_azimuth = 0;
  int n_zenith = 0;
  std::vector<double> values;  // row-major, azimuth index outer
  std::vector<bool> valid;

  ShadowMap() = default;
  explicit ShadowMap(double bin_deg);

  std::size_t index(int ia, int iz) const { return static_cast<std::size_t>(ia) * n_zenith + iz; }
  // Bin holding the sun position; nullopt below the horizon.
  std::optional<std::size_t> bin_of(const SolarPosition& sp) const;
  // Value at the sun position, nullopt for invalid bins or night.
  std::optional<double> lookup(const SolarPosition& sp) const;
  std::size_t valid_count() const;
};

// 1% quantile of (p_hat_clear - P) / P per bin, over daylight samples with
// usable power of at least power_floor * pnom. Bins with fewer than
// min_samples samples are invalid.
ShadowMap build_shadow_map(const PlantSeries& plant, std::span<const double> p_hat_clear, double pnom,
                           std::span<const SolarPosition> sun, const ReconciliationConfig& cfg = {});

// Gaussian kernel smoothing over valid bins (periodic in azimuth), then a
// lower floor. Invalid bins stay invalid.
ShadowMap smooth_threshold_map(const ShadowMap& map, double bandwidth_deg = 6.0, double floor = 0.02);

// Rows are timesteps, columns plants. available[i][t] marks plant i having data at t.
// Each row with at least one available plant sums to one.
Eigen::MatrixXd trust_weights(std::span<const ShadowMap> maps, std::span<const SolarPosition> sun,
                              const std::vector<std::vector<bool>>& available, double floor = 0.02);
Eigen::MatrixXd uniform_trust(const std::vector<std::vector<bool>>& available);

// true = keep. Errors outside [Q1 - k_q IQ, Q3 + k_q IQ] are gated; with two
// or fewer values everything is kept.
std::vector<bool> tukey_gate(std::span<const double> errors, double k_q = 1.5);

void write_shadow_map_csv(const std::filesystem::path& path, const ShadowMap& map);

}  // namespace ghiest
