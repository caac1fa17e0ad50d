#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ghiest {

/// Errors raised on invalid input data or configuration.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Instant = std::chrono::sys_seconds;
using Seconds = std::chrono::seconds;

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

// ISO-8601 UTC, e.g. "2016-03-01T12:30:00Z". A trailing "Z" or "+00:00" is
// accepted, as is a space instead of 'T'. Throws InputError.
Instant parse_instant(std::string_view text);
std::string format_instant(Instant t);
int day_of_year(Instant t);

struct Site {
  double latitude = 0.0;   // degrees
  double longitude = 0.0;  // degrees
  double altitude = 0.0;   // meters
  double albedo = 0.2;

  void validate() const;
};

struct PlantSeries {
  std::string plant_id;
  std::vector<Instant> timestamps;
  std::vector<double> power;        // W, kMissing where absent
  std::vector<double> temperature;  // degC, kMissing where absent
  Seconds period{0};

  std::size_t size() const { return timestamps.size(); }
  bool usable(std::size_t t) const { return !is_missing(power[t]) && !is_missing(temperature[t]); }
  void validate() const;
};

struct AlignedDataset {
  std::vector<Instant> timestamps;
  std::vector<PlantSeries> plants;
  Site site;

  std::size_t steps() const { return timestamps.size(); }
  Seconds period() const { return plants.empty() ? Seconds{0} : plants.front().period; }
};

// Plant CSV: header `timestamp,power_w,temp_c`. Unparseable or empty fields
// become missing markers. Gaps that are whole multiples of the sampling period
// are filled with missing rows. `expected_period` pins the period when given.
PlantSeries load_plant_csv(const std::filesystem::path& path, const std::string& plant_id,
                           std::optional<Seconds> expected_period = std::nullopt);
void write_plant_csv(const std::filesystem::path& path, const PlantSeries& series);

AlignedDataset align(std::span<const PlantSeries> plants, const Site& site);

struct SiteConfig {
  Site site;
  std::optional<Seconds> sampling;
};

// Key-value site file: latitude, longitude, altitude, albedo, sampling_seconds.
SiteConfig load_site_config(const std::filesystem::path& path);

// Shortest round-tripping decimal representation; empty for missing.
std::string format_number(double v);
// Empty or unparseable text yields kMissing.
double parse_number(std::string_view text);

}  // namespace ghiest
