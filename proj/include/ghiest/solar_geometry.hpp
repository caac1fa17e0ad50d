#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "ghiest/core_data.hpp"

namespace ghiest {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDeg = kPi / 180.0;
inline constexpr double kSolarConstant = 1367.0;   // W/m2
inline constexpr double kSeaLevelPressure = 101325.0;  // Pa

/// Sun position. Azimuth is measured from north, clockwise through east.
struct SolarPosition {
  double azimuth = 0.0;    // rad, [0, 2pi)
  double zenith = 0.0;     // rad, [0, pi]
  double elevation = 0.0;  // rad, pi/2 - zenith

  bool daylight() const { return zenith < kPi / 2; }
};

/// Module plane orientation, azimuth measured like the sun azimuth.
struct Orientation {
  double tilt = 0.0;     // rad, [0, pi/2]
  double azimuth = 0.0;  // rad, [0, 2pi)
};

// Geometric (unrefracted) sun position after Michalsky (1988), the
// Astronomical Almanac low-precision ephemeris. Accurate to ~0.01 deg over
// 1950-2050.
SolarPosition sun_position(Instant t, const Site& site);
std::vector<SolarPosition> sun_positions(std::span<const Instant> ts, const Site& site);

// E0 = 1367 (1 + 0.033 cos(2 pi doy / 365)). Throws InputError outside [1, 366].
double extraterrestrial_normal(int day_of_year);

double cos_incidence(const SolarPosition& sp, const Orientation& o);
double angle_of_incidence(const SolarPosition& sp, const Orientation& o);

// Kasten & Young (1989). nullopt when the sun is at or below the horizon.
std::optional<double> relative_airmass(double zenith);

// Barometric pressure (Pa) at the given altitude (m).
double pressure_at_altitude(double altitude);

struct ClearSkySeries {
  std::vector<double> ghi_clear;  // W/m2
};

// Ineichen-Perez clear-sky GHI for one instant.
double ineichen_ghi(double zenith, int day_of_year, double altitude, double linke_turbidity);

// Clear-sky GHI at every timestamp. With `override_csv`, the file
// (header `timestamp,ghi_clear_wm2`) is returned verbatim and must cover all
// timestamps.
ClearSkySeries clearsky_ghi(std::span<const Instant> ts, const Site& site, double linke_turbidity = 3.0,
                            const std::optional<std::filesystem::path>& override_csv = std::nullopt);

ClearSkySeries load_clearsky_csv(const std::filesystem::path& path, std::span<const Instant> ts);

}  // namespace ghiest
