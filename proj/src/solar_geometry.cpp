#include "ghiest/solar_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

namespace ghiest {

namespace {

double wrap_degrees(double deg) {
  deg = std::fmod(deg, 360.0);
  return deg < 0.0 ? deg + 360.0 : deg;
}

}  // namespace

SolarPosition sun_position(Instant t, const Site& site) {
  const double unix_seconds = static_cast<double>(t.time_since_epoch().count());
  const double julian_day = unix_seconds / 86400.0 + 2440587.5;
  const double n = julian_day - 2451545.0;
  const double hour_utc = std::fmod(unix_seconds, 86400.0) / 3600.0 + (unix_seconds < 0 ? 24.0 : 0.0);

  // Ecliptic coordinates.
  const double mean_longitude = wrap_degrees(280.460 + 0.9856474 * n);
  const double mean_anomaly = wrap_degrees(357.528 + 0.9856003 * n) * kDeg;
  const double ecliptic_longitude =
      wrap_degrees(mean_longitude + 1.915 * std::sin(mean_anomaly) + 0.020 * std::sin(2.0 * mean_anomaly)) * kDeg;
  const double obliquity = (23.439 - 0.0000004 * n) * kDeg;

  // Celestial coordinates.
  const double right_ascension =
      std::atan2(std::cos(obliquity) * std::sin(ecliptic_longitude), std::cos(ecliptic_longitude));
  const double declination = std::asin(std::sin(obliquity) * std::sin(ecliptic_longitude));

  // Local coordinates.
  const double gmst = std::fmod(6.697375 + 0.0657098242 * n + hour_utc, 24.0);
  const double lmst = wrap_degrees((gmst + site.longitude / 15.0) * 15.0);
  double hour_angle = lmst - right_ascension / kDeg;
  if (hour_angle < -180.0) hour_angle += 360.0;
  if (hour_angle > 180.0) hour_angle -= 360.0;
  hour_angle *= kDeg;

  const double lat = site.latitude * kDeg;
  const double sin_el = std::sin(declination) * std::sin(lat) + std::cos(declination) * std::cos(lat) * std::cos(hour_angle);
  const double elevation = std::asin(std::clamp(sin_el, -1.0, 1.0));

  double azimuth = std::atan2(-std::cos(declination) * std::sin(hour_angle),
                              std::sin(declination) * std::cos(lat) -
                                  std::cos(declination) * std::cos(hour_angle) * std::sin(lat));
  if (azimuth < 0.0) azimuth += 2.0 * kPi;
  if (azimuth >= 2.0 * kPi) azimuth = 0.0;

  SolarPosition sp;
  sp.azimuth = azimuth;
  sp.zenith = kPi / 2 - elevation;
  sp.elevation = kPi / 2 - sp.zenith;
  return sp;
}

std::vector<SolarPosition> sun_positions(std::span<const Instant> ts, const Site& site) {
  std::vector<SolarPosition> out;
  out.reserve(ts.size());
  for (auto t : ts) out.push_back(sun_position(t, site));
  return out;
}

double extraterrestrial_normal(int day_of_year) {
  if (day_of_year < 1 || day_of_year > 366) throw InputError("day of year out of range [1, 366]");
  return kSolarConstant * (1.0 + 0.033 * std::cos(2.0 * kPi * day_of_year / 365.0));
}

double cos_incidence(const SolarPosition& sp, const Orientation& o) {
  const double c = std::cos(sp.zenith) * std::cos(o.tilt) +
                   std::sin(sp.zenith) * std::sin(o.tilt) * std::cos(sp.azimuth - o.azimuth);
  return std::clamp(c, -1.0, 1.0);
}

double angle_of_incidence(const SolarPosition& sp, const Orientation& o) {
  if (o.tilt == 0.0) return sp.zenith;
  return std::acos(cos_incidence(sp, o));
}

std::optional<double> relative_airmass(double zenith) {
  if (!(zenith < kPi / 2)) return std::nullopt;
  const double z_deg = zenith / kDeg;
  return 1.0 / (std::cos(zenith) + 0.50572 * std::pow(96.07995 - z_deg, -1.6364));
}

double pressure_at_altitude(double altitude) {
  return kSeaLevelPressure * std::pow(1.0 - 2.25577e-5 * altitude, 5.25588);
}

double ineichen_ghi(double zenith, int day_of_year, double altitude, double linke_turbidity) {
  auto am = relative_airmass(zenith);
  if (!am) return 0.0;
  const double am_abs = *am * pressure_at_altitude(altitude) / kSeaLevelPressure;
  const double fh1 = std::exp(-altitude / 8000.0);
  const double fh2 = std::exp(-altitude / 1250.0);
  const double cg1 = 5.09e-5 * altitude + 0.868;
  const double cg2 = 3.92e-5 * altitude + 0.0387;
  const double ghi = cg1 * extraterrestrial_normal(day_of_year) * std::cos(zenith) *
                     std::exp(-cg2 * am_abs * (fh1 + fh2 * (linke_turbidity - 1.0)));
  return std::max(ghi, 0.0);
}

ClearSkySeries clearsky_ghi(std::span<const Instant> ts, const Site& site, double linke_turbidity,
                            const std::optional<std::filesystem::path>& override_csv) {
  if (override_csv) return load_clearsky_csv(*override_csv, ts);
  ClearSkySeries out;
  out.ghi_clear.reserve(ts.size());
  for (auto t : ts) {
    auto sp = sun_position(t, site);
    out.ghi_clear.push_back(ineichen_ghi(sp.zenith, day_of_year(t), site.altitude, linke_turbidity));
  }
  return out;
}

ClearSkySeries load_clearsky_csv(const std::filesystem::path& path, std::span<const Instant> ts) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open clear-sky file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("timestamp,ghi_clear_wm2", 0) != 0)
    throw InputError("clear-sky file '" + path.string() + "': expected header timestamp,ghi_clear_wm2");
  std::unordered_map<long long, double> values;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw InputError("clear-sky file: malformed row '" + line + "'");
    auto t = parse_instant(std::string_view(line).substr(0, comma));
    values[t.time_since_epoch().count()] = parse_number(std::string_view(line).substr(comma + 1));
  }
  ClearSkySeries out;
  out.ghi_clear.reserve(ts.size());
  for (auto t : ts) {
    auto it = values.find(t.time_since_epoch().count());
    if (it == values.end() || is_missing(it->second))
      throw InputError("clear-sky file is missing timestamp " + format_instant(t));
    out.ghi_clear.push_back(it->second);
  }
  return out;
}

}  // namespace ghiest
