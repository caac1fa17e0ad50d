// Helpers shared by the unit and acceptance tests.
#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "ghiest/evaluation.hpp"
#include "ghiest/solar_geometry.hpp"

namespace ghiest::testing {

inline const Site kBasel{47.5, 7.6, 300.0, 0.2};

inline Orientation deg(double tilt, double azimuth) { return {tilt * kDeg, azimuth * kDeg}; }

inline SyntheticPlant make_plant(std::string id, std::vector<SyntheticField> fields) {
  SyntheticPlant p;
  p.id = std::move(id);
  p.fields = std::move(fields);
  return p;
}

// Four plants: south, east-west, south-south-west shallow and south-south-east steep.
inline std::vector<SyntheticPlant> four_plants() {
  return {make_plant("a", {{deg(30, 180), 6600}}),
          make_plant("b", {{deg(20, 90), 4000}, {deg(20, 270), 4000}}),
          make_plant("c", {{deg(10, 200), 9000}}),
          make_plant("d", {{deg(40, 160), 10700}})};
}

inline SyntheticSpec cloudy_spec(std::vector<SyntheticPlant> plants) {
  SyntheticSpec spec;
  spec.plants = std::move(plants);
  spec.cloud.mean_logit = 0.0;
  spec.cloud.sd_logit = 8.0;
  return spec;
}

inline SyntheticDataset make_dataset(const SyntheticSpec& spec, const std::string& start, int days, int period_s,
                                     std::uint64_t seed, const Site& site = kBasel) {
  const auto ts = regular_timestamps(parse_instant(start), days, Seconds{period_s});
  return synthesize(spec, site, ts, seed);
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "ghiest_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::filesystem::path data_file(const std::string& name) {
  return std::filesystem::path(GHIEST_TEST_DATA) / name;
}

inline double daytime_rmse(const std::vector<double>& est, const SyntheticDataset& d) {
  double sq = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < est.size(); ++t) {
    if (!d.sun[t].daylight() || is_missing(est[t])) continue;
    sq += (est[t] - d.ghi_true[t]) * (est[t] - d.ghi_true[t]);
    ++n;
  }
  return n ? std::sqrt(sq / static_cast<double>(n)) : 0.0;
}

}  // namespace ghiest::testing

#include "ghiest/pv_proxy.hpp"

namespace ghiest::testing {

// Regime of every piecewise branch in the forward chain at one GHI value.
// Finite differences are only compared where the regime is the same across
// the whole stencil.
inline std::vector<int> chain_regime(double ghi, const SolarPosition& sp, int doy, double pressure, double t_amb,
                                     double albedo, std::span<const Orientation> orientations,
                                     std::span<const double> omega, const ProxyParams& p) {
  std::vector<int> r;
  if (!(ghi > 0.0) || !sp.daylight()) return {-1};
  const double e0 = extraterrestrial_normal(doy);
  const double kt_raw = ghi / (e0 * std::max(std::cos(sp.zenith), 0.065));
  r.push_back(kt_raw <= 0.6);
  r.push_back(kt_raw >= 1.0);
  const double dni = disc_dni(ghi, sp, doy, pressure);
  r.push_back(dni <= 0.0);
  r.push_back(dni >= e0);
  r.push_back(ghi - std::cos(sp.zenith) * dni <= 0.0);
  const double dhi = dhi_from(ghi, sp, dni);
  for (std::size_t j = 0; j < orientations.size(); ++j) {
    if (!omega.empty() && omega[j] == 0.0) continue;
    const auto c = transpose_hay_davies(ghi, dhi, dni, sp, orientations[j], e0, albedo);
    const double i_aoi = apply_iam(c, angle_of_incidence(sp, orientations[j]), p);
    const double i_aoit = apply_temperature(i_aoi, t_amb, p);
    r.push_back(i_aoit >= p.i_min);
    if (i_aoit > 0.0) {
      const double lr = std::log(i_aoit / p.i_stc);
      const double eta = p.k2 + p.k3 * lr + p.k4 * lr * lr;
      r.push_back(eta <= 0.0);
      r.push_back(eta >= 1.0);
    }
  }
  return r;
}

}  // namespace ghiest::testing

namespace ghiest::testing {

// Rows [begin, end) of a synthetic dataset.
inline SyntheticDataset slice(const SyntheticDataset& d, std::size_t begin, std::size_t end) {
  SyntheticDataset s;
  s.dataset.site = d.dataset.site;
  s.dataset.timestamps.assign(d.dataset.timestamps.begin() + begin, d.dataset.timestamps.begin() + end);
  for (const auto& p : d.dataset.plants) {
    PlantSeries q = p;
    q.timestamps.assign(p.timestamps.begin() + begin, p.timestamps.begin() + end);
    q.power.assign(p.power.begin() + begin, p.power.begin() + end);
    q.temperature.assign(p.temperature.begin() + begin, p.temperature.begin() + end);
    s.dataset.plants.push_back(std::move(q));
  }
  s.sun.assign(d.sun.begin() + begin, d.sun.begin() + end);
  s.clear.ghi_clear.assign(d.clear.ghi_clear.begin() + begin, d.clear.ghi_clear.begin() + end);
  s.ghi_true.assign(d.ghi_true.begin() + begin, d.ghi_true.begin() + end);
  s.sky_clear.assign(d.sky_clear.begin() + begin, d.sky_clear.begin() + end);
  s.omega_true = d.omega_true;
  return s;
}

}  // namespace ghiest::testing
