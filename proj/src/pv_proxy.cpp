#include "ghiest/pv_proxy.hpp"

#include <algorithm>
#include <cmath>

#include "ghiest/parallel.hpp"

namespace ghiest {

void ProxyParams::validate() const {
  for (double v : {k1, phi, gamma, t_ref, i_stc, k2, k3, k4, i_min})
    if (!std::isfinite(v)) throw InputError("proxy parameters must be finite");
  if (!(i_stc > 0.0)) throw InputError("proxy parameter i_stc must be positive");
  if (i_min < 0.0) throw InputError("proxy parameter i_min must be non-negative");
}

double clearness_index(double ghi, double zenith, double e0) {
  const double kt = ghi / (e0 * std::max(std::cos(zenith), 0.065));
  return std::clamp(kt, 0.0, 1.0);
}

double disc_dni(double ghi, const SolarPosition& sp, int day_of_year, double pressure) {
  if (!(ghi > 0.0) || sp.zenith >= kDiscMaxZenith) return 0.0;
  const double e0 = extraterrestrial_normal(day_of_year);
  const double kt = clearness_index(ghi, sp.zenith, e0);
  const double am = std::min(*relative_airmass(sp.zenith) * pressure / kSeaLevelPressure, 12.0);

  const double kt2 = kt * kt, kt3 = kt2 * kt;
  double a, b, c;
  if (kt <= 0.6) {
    a = 0.512 - 1.56 * kt + 2.286 * kt2 - 2.222 * kt3;
    b = 0.37 + 0.962 * kt;
    c = -0.28 + 0.932 * kt - 2.048 * kt2;
  } else {
    a = -5.743 + 21.77 * kt - 27.49 * kt2 + 11.56 * kt3;
    b = 41.4 - 118.5 * kt + 66.05 * kt2 + 31.9 * kt3;
    c = -47.01 + 184.2 * kt - 222.0 * kt2 + 73.81 * kt3;
  }
  const double knc = 0.866 - 0.122 * am + 0.0121 * am * am - 0.000653 * am * am * am + 0.000014 * am * am * am * am;
  const double kn = knc - (a + b * std::exp(c * am));
  return std::clamp(kn * e0, 0.0, e0);
}

double dhi_from(double ghi, const SolarPosition& sp, double dni) {
  return std::max(ghi - std::cos(sp.zenith) * dni, 0.0);
}

IrradianceComponents transpose_hay_davies(double ghi, double dhi, double dni, const SolarPosition& sp,
                                          const Orientation& o, double e0, double albedo) {
  IrradianceComponents c;
  c.dni = dni;
  c.dhi = dhi;
  const double cos_aoi = std::max(cos_incidence(sp, o), 0.0);
  const double anisotropy = std::clamp(dni / e0, 0.0, 1.0);
  const double rb = cos_aoi / std::max(std::cos(sp.zenith), std::cos(kDiscMaxZenith));
  const double cos_tilt = std::cos(o.tilt);
  c.i_b = std::max(dni * cos_aoi, 0.0);
  c.i_d = std::max(dhi * (anisotropy * rb + (1.0 - anisotropy) * 0.5 * (1.0 + cos_tilt)), 0.0);
  c.i_g = std::max(albedo * ghi * 0.5 * (1.0 - cos_tilt), 0.0);
  return c;
}

double incidence_modifier(double aoi, const ProxyParams& p) {
  if (p.iam_form == IamForm::Cotangent) {
    const double a = std::min(aoi, kPi / 2);
    return std::max(1.0 - p.k1 * (std::cos(a) / std::sin(a) - 1.0), 0.0);
  }
  if (aoi >= kPi / 2) return 0.0;
  return std::max(1.0 - p.k1 * (1.0 / std::cos(aoi) - 1.0), 0.0);
}

double apply_iam(const IrradianceComponents& c, double aoi, const ProxyParams& p) {
  return incidence_modifier(aoi, p) * c.i_b + 0.95 * (c.i_d + c.i_g);
}

double cell_temperature(double i_aoi, double t_ambient, const ProxyParams& p) { return t_ambient + p.phi * i_aoi; }

double apply_temperature(double i_aoi, double t_ambient, const ProxyParams& p) {
  const double t_cell = cell_temperature(i_aoi, t_ambient, p);
  return std::max(i_aoi * (1.0 + p.gamma * (t_cell - p.t_ref)), 0.0);
}

double efficiency(double i_aoit, const ProxyParams& p) {
  if (!(i_aoit >= p.i_min) || i_aoit <= 0.0) return 0.0;
  const double lr = std::log(i_aoit / p.i_stc);
  return std::clamp(p.k2 + p.k3 * lr + p.k4 * lr * lr, 0.0, 1.0);
}

ProxyContext ProxyContext::for_plant(const AlignedDataset& ds, std::size_t plant,
                                     std::span<const SolarPosition> sun) {
  ProxyContext ctx;
  ctx.sun.assign(sun.begin(), sun.end());
  ctx.day_of_year.reserve(ds.steps());
  for (auto t : ds.timestamps) ctx.day_of_year.push_back(ghiest::day_of_year(t));
  ctx.temperature = ds.plants.at(plant).temperature;
  ctx.albedo = ds.site.albedo;
  ctx.pressure = pressure_at_altitude(ds.site.altitude);
  return ctx;
}

ProxyModel::ProxyModel(ProxyContext ctx, std::vector<Orientation> orientations, ProxyParams params)
    : ctx_(std::move(ctx)), orientations_(std::move(orientations)), params_(params) {
  params_.validate();
  if (ctx_.day_of_year.size() != ctx_.steps() || ctx_.temperature.size() != ctx_.steps())
    throw InputError("proxy context: inconsistent series lengths");
}

double ProxyModel::chain(std::size_t t, double ghi, double dni, double dhi, double e0, std::size_t j) const {
  const auto& sp = ctx_.sun[t];
  const auto& o = orientations_[j];
  const auto c = transpose_hay_davies(ghi, dhi, dni, sp, o, e0, ctx_.albedo);
  const double i_aoi = apply_iam(c, angle_of_incidence(sp, o), params_);
  const double i_aoit = apply_temperature(i_aoi, ctx_.temperature[t], params_);
  return efficiency(i_aoit, params_) * i_aoit;
}

void ProxyModel::row(std::size_t t, double ghi, std::span<double> out) const {
  const auto& sp = ctx_.sun[t];
  if (!sp.daylight() || is_missing(ctx_.temperature[t]) || !(ghi > 0.0)) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const double e0 = extraterrestrial_normal(ctx_.day_of_year[t]);
  const double dni = disc_dni(ghi, sp, ctx_.day_of_year[t], ctx_.pressure);
  const double dhi = dhi_from(ghi, sp, dni);
  for (std::size_t j = 0; j < orientations_.size(); ++j) out[j] = chain(t, ghi, dni, dhi, e0, j);
}

double ProxyModel::combine(std::size_t t, double ghi, std::span<const double> omega) const {
  const auto& sp = ctx_.sun[t];
  if (!sp.daylight() || is_missing(ctx_.temperature[t]) || !(ghi > 0.0)) return 0.0;
  const double e0 = extraterrestrial_normal(ctx_.day_of_year[t]);
  const double dni = disc_dni(ghi, sp, ctx_.day_of_year[t], ctx_.pressure);
  const double dhi = dhi_from(ghi, sp, dni);
  double sum = 0.0;
  for (std::size_t j = 0; j < orientations_.size(); ++j)
    if (omega[j] != 0.0) sum += omega[j] * chain(t, ghi, dni, dhi, e0, j);
  return sum;
}

Eigen::MatrixXd ProxyModel::matrix(std::span<const double> ghi) const {
  if (ghi.size() != steps()) throw InputError("proxy matrix: GHI length does not match the number of timesteps");
  Eigen::MatrixXd m(steps(), proxies());
  parallel_for(steps(), [&](std::size_t t) {
    std::vector<double> r(proxies());
    row(t, ghi[t], r);
    for (std::size_t j = 0; j < r.size(); ++j) m(t, j) = r[j];
  });
  return m;
}

Eigen::MatrixXd ProxyModel::matrix_rows(std::span<const double> ghi, std::span<const std::size_t> rows) const {
  if (ghi.size() != rows.size()) throw InputError("proxy matrix: GHI length does not match the row selection");
  Eigen::MatrixXd m(rows.size(), proxies());
  parallel_for(rows.size(), [&](std::size_t i) {
    std::vector<double> r(proxies());
    row(rows[i], ghi[i], r);
    for (std::size_t j = 0; j < r.size(); ++j) m(i, j) = r[j];
  });
  return m;
}

Eigen::MatrixXd ProxyModel::gradient(std::span<const double> ghi, double delta) const {
  if (!(delta > 0.0)) throw InputError("proxy gradient: delta must be positive");
  if (ghi.size() != steps()) throw InputError("proxy gradient: GHI length does not match the number of timesteps");
  Eigen::MatrixXd g(steps(), proxies());
  parallel_for(steps(), [&](std::size_t t) {
    std::vector<double> base(proxies()), plus(proxies());
    row(t, ghi[t], base);
    row(t, ghi[t] + delta, plus);
    for (std::size_t j = 0; j < base.size(); ++j) g(t, j) = (plus[j] - base[j]) / delta;
  });
  return g;
}

Eigen::MatrixXd proxy_matrix(std::span<const double> ghi, const ProxyContext& ctx,
                             const std::vector<Orientation>& orientations, const ProxyParams& p) {
  return ProxyModel(ctx, orientations, p).matrix(ghi);
}

Eigen::MatrixXd proxy_gradient(std::span<const double> ghi, const ProxyContext& ctx,
                               const std::vector<Orientation>& orientations, const ProxyParams& p,
                               double delta_ghi) {
  return ProxyModel(ctx, orientations, p).gradient(ghi, delta_ghi);
}

}  // namespace ghiest
