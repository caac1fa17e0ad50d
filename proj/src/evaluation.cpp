#include "ghiest/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "ghiest/stats.hpp"
#include "json.hpp"

namespace ghiest {

ErrorSummary summarize_errors(std::span<const double> est, std::span<const double> ref) {
  if (est.size() != ref.size()) throw InputError("metrics: series lengths differ");
  ErrorSummary s;
  double sum = 0.0, sq = 0.0;
  for (std::size_t t = 0; t < est.size(); ++t) {
    if (is_missing(est[t]) || is_missing(ref[t])) continue;
    const double e = est[t] - ref[t];
    sum += e;
    sq += e * e;
    ++s.n;
  }
  if (s.n == 0) return s;
  const double n = static_cast<double>(s.n);
  s.bias = sum / n;
  s.rmse = std::sqrt(sq / n);
  double var = 0.0;
  for (std::size_t t = 0; t < est.size(); ++t) {
    if (is_missing(est[t]) || is_missing(ref[t])) continue;
    const double d = est[t] - ref[t] - s.bias;
    var += d * d;
  }
  s.std = std::sqrt(var / n);
  return s;
}

MetricReport normalized_rmse(std::span<const double> est, std::span<const double> ref) {
  if (est.size() != ref.size()) throw InputError("metrics: series lengths differ");
  MetricReport r;
  double sum = 0.0;
  std::size_t count = 0;
  std::vector<double> rel;
  for (std::size_t t = 0; t < ref.size(); ++t) {
    if (is_missing(est[t]) || is_missing(ref[t]) || !(ref[t] > 0.0)) continue;
    sum += ref[t];
    ++count;
    rel.push_back(std::abs(est[t] - ref[t]) / ref[t]);
  }
  if (count == 0) throw InputError("reference series has no positive value");
  r.k_n = sum / static_cast<double>(count);
  r.overall = summarize_errors(est, ref);
  r.nrmse = r.overall.rmse / r.k_n;
  std::sort(rel.begin(), rel.end());
  for (double p : {0.5, 0.9, 0.95, 0.99}) r.abs_rel_error_quantiles.emplace_back(p, quantile_sorted(rel, p));
  return r;
}

std::vector<DailyMetrics> bias_std_daily(std::span<const double> est, std::span<const double> ref,
                                         std::span<const Instant> ts) {
  if (est.size() != ref.size() || ts.size() != ref.size()) throw InputError("metrics: series lengths differ");
  std::vector<DailyMetrics> out;
  std::size_t begin = 0;
  while (begin < ts.size()) {
    const auto day = std::chrono::floor<std::chrono::days>(ts[begin]);
    std::size_t end = begin;
    while (end < ts.size() && std::chrono::floor<std::chrono::days>(ts[end]) == day) ++end;
    DailyMetrics d;
    d.date = format_instant(ts[begin]).substr(0, 10);
    d.summary = summarize_errors(est.subspan(begin, end - begin), ref.subspan(begin, end - begin));
    out.push_back(std::move(d));
    begin = end;
  }
  return out;
}

MetricReport evaluate(std::span<const double> est, std::span<const double> ref, std::span<const Instant> ts) {
  auto r = normalized_rmse(est, ref);
  r.daily = bias_std_daily(est, ref, ts);
  return r;
}

Series block_average(std::span<const Instant> ts, std::span<const double> values, Seconds period) {
  if (ts.size() != values.size()) throw InputError("block average: series lengths differ");
  if (period.count() <= 0) throw InputError("block average: period must be positive");
  Series out;
  std::size_t begin = 0;
  while (begin < ts.size()) {
    const auto block = ts[begin].time_since_epoch().count() / period.count() -
                       (ts[begin].time_since_epoch().count() % period.count() < 0 ? 1 : 0);
    std::size_t end = begin;
    double sum = 0.0;
    std::size_t n = 0;
    while (end < ts.size()) {
      const auto c = ts[end].time_since_epoch().count();
      const auto b = c / period.count() - (c % period.count() < 0 ? 1 : 0);
      if (b != block) break;
      if (!is_missing(values[end])) {
        sum += values[end];
        ++n;
      }
      ++end;
    }
    out.timestamps.push_back(Instant{Seconds{block * period.count()}});
    out.values.push_back(n ? sum / static_cast<double>(n) : kMissing);
    begin = end;
  }
  return out;
}

// ---------------------------------------------------------------- synthetic data

bool ShadowGate::covers(const SolarPosition& sp, int doy) const {
  const bool in_season = doy_start <= doy_end ? (doy >= doy_start && doy <= doy_end) : (doy >= doy_start || doy <= doy_end);
  if (!in_season || !sp.daylight()) return false;
  const bool in_az = azimuth_min <= azimuth_max ? (sp.azimuth >= azimuth_min && sp.azimuth <= azimuth_max)
                                                : (sp.azimuth >= azimuth_min || sp.azimuth <= azimuth_max);
  return in_az && sp.zenith >= zenith_min && sp.zenith <= zenith_max;
}

void SyntheticSpec::validate() const {
  if (plants.empty()) throw InputError("synthetic spec: no plants");
  if (days <= 0 || period.count() <= 0) throw InputError("synthetic spec: days and period must be positive");
  std::set<std::string> ids;
  for (const auto& pl : plants) {
    if (pl.id.empty() || !ids.insert(pl.id).second) throw InputError("synthetic spec: plant ids must be unique and non-empty");
    if (pl.fields.empty()) throw InputError("synthetic spec: plant '" + pl.id + "' has no fields");
    for (const auto& f : pl.fields) {
      if (!(f.pnom > 0.0)) throw InputError("synthetic spec: nominal powers must be positive");
      if (!(f.orientation.tilt >= 0.0 && f.orientation.tilt <= kPi / 2 + 1e-12))
        throw InputError("synthetic spec: tilt must be in [0, 90] deg");
    }
    for (const auto& g : pl.shadows)
      if (!(g.transmission >= 0.0 && g.transmission <= 1.0))
        throw InputError("synthetic spec: shadow transmission must be in [0, 1]");
    if (pl.curtailment && !(*pl.curtailment > 0.0)) throw InputError("synthetic spec: curtailment must be positive");
    if (!(pl.corruption.fraction >= 0.0 && pl.corruption.fraction <= 1.0) || !(pl.corruption.factor >= 0.0))
      throw InputError("synthetic spec: invalid corruption settings");
  }
  if (!(noise_sigma >= 0.0)) throw InputError("synthetic spec: noise_sigma must be non-negative");
  if (!(cloud.sd_logit >= 0.0) || !(cloud.correlation_minutes > 0.0) || !(cloud.margin >= 0.0) ||
      !(cloud.min_transmission >= 0.0 && cloud.min_transmission <= 1.0))
    throw InputError("synthetic spec: invalid cloud model");
}

std::vector<Instant> regular_timestamps(Instant start, int days, Seconds period) {
  if (days <= 0 || period.count() <= 0) throw InputError("timestamp grid: days and period must be positive");
  std::vector<Instant> ts;
  const Instant stop = start + std::chrono::days{days};
  for (Instant t = start; t < stop; t += period) ts.push_back(t);
  return ts;
}

namespace {

double ambient_temperature(const TemperatureModel& m, const Site& site, Instant t) {
  const int doy = day_of_year(t);
  const double hemisphere = site.latitude >= 0.0 ? 1.0 : -1.0;
  const auto day = std::chrono::floor<std::chrono::days>(t);
  const double utc_hours = std::chrono::duration<double, std::ratio<3600>>(t - day).count();
  const double solar_hours = utc_hours + site.longitude / 15.0;
  return m.mean - hemisphere * m.seasonal_amplitude * std::cos(2.0 * kPi * (doy - 15) / 365.0) +
         m.diurnal_amplitude * std::cos(2.0 * kPi * (solar_hours - 15.0) / 24.0);
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x9e3779b9u};
  return std::mt19937_64(seq);
}

}  // namespace

SyntheticDataset synthesize(const SyntheticSpec& spec, const Site& site, std::span<const Instant> ts,
                            std::uint64_t seed, const ProxyParams& p) {
  spec.validate();
  site.validate();
  p.validate();
  if (ts.empty()) throw InputError("synthesize: no timestamps");
  const std::size_t steps = ts.size();
  const Seconds period = steps > 1 ? ts[1] - ts[0] : spec.period;

  SyntheticDataset out;
  out.sun = sun_positions(ts, site);
  out.clear = clearsky_ghi(ts, site, spec.linke_turbidity);
  out.ghi_true.resize(steps);
  out.sky_clear.resize(steps);

  // Sky: logit AR(1), mapped to [0, 1] with a margin so that 0 and 1 occur.
  auto sky = substream(seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double rho = std::exp(-static_cast<double>(period.count()) / 60.0 / spec.cloud.correlation_minutes);
  const double innovation = spec.cloud.sd_logit * std::sqrt(1.0 - rho * rho);
  double x = spec.cloud.mean_logit + spec.cloud.sd_logit * normal(sky);
  for (std::size_t t = 0; t < steps; ++t) {
    if (t > 0) x = spec.cloud.mean_logit + rho * (x - spec.cloud.mean_logit) + innovation * normal(sky);
    double a = 1.0;
    if (spec.cloud.enabled) {
      const double m = spec.cloud.margin;
      a = std::clamp((1.0 + 2.0 * m) / (1.0 + std::exp(-x)) - m, 0.0, 1.0);
    }
    const double transmission = spec.cloud.min_transmission + (1.0 - spec.cloud.min_transmission) * a;
    out.ghi_true[t] = out.clear.ghi_clear[t] * transmission;
    out.sky_clear[t] = a == 1.0 && out.sun[t].daylight();
  }

  auto& ds = out.dataset;
  ds.site = site;
  ds.timestamps.assign(ts.begin(), ts.end());

  ProxyContext ctx;
  ctx.sun = out.sun;
  ctx.albedo = site.albedo;
  ctx.pressure = pressure_at_altitude(site.altitude);
  for (auto t : ts) {
    ctx.day_of_year.push_back(day_of_year(t));
    ctx.temperature.push_back(ambient_temperature(spec.temperature, site, t));
  }

  for (std::size_t i = 0; i < spec.plants.size(); ++i) {
    const auto& sp = spec.plants[i];
    PlantOmega truth;
    truth.plant_id = sp.id;
    for (const auto& f : sp.fields) {
      truth.orientations.push_back(f.orientation);
      truth.omega.push_back(f.pnom / (p.k2 * p.i_stc));
      truth.estimated_pnom += f.pnom;
    }
    const ProxyModel model(ctx, truth.orientations, p);

    PlantSeries series;
    series.plant_id = sp.id;
    series.timestamps = ds.timestamps;
    series.temperature = ctx.temperature;
    series.period = period;
    series.power.resize(steps);

    auto rng = substream(seed, i + 1);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (std::size_t t = 0; t < steps; ++t) {
      double power = model.combine(t, out.ghi_true[t], truth.omega);
      for (const auto& g : sp.shadows)
        if (g.covers(out.sun[t], ctx.day_of_year[t])) power *= g.transmission;
      const double u = uniform(rng);
      if (out.sun[t].daylight() && u < sp.corruption.fraction) power *= sp.corruption.factor;
      const double z = normal(rng);
      power *= std::max(0.0, 1.0 + spec.noise_sigma * z);
      if (sp.curtailment) power = std::min(power, *sp.curtailment * truth.estimated_pnom);
      series.power[t] = power;
    }
    ds.plants.push_back(std::move(series));
    out.omega_true.push_back(std::move(truth));
  }
  return out;
}

// ---------------------------------------------------------------- spec file

namespace {

using json = nlohmann::json;

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw InputError("synthetic spec: " + where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw InputError("synthetic spec: unknown key '" + key + "' in " + where);
  }
}

}  // namespace

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open synthetic spec " + path.string());
  SyntheticSpec spec;
  try {
    const json doc = json::parse(in);
    check_keys(doc, {"start", "days", "period_seconds", "noise_sigma", "linke_turbidity", "cloud", "temperature", "plants"},
               "spec");
    if (doc.contains("start")) spec.start = parse_instant(doc["start"].get<std::string>());
    spec.days = doc.value("days", spec.days);
    spec.period = Seconds{doc.value("period_seconds", static_cast<long>(spec.period.count()))};
    spec.noise_sigma = doc.value("noise_sigma", spec.noise_sigma);
    spec.linke_turbidity = doc.value("linke_turbidity", spec.linke_turbidity);
    if (doc.contains("cloud")) {
      const auto& c = doc["cloud"];
      check_keys(c, {"enabled", "mean_logit", "sd_logit", "correlation_minutes", "margin", "min_transmission"}, "cloud");
      spec.cloud.enabled = c.value("enabled", spec.cloud.enabled);
      spec.cloud.mean_logit = c.value("mean_logit", spec.cloud.mean_logit);
      spec.cloud.sd_logit = c.value("sd_logit", spec.cloud.sd_logit);
      spec.cloud.correlation_minutes = c.value("correlation_minutes", spec.cloud.correlation_minutes);
      spec.cloud.margin = c.value("margin", spec.cloud.margin);
      spec.cloud.min_transmission = c.value("min_transmission", spec.cloud.min_transmission);
    }
    if (doc.contains("temperature")) {
      const auto& c = doc["temperature"];
      check_keys(c, {"mean", "seasonal_amplitude", "diurnal_amplitude"}, "temperature");
      spec.temperature.mean = c.value("mean", spec.temperature.mean);
      spec.temperature.seasonal_amplitude = c.value("seasonal_amplitude", spec.temperature.seasonal_amplitude);
      spec.temperature.diurnal_amplitude = c.value("diurnal_amplitude", spec.temperature.diurnal_amplitude);
    }
    for (const auto& pj : doc.at("plants")) {
      check_keys(pj, {"id", "fields", "shadows", "curtailment", "corruption"}, "plant");
      SyntheticPlant pl;
      pl.id = pj.at("id").get<std::string>();
      for (const auto& f : pj.at("fields")) {
        check_keys(f, {"tilt_deg", "azimuth_deg", "pnom_w"}, "field");
        pl.fields.push_back({{f.at("tilt_deg").get<double>() * kDeg, f.at("azimuth_deg").get<double>() * kDeg},
                             f.at("pnom_w").get<double>()});
      }
      if (pj.contains("shadows"))
        for (const auto& g : pj["shadows"]) {
          check_keys(g, {"azimuth_min_deg", "azimuth_max_deg", "zenith_min_deg", "zenith_max_deg", "transmission",
                         "doy_start", "doy_end"},
                     "shadow");
          ShadowGate gate;
          gate.azimuth_min = g.at("azimuth_min_deg").get<double>() * kDeg;
          gate.azimuth_max = g.at("azimuth_max_deg").get<double>() * kDeg;
          gate.zenith_min = g.value("zenith_min_deg", 0.0) * kDeg;
          gate.zenith_max = g.value("zenith_max_deg", 90.0) * kDeg;
          gate.transmission = g.at("transmission").get<double>();
          gate.doy_start = g.value("doy_start", 1);
          gate.doy_end = g.value("doy_end", 366);
          pl.shadows.push_back(gate);
        }
      if (pj.contains("curtailment")) pl.curtailment = pj["curtailment"].get<double>();
      if (pj.contains("corruption")) {
        check_keys(pj["corruption"], {"fraction", "factor"}, "corruption");
        pl.corruption.fraction = pj["corruption"].value("fraction", 0.0);
        pl.corruption.factor = pj["corruption"].value("factor", 1.0);
      }
      spec.plants.push_back(std::move(pl));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed synthetic spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

}  // namespace ghiest
