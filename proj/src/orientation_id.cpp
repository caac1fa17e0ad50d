#include "ghiest/orientation_id.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "json.hpp"

namespace ghiest {

using json = nlohmann::ordered_json;

std::size_t ClearMask::count() const { return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true)); }

ClearMask select_clear(const PlantSeries& plant, std::span<const SolarPosition> sun, double bin_deg) {
  if (sun.size() != plant.size()) throw InputError("select_clear: sun positions do not match the series length");
  if (!(bin_deg > 0.0)) throw InputError("select_clear: bin width must be positive");
  ClearMask out;
  out.mask.assign(plant.size(), false);

  const double width = bin_deg * kDeg;
  std::map<std::pair<long, long>, std::vector<std::size_t>> bins;
  for (std::size_t t = 0; t < plant.size(); ++t) {
    if (!sun[t].daylight() || !plant.usable(t)) continue;
    const auto ia = static_cast<long>(std::floor(sun[t].azimuth / width));
    const auto iz = static_cast<long>(std::floor(sun[t].zenith / width));
    bins[{ia, iz}].push_back(t);
  }

  std::vector<double> samples;
  for (const auto& [key, idx] : bins) {
    samples.clear();
    for (auto t : idx) samples.push_back(plant.power[t]);
    const auto fit = fit_gmm2(samples);
    if (!fit || fit->degenerate) continue;
    const double lo = fit->high.mean - fit->high.sigma, hi = fit->high.mean + fit->high.sigma;
    for (auto t : idx)
      if (plant.power[t] >= lo && plant.power[t] <= hi) out.mask[t] = true;
  }
  return out;
}

double estimate_nominal_power(std::span<const double> omega, const ProxyParams& p) {
  double sum = 0.0;
  for (double w : omega) sum += w;
  return sum * p.k2 * p.i_stc;
}

namespace {

std::vector<std::size_t> mask_rows(const ClearMask& mask) {
  std::vector<std::size_t> rows;
  for (std::size_t t = 0; t < mask.mask.size(); ++t)
    if (mask.mask[t]) rows.push_back(t);
  return rows;
}

// Fits one coefficient vector on a subset of the clear rows.
OmegaCoefficients fit_rows(const Eigen::MatrixXd& pr, const Eigen::VectorXd& power, std::span<const Eigen::Index> sel,
                           const ProxyParams& p, const HuberIrlsOptions& opt) {
  if (sel.size() < static_cast<std::size_t>(pr.cols())) throw InputError("insufficient clear samples");
  Eigen::MatrixXd a(static_cast<Eigen::Index>(sel.size()), pr.cols());
  Eigen::VectorXd b(static_cast<Eigen::Index>(sel.size()));
  for (std::size_t k = 0; k < sel.size(); ++k) {
    a.row(static_cast<Eigen::Index>(k)) = pr.row(sel[k]);
    b[static_cast<Eigen::Index>(k)] = power[sel[k]];
  }
  const auto fit = huber_nnls(a, b, opt);
  OmegaCoefficients out;
  out.omega.assign(fit.x.data(), fit.x.data() + fit.x.size());
  out.estimated_pnom = estimate_nominal_power(out.omega, p);
  return out;
}

struct PlantClear {
  std::vector<std::size_t> rows;  // timestep of each clear sample
  Eigen::MatrixXd pr;             // clear-sky proxies at those rows
  Eigen::VectorXd power;
};

struct SplitFit {
  std::vector<std::vector<OmegaCoefficients>> per_plant;  // [plant][fold]
  std::vector<std::pair<Instant, Instant>> folds;
  double rmse = std::numeric_limits<double>::infinity();
  bool feasible = false;
};

}  // namespace

OmegaCoefficients identify_omega(const PlantSeries& plant, const ClearMask& mask, const Eigen::MatrixXd& pr_clear,
                                 const ProxyParams& p, const HuberIrlsOptions& opt) {
  if (mask.mask.size() != plant.size()) throw InputError("identify_omega: mask does not match the series length");
  const auto rows = mask_rows(mask);
  if (static_cast<Eigen::Index>(rows.size()) != pr_clear.rows())
    throw InputError("identify_omega: proxy rows do not match the clear mask");
  Eigen::VectorXd power(static_cast<Eigen::Index>(rows.size()));
  std::vector<Eigen::Index> sel(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    power[static_cast<Eigen::Index>(k)] = plant.power[rows[k]];
    sel[k] = static_cast<Eigen::Index>(k);
  }
  return fit_rows(pr_clear, power, sel, p, opt);
}

std::span<const double> PlantOmega::omega_at(Instant t) const {
  for (const auto& f : folds)
    if (f.start <= t && t < f.end) return f.omega;
  return omega;
}

int choose_split(std::span<const SplitRow> table, double tie_tolerance) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : table)
    if (r.feasible) best = std::min(best, r.pv_rmse);
  if (!std::isfinite(best)) throw InputError("no feasible data split");
  int chosen = 0;
  const double limit = best * (1.0 + tie_tolerance) + 1e-15;
  for (const auto& r : table)
    if (r.feasible && r.pv_rmse <= limit) chosen = std::max(chosen, r.split_days);
  return chosen;
}

IdentificationResult identify_with_splits(const AlignedDataset& ds, const ClearSkySeries& clear,
                                          std::span<const SolarPosition> sun, const ProxyParams& p,
                                          const IdentificationOptions& opt) {
  if (ds.plants.empty() || ds.steps() == 0) throw InputError("identify: empty dataset");
  if (clear.ghi_clear.size() != ds.steps() || sun.size() != ds.steps())
    throw InputError("identify: clear-sky or sun series length mismatch");
  if (opt.split_days.empty()) throw InputError("identify: no candidate splits");

  const auto mesh = generate_mesh(opt.subdivision);
  const Instant first = ds.timestamps.front();
  const Instant stop = ds.timestamps.back() + ds.period();
  const auto span_seconds = (stop - first).count();
  const double span_days = static_cast<double>(span_seconds) / 86400.0;

  std::vector<PlantClear> clear_data(ds.plants.size());
  for (std::size_t i = 0; i < ds.plants.size(); ++i) {
    const auto& plant = ds.plants[i];
    auto& cd = clear_data[i];
    cd.rows = mask_rows(select_clear(plant, sun, opt.gmm_bin_deg));
    std::vector<double> ghi(cd.rows.size());
    for (std::size_t k = 0; k < cd.rows.size(); ++k) ghi[k] = clear.ghi_clear[cd.rows[k]];
    const ProxyModel model(ProxyContext::for_plant(ds, i, sun), mesh.orientations, p);
    cd.pr = model.matrix_rows(ghi, cd.rows);
    cd.power.resize(static_cast<Eigen::Index>(cd.rows.size()));
    for (std::size_t k = 0; k < cd.rows.size(); ++k) cd.power[static_cast<Eigen::Index>(k)] = plant.power[cd.rows[k]];
  }

  IdentificationResult result;
  std::vector<SplitFit> fits;
  for (int days : opt.split_days) {
    if (days <= 0) throw InputError("identify: split lengths must be positive");
    SplitFit fit;
    if (span_days + 1e-9 >= days) {
      const auto len = std::chrono::duration_cast<Seconds>(std::chrono::days{days});
      const auto n_folds = std::max<long>(1, static_cast<long>(span_seconds / len.count()));
      for (long f = 0; f < n_folds; ++f)
        fit.folds.emplace_back(first + f * len, f + 1 == n_folds ? stop : first + (f + 1) * len);

      fit.feasible = true;
      double sq = 0.0;
      std::size_t count = 0;
      fit.per_plant.resize(ds.plants.size());
      for (std::size_t i = 0; i < ds.plants.size() && fit.feasible; ++i) {
        const auto& cd = clear_data[i];
        const auto& ts = ds.timestamps;
        std::vector<std::vector<Eigen::Index>> sel(fit.folds.size());
        for (std::size_t k = 0; k < cd.rows.size(); ++k) {
          const Instant t = ts[cd.rows[k]];
          for (std::size_t f = 0; f < fit.folds.size(); ++f)
            if (t >= fit.folds[f].first && t < fit.folds[f].second) {
              sel[f].push_back(static_cast<Eigen::Index>(k));
              break;
            }
        }
        double pnom = 0.0;
        for (std::size_t f = 0; f < fit.folds.size(); ++f) {
          try {
            fit.per_plant[i].push_back(fit_rows(cd.pr, cd.power, sel[f], p, opt.irls));
          } catch (const InputError&) {
            fit.feasible = false;
            break;
          }
          const double w = static_cast<double>((fit.folds[f].second - fit.folds[f].first).count()) / span_seconds;
          pnom += w * fit.per_plant[i].back().estimated_pnom;
        }
        if (!fit.feasible || !(pnom > 0.0)) continue;
        for (std::size_t f = 0; f < fit.folds.size(); ++f) {
          const auto& om = fit.per_plant[i][f].omega;
          const Eigen::Map<const Eigen::VectorXd> w(om.data(), static_cast<Eigen::Index>(om.size()));
          for (auto k : sel[f]) {
            const double e = (cd.power[k] - cd.pr.row(k).dot(w)) / pnom;
            sq += e * e;
            ++count;
          }
        }
      }
      if (fit.feasible) fit.rmse = count ? std::sqrt(sq / static_cast<double>(count)) : 0.0;
    }
    result.table.push_back({days, fit.feasible ? fit.rmse : std::numeric_limits<double>::infinity(), fit.feasible});
    fits.push_back(std::move(fit));
  }

  bool any_long_enough = false;
  for (int d : opt.split_days) any_long_enough = any_long_enough || span_days + 1e-9 >= d;
  if (!any_long_enough) throw InputError("dataset is shorter than every candidate split");

  result.chosen_split_days = choose_split(result.table, opt.tie_tolerance);
  std::size_t chosen = 0;
  for (std::size_t s = 0; s < result.table.size(); ++s)
    if (result.table[s].feasible && result.table[s].split_days == result.chosen_split_days) {
      chosen = s;
      break;
    }
  const auto& fit = fits[chosen];

  for (std::size_t i = 0; i < ds.plants.size(); ++i) {
    PlantOmega po;
    po.plant_id = ds.plants[i].plant_id;
    po.chosen_split_days = result.chosen_split_days;
    // Keep only orientations used by at least one fold.
    std::vector<std::size_t> support;
    for (std::size_t j = 0; j < mesh.orientations.size(); ++j) {
      bool used = false;
      for (const auto& c : fit.per_plant[i]) used = used || c.omega[j] > 0.0;
      if (used) support.push_back(j);
    }
    for (auto j : support) po.orientations.push_back(mesh.orientations[j]);
    po.omega.assign(support.size(), 0.0);
    for (std::size_t f = 0; f < fit.folds.size(); ++f) {
      FoldOmega fo;
      fo.start = fit.folds[f].first;
      fo.end = fit.folds[f].second;
      fo.estimated_pnom = fit.per_plant[i][f].estimated_pnom;
      const double w = static_cast<double>((fo.end - fo.start).count()) / span_seconds;
      for (std::size_t k = 0; k < support.size(); ++k) {
        fo.omega.push_back(fit.per_plant[i][f].omega[support[k]]);
        po.omega[k] += w * fo.omega.back();
      }
      po.folds.push_back(std::move(fo));
    }
    po.estimated_pnom = estimate_nominal_power(po.omega, p);
    result.plants.push_back(std::move(po));
  }
  return result;
}

void write_omega_json(const std::filesystem::path& path, std::span<const PlantOmega> plants) {
  json doc = json::array();
  for (const auto& po : plants) {
    json rec;
    rec["plant_id"] = po.plant_id;
    json orients = json::array();
    for (std::size_t j = 0; j < po.orientations.size(); ++j)
      orients.push_back({{"tilt_deg", po.orientations[j].tilt / kDeg},
                         {"azimuth_deg", po.orientations[j].azimuth / kDeg},
                         {"omega_m2", po.omega[j]}});
    rec["orientations"] = std::move(orients);
    rec["estimated_pnom_w"] = po.estimated_pnom;
    rec["chosen_split_days"] = po.chosen_split_days;
    json folds = json::array();
    for (const auto& f : po.folds)
      folds.push_back({{"start", format_instant(f.start)},
                       {"end", format_instant(f.end)},
                       {"omega_m2", f.omega},
                       {"estimated_pnom_w", f.estimated_pnom}});
    rec["folds"] = std::move(folds);
    doc.push_back(std::move(rec));
  }
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

std::vector<PlantOmega> read_omega_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open omega file " + path.string());
  std::vector<PlantOmega> plants;
  try {
    const json doc = json::parse(in);
    if (!doc.is_array()) throw InputError("omega file must hold an array of plant records");
    for (const auto& rec : doc) {
      PlantOmega po;
      po.plant_id = rec.at("plant_id").get<std::string>();
      for (const auto& o : rec.at("orientations")) {
        po.orientations.push_back({o.at("tilt_deg").get<double>() * kDeg, o.at("azimuth_deg").get<double>() * kDeg});
        const double w = o.at("omega_m2").get<double>();
        if (!(w >= 0.0)) throw InputError("omega coefficients must be non-negative");
        po.omega.push_back(w);
      }
      po.estimated_pnom = rec.at("estimated_pnom_w").get<double>();
      po.chosen_split_days = rec.value("chosen_split_days", 0);
      if (rec.contains("folds"))
        for (const auto& f : rec.at("folds")) {
          FoldOmega fo;
          fo.start = parse_instant(f.at("start").get<std::string>());
          fo.end = parse_instant(f.at("end").get<std::string>());
          fo.omega = f.at("omega_m2").get<std::vector<double>>();
          fo.estimated_pnom = f.at("estimated_pnom_w").get<double>();
          if (fo.omega.size() != po.omega.size()) throw InputError("fold coefficients do not match the orientations");
          po.folds.push_back(std::move(fo));
        }
      plants.push_back(std::move(po));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed omega file: ") + e.what());
  }
  return plants;
}

}  // namespace ghiest
