#include "ghiest/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ghiest/parallel.hpp"
#include "json.hpp"

namespace ghiest {

namespace fs = std::filesystem;

namespace {

std::string where(const std::string& section, const std::string& key) {
  return section.empty() ? key : section + "." + key;
}

double to_double(const std::string& section, const std::string& key, const std::string& value) {
  const double v = parse_number(value);
  if (is_missing(v)) throw InputError("config: bad number for '" + where(section, key) + "': '" + value + "'");
  return v;
}

long long to_integer(const std::string& section, const std::string& key, const std::string& value) {
  const double v = to_double(section, key, value);
  if (v != std::floor(v)) throw InputError("config: '" + where(section, key) + "' must be an integer");
  return static_cast<long long>(v);
}

bool to_bool(const std::string& section, const std::string& key, std::string value) {
  boost::algorithm::to_lower(value);
  boost::algorithm::trim(value);
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw InputError("config: bad boolean for '" + where(section, key) + "'");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  boost::algorithm::split(parts, value, boost::algorithm::is_any_of(","));
  std::vector<std::string> out;
  for (auto& p : parts) {
    boost::algorithm::trim(p);
    if (!p.empty()) out.push_back(p);
  }
  return out;
}

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p = boost::algorithm::trim_copy(value);
  return p.is_relative() && !base.empty() ? base / p : p;
}

[[noreturn]] void unknown(const std::string& section, const std::string& key) {
  throw InputError("config: unknown key '" + where(section, key) + "'");
}

}  // namespace

void RunConfig::validate() const {
  site.validate();
  proxy.validate();
  solver.validate();
  reconciliation.validate();
  if (!(linke_turbidity > 0.0)) throw InputError("config: linke_turbidity must be positive");
  if (orientation.subdivision < 1 || orientation.subdivision > 4)
    throw InputError("config: orientation.subdivision must be in [1, 4]");
  if (orientation.split_days.empty()) throw InputError("config: orientation.split_days is empty");
  if (!(orientation.gmm_bin_deg > 0.0)) throw InputError("config: orientation.gmm_bin_deg must be positive");
  if (!(orientation.tie_tolerance >= 0.0)) throw InputError("config: orientation.tie_tolerance must be non-negative");
}

void apply_setting(RunConfig& cfg, const std::string& section, const std::string& key, const std::string& value,
                   const fs::path& base) {
  auto num = [&] { return to_double(section, key, value); };
  auto integer = [&] { return to_integer(section, key, value); };
  if (section.empty()) {
    if (key == "threads") {
      const auto n = integer();
      if (n < 0) throw InputError("config: threads must be non-negative");
      cfg.threads = static_cast<unsigned>(n);
    } else if (key == "seed") {
      const auto s = boost::algorithm::trim_copy(value);
      std::uint64_t v = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || p != s.data() + s.size()) throw InputError("config: bad seed '" + value + "'");
      cfg.seed = v;
    } else {
      unknown(section, key);
    }
  } else if (section == "site") {
    if (key == "latitude") cfg.site.latitude = num();
    else if (key == "longitude") cfg.site.longitude = num();
    else if (key == "altitude") cfg.site.altitude = num();
    else if (key == "albedo") cfg.site.albedo = num();
    else if (key == "sampling_seconds") cfg.sampling = Seconds{integer()};
    else if (key == "linke_turbidity") cfg.linke_turbidity = num();
    else unknown(section, key);
  } else if (section == "proxy") {
    auto& p = cfg.proxy;
    if (key == "k1") p.k1 = num();
    else if (key == "phi") p.phi = num();
    else if (key == "gamma") p.gamma = num();
    else if (key == "t_ref") p.t_ref = num();
    else if (key == "i_stc") p.i_stc = num();
    else if (key == "k2") p.k2 = num();
    else if (key == "k3") p.k3 = num();
    else if (key == "k4") p.k4 = num();
    else if (key == "i_min") p.i_min = num();
    else if (key == "iam_form") {
      const auto v = boost::algorithm::to_lower_copy(boost::algorithm::trim_copy(value));
      if (v == "secant") p.iam_form = IamForm::Secant;
      else if (v == "cotangent") p.iam_form = IamForm::Cotangent;
      else throw InputError("config: proxy.iam_form must be 'secant' or 'cotangent'");
    } else unknown(section, key);
  } else if (section == "solver") {
    auto& s = cfg.solver;
    if (key == "n_grid") s.n_grid = static_cast<int>(integer());
    else if (key == "k_safety") s.k_safety = num();
    else if (key == "delta_ghi") s.delta_ghi = num();
    else if (key == "lambda0") s.lambda0 = num();
    else if (key == "k_decay") s.k_decay = num();
    else if (key == "max_iterations") s.max_iterations = static_cast<int>(integer());
    else if (key == "min_step_ratio") s.min_step_ratio = num();
    else if (key == "use_trust") s.use_trust = to_bool(section, key, value);
    else if (key == "use_gate") s.use_gate = to_bool(section, key, value);
    else unknown(section, key);
  } else if (section == "orientation") {
    auto& o = cfg.orientation;
    if (key == "subdivision") o.subdivision = static_cast<int>(integer());
    else if (key == "split_days") {
      o.split_days.clear();
      for (const auto& item : split_list(value)) o.split_days.push_back(static_cast<int>(to_integer(section, key, item)));
    } else if (key == "gmm_bin_deg") o.gmm_bin_deg = num();
    else if (key == "tie_tolerance") o.tie_tolerance = num();
    else unknown(section, key);
  } else if (section == "reconciliation") {
    auto& r = cfg.reconciliation;
    if (key == "bin_deg") r.bin_deg = num();
    else if (key == "min_samples") r.min_samples = static_cast<std::size_t>(std::max(0LL, integer()));
    else if (key == "quantile") r.quantile = num();
    else if (key == "power_floor") r.power_floor = num();
    else if (key == "bandwidth_deg") r.bandwidth_deg = num();
    else if (key == "floor") r.floor = num();
    else if (key == "k_q") r.k_q = num();
    else unknown(section, key);
  } else if (section == "paths") {
    auto& p = cfg.paths;
    if (key == "plants") {
      p.plants.clear();
      for (const auto& item : split_list(value)) p.plants.push_back(resolve(base, item));
    } else if (key == "clearsky") p.clearsky = resolve(base, value);
    else if (key == "output_dir") p.output_dir = resolve(base, value);
    else if (key == "omega") p.omega = resolve(base, value);
    else if (key == "synth_spec") p.synth_spec = resolve(base, value);
    else if (key == "estimate") p.estimate = resolve(base, value);
    else if (key == "truth") p.truth = resolve(base, value);
    else unknown(section, key);
  } else {
    throw InputError("config: unknown section '" + section + "'");
  }
}

RunConfig load_run_config(const std::optional<fs::path>& path, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (path) {
    if (!fs::exists(*path)) throw InputError("config file '" + path->string() + "' does not exist");
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::read_ini(path->string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw InputError(std::string("config: ") + e.what());
    }
    const fs::path base = path->parent_path();
    for (const auto& [name, node] : tree) {
      if (node.empty()) {
        apply_setting(cfg, "", name, node.data(), base);
        continue;
      }
      for (const auto& [key, value] : node) apply_setting(cfg, name, key, value.data(), base);
    }
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw InputError("override '" + o + "' must read key=value");
    const std::string lhs = boost::algorithm::trim_copy(o.substr(0, eq));
    const auto dot = lhs.find('.');
    const std::string section = dot == std::string::npos ? "" : lhs.substr(0, dot);
    const std::string key = dot == std::string::npos ? lhs : lhs.substr(dot + 1);
    apply_setting(cfg, section, key, o.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

AlignedDataset load_dataset(const RunConfig& cfg) {
  if (cfg.paths.plants.empty()) throw InputError("no plant files configured (paths.plants)");
  for (const auto& p : cfg.paths.plants)
    if (!fs::exists(p)) throw InputError("plant file '" + p.string() + "' does not exist");
  if (cfg.paths.clearsky && !fs::exists(*cfg.paths.clearsky))
    throw InputError("clear-sky file '" + cfg.paths.clearsky->string() + "' does not exist");
  std::vector<PlantSeries> plants;
  for (const auto& p : cfg.paths.plants) plants.push_back(load_plant_csv(p, p.stem().string(), cfg.sampling));
  return align(plants, cfg.site);
}

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + dir.string() + "'");
}

ClearSkySeries clear_for(const RunConfig& cfg, const AlignedDataset& ds) {
  return clearsky_ghi(ds.timestamps, ds.site, cfg.linke_turbidity, cfg.paths.clearsky);
}

}  // namespace

int cmd_identify(const RunConfig& cfg) {
  set_thread_count(cfg.threads);
  const auto ds = load_dataset(cfg);
  const auto sun = sun_positions(ds.timestamps, ds.site);
  const auto clear = clear_for(cfg, ds);
  IdentificationOptions opt = cfg.orientation;
  opt.linke_turbidity = cfg.linke_turbidity;
  const auto res = identify_with_splits(ds, clear, sun, cfg.proxy, opt);

  ensure_dir(cfg.paths.output_dir);
  const auto omega_path = cfg.paths.omega.value_or(cfg.paths.output_dir / "omega.json");
  write_omega_json(omega_path, res.plants);
  std::ofstream table(cfg.paths.output_dir / "split_table.csv");
  if (!table) throw InputError("cannot write split table");
  table << "split_days,pv_rmse,feasible,chosen\n";
  for (const auto& row : res.table)
    table << row.split_days << ',' << (row.feasible ? format_number(row.pv_rmse) : std::string()) << ','
          << (row.feasible ? 1 : 0) << ',' << (row.split_days == res.chosen_split_days ? 1 : 0) << '\n';

  std::cout << "identified " << res.plants.size() << " plant(s), split " << res.chosen_split_days << " days\n";
  for (const auto& po : res.plants)
    std::cout << "  " << po.plant_id << ": " << po.orientations.size() << " orientation(s), Pnom "
              << std::lround(po.estimated_pnom) << " W\n";
  std::cout << "wrote " << omega_path.string() << '\n';
  return kExitOk;
}

int cmd_estimate(const RunConfig& cfg) {
  set_thread_count(cfg.threads);
  const auto ds = load_dataset(cfg);
  const auto omega_path = cfg.paths.omega.value_or(cfg.paths.output_dir / "omega.json");
  const auto omega = read_omega_json(omega_path);
  const auto sun = sun_positions(ds.timestamps, ds.site);
  const auto clear = clear_for(cfg, ds);
  const auto res = estimate(ds, omega, sun, clear, cfg.proxy, cfg.solver, cfg.reconciliation);

  ensure_dir(cfg.paths.output_dir);
  const auto out = cfg.paths.estimate.value_or(cfg.paths.output_dir / "ghi_estimate.csv");
  write_estimate_csv(out, ds.timestamps, res.state);
  write_diagnostics_json(cfg.paths.output_dir / "diagnostics.json", res);
  for (std::size_t i = 0; i < res.shadow_maps.size(); ++i)
    write_shadow_map_csv(cfg.paths.output_dir / ("shadow_map_" + res.plant_ids[i] + ".csv"), res.shadow_maps[i]);

  std::cout << "estimated " << ds.steps() << " steps, converged fraction " << res.converged_fraction << '\n';
  std::cout << "wrote " << out.string() << '\n';
  return res.converged_fraction >= 0.95 ? kExitOk : kExitConvergence;
}

int cmd_synth(const RunConfig& cfg) {
  set_thread_count(cfg.threads);
  if (!cfg.paths.synth_spec) throw InputError("no synthetic spec given (paths.synth_spec or --spec)");
  const auto spec = load_synthetic_spec(*cfg.paths.synth_spec);
  const auto ts = regular_timestamps(spec.start, spec.days, cfg.sampling.value_or(spec.period));
  auto s = spec;
  s.linke_turbidity = cfg.linke_turbidity;
  const auto data = synthesize(s, cfg.site, ts, cfg.seed, cfg.proxy);

  ensure_dir(cfg.paths.output_dir);
  for (const auto& plant : data.dataset.plants) write_plant_csv(cfg.paths.output_dir / (plant.plant_id + ".csv"), plant);
  std::ofstream truth(cfg.paths.output_dir / "truth.csv");
  if (!truth) throw InputError("cannot write truth.csv");
  truth << "timestamp,ghi_true_wm2,ghi_clear_wm2,sky_clear\n";
  for (std::size_t t = 0; t < ts.size(); ++t)
    truth << format_instant(ts[t]) << ',' << format_number(data.ghi_true[t]) << ','
          << format_number(data.clear.ghi_clear[t]) << ',' << (data.sky_clear[t] ? 1 : 0) << '\n';
  write_omega_json(cfg.paths.output_dir / "omega_true.json", data.omega_true);
  std::cout << "wrote " << data.dataset.plants.size() << " plant file(s) and truth.csv to "
            << cfg.paths.output_dir.string() << '\n';
  return kExitOk;
}

Series read_csv_column(const fs::path& path, const std::string& column) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty file '" + path.string() + "'");
  std::vector<std::string> header;
  boost::algorithm::split(header, boost::algorithm::trim_copy(line), boost::algorithm::is_any_of(","));
  const auto it = std::find(header.begin(), header.end(), column);
  if (header.empty() || header.front() != "timestamp" || it == header.end())
    throw InputError("'" + path.string() + "' lacks a timestamp or '" + column + "' column");
  const auto col = static_cast<std::size_t>(it - header.begin());
  Series s;
  std::vector<std::string> fields;
  while (std::getline(in, line)) {
    boost::algorithm::trim(line);
    if (line.empty()) continue;
    boost::algorithm::split(fields, line, boost::algorithm::is_any_of(","));
    if (fields.size() < header.size()) throw InputError("short row in '" + path.string() + "'");
    s.timestamps.push_back(parse_instant(fields[0]));
    s.values.push_back(parse_number(fields[col]));
  }
  return s;
}

int cmd_evaluate(const RunConfig& cfg) {
  const auto est_path = cfg.paths.estimate.value_or(cfg.paths.output_dir / "ghi_estimate.csv");
  const auto truth_path = cfg.paths.truth.value_or(cfg.paths.output_dir / "truth.csv");
  const auto est = read_csv_column(est_path, "ghi_est_wm2");
  const auto ref = read_csv_column(truth_path, "ghi_true_wm2");

  std::map<Instant, double> ref_at;
  for (std::size_t t = 0; t < ref.timestamps.size(); ++t) ref_at[ref.timestamps[t]] = ref.values[t];
  std::vector<Instant> ts;
  std::vector<double> e, r;
  for (std::size_t t = 0; t < est.timestamps.size(); ++t) {
    auto it = ref_at.find(est.timestamps[t]);
    if (it == ref_at.end()) continue;
    ts.push_back(est.timestamps[t]);
    e.push_back(est.values[t]);
    r.push_back(it->second);
  }
  if (ts.empty()) throw InputError("estimate and truth do not overlap");

  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  auto add = [&](int minutes, const MetricReport& m) {
    const double lhs = m.overall.bias * m.overall.bias + m.overall.std * m.overall.std;
    const double rhs = m.overall.rmse * m.overall.rmse;
    const bool holds = std::abs(lhs - rhs) <= 1e-9 * std::max(rhs, 1e-300) || lhs == rhs;
    nlohmann::ordered_json q = nlohmann::ordered_json::object();
    for (const auto& [p, v] : m.abs_rel_error_quantiles) q[format_number(p)] = v;
    doc.push_back({{"aggregation_minutes", minutes},
                   {"n", m.overall.n},
                   {"k_n", m.k_n},
                   {"rmse", m.overall.rmse},
                   {"nrmse", m.nrmse},
                   {"bias", m.overall.bias},
                   {"std", m.overall.std},
                   {"decomposition_check", {{"bias2_plus_std2", lhs}, {"rmse2", rhs}, {"holds", holds}}},
                   {"abs_rel_error_quantiles", q}});
    std::cout << (minutes ? std::to_string(minutes) + " min" : std::string("native")) << ": nRMSE " << m.nrmse
              << ", RMSE " << m.overall.rmse << ", bias " << m.overall.bias << ", std " << m.overall.std
              << ", bias^2+std^2=RMSE^2 " << (holds ? "holds" : "FAILS") << '\n';
  };

  const auto native = evaluate(e, r, ts);
  add(0, native);
  for (int minutes : {10, 30, 60}) {
    // Drop pairs with a missing side before averaging so both series see the same samples.
    std::vector<double> e2 = e, r2 = r;
    for (std::size_t t = 0; t < e2.size(); ++t)
      if (is_missing(e2[t]) || is_missing(r2[t])) e2[t] = r2[t] = kMissing;
    const auto ea = block_average(ts, e2, Seconds{minutes * 60});
    const auto ra = block_average(ts, r2, Seconds{minutes * 60});
    add(minutes, normalized_rmse(ea.values, ra.values));
  }

  ensure_dir(cfg.paths.output_dir);
  std::ofstream report(cfg.paths.output_dir / "metrics.json");
  if (!report) throw InputError("cannot write metrics.json");
  report << doc.dump(2) << '\n';
  std::ofstream daily(cfg.paths.output_dir / "daily_metrics.csv");
  if (!daily) throw InputError("cannot write daily_metrics.csv");
  daily << "date,n,bias,std,rmse\n";
  for (const auto& d : native.daily)
    daily << d.date << ',' << d.summary.n << ',' << format_number(d.summary.bias) << ','
          << format_number(d.summary.std) << ',' << format_number(d.summary.rmse) << '\n';
  return kExitOk;
}

}  // namespace ghiest
