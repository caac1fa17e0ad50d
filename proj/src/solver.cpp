#include "ghiest/solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "ghiest/parallel.hpp"
#include "json.hpp"

namespace ghiest {

void SolverConfig::validate() const {
  if (n_grid < 2) throw InputError("solver: n_grid must be at least 2");
  if (!(k_safety > 0.0)) throw InputError("solver: k_safety must be positive");
  if (!(delta_ghi > 0.0)) throw InputError("solver: delta_ghi must be positive");
  if (!(lambda0 > 0.0)) throw InputError("solver: lambda0 must be positive");
  if (!(k_decay > 0.0 && k_decay < 1.0)) throw InputError("solver: k_decay must be in (0, 1)");
  if (max_iterations < 0) throw InputError("solver: max_iterations must be non-negative");
  if (!(min_step_ratio > 0.0 && min_step_ratio < 1.0)) throw InputError("solver: min_step_ratio must be in (0, 1)");
}

GhiProblem::GhiProblem(const AlignedDataset& ds, std::span<const PlantOmega> omega, std::span<const SolarPosition> sun,
                       const ClearSkySeries& clear, const ProxyParams& p, double k_safety)
    : timestamps_(ds.timestamps), sun_(sun.begin(), sun.end()), i_stc_(p.i_stc) {
  const std::size_t steps = ds.steps();
  if (sun.size() != steps || clear.ghi_clear.size() != steps)
    throw InputError("solver: sun or clear-sky series length does not match the dataset");
  if (ds.plants.empty()) throw InputError("solver: no plants");

  upper_.resize(steps);
  daytime_.resize(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    upper_[t] = sun_[t].daylight() ? k_safety * std::max(clear.ghi_clear[t], 0.0) : 0.0;
    daytime_[t] = upper_[t] > 0.0;
  }

  for (std::size_t i = 0; i < ds.plants.size(); ++i) {
    const auto& plant = ds.plants[i];
    auto it = std::find_if(omega.begin(), omega.end(), [&](const PlantOmega& o) { return o.plant_id == plant.plant_id; });
    if (it == omega.end()) throw InputError("no omega record for plant '" + plant.plant_id + "'");
    if (it->omega.size() != it->orientations.size())
      throw InputError("omega record for plant '" + plant.plant_id + "' is inconsistent");
    omega_.push_back(*it);
    models_.emplace_back(ProxyContext::for_plant(ds, i, sun), it->orientations, p);
    pnom_.push_back(it->estimated_pnom);
    power_.push_back(plant.power);
    std::vector<bool> avail(steps);
    for (std::size_t t = 0; t < steps; ++t) avail[t] = daytime_[t] && plant.usable(t) && pnom_.back() > 0.0;
    available_.push_back(std::move(avail));
  }
}

double GhiProblem::predicted(std::size_t i, std::size_t t, double ghi) const {
  return models_[i].combine(t, ghi, omega_[i].omega_at(timestamps_[t]));
}

double GhiProblem::error(std::size_t i, std::size_t t, double ghi) const {
  if (!available_[i][t]) return kMissing;
  return (power_[i][t] - predicted(i, t, ghi)) / pnom_[i];
}

std::vector<double> GhiProblem::predicted_series(std::size_t i, std::span<const double> ghi) const {
  if (ghi.size() != steps()) throw InputError("solver: GHI length does not match the dataset");
  std::vector<double> out(steps());
  parallel_for(steps(), [&](std::size_t t) { out[t] = predicted(i, t, ghi[t]); });
  return out;
}

namespace {

// Trust-weighted mean error over the kept plants, weights renormalized.
double weighted_error(const GhiProblem& problem, std::size_t t, double ghi, std::span<const double> trust_row,
                      const std::vector<bool>& keep) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < problem.plants(); ++i) {
    if (!keep[i] || !problem.available(i, t)) continue;
    num += trust_row[i] * problem.error(i, t, ghi);
    den += trust_row[i];
  }
  return den > 0.0 ? num / den : 0.0;
}

std::vector<double> row_of(const Eigen::MatrixXd& m, std::size_t t) {
  std::vector<double> r(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.cols(); ++i) r[i] = m(static_cast<Eigen::Index>(t), i);
  return r;
}

bool has_data(const GhiProblem& problem, std::size_t t) {
  for (std::size_t i = 0; i < problem.plants(); ++i)
    if (problem.available(i, t)) return true;
  return false;
}

void check_trust(const GhiProblem& problem, const Eigen::MatrixXd& trust) {
  if (trust.rows() != static_cast<Eigen::Index>(problem.steps()) ||
      trust.cols() != static_cast<Eigen::Index>(problem.plants()))
    throw InputError("solver: trust matrix has the wrong shape");
}

double signed_gradient(const GhiProblem& problem, std::size_t t, double ghi, std::span<const double> trust_row,
                       const std::vector<bool>& keep, double delta) {
  const double m = weighted_error(problem, t, ghi, trust_row, keep);
  if (m == 0.0) return 0.0;
  const double m_plus = weighted_error(problem, t, ghi + delta, trust_row, keep);
  return (m > 0.0 ? 1.0 : -1.0) * (m_plus - m) / delta;
}

}  // namespace

double timestep_objective(const GhiProblem& problem, std::size_t t, double ghi, std::span<const double> trust_row,
                          const std::vector<bool>& keep) {
  return std::abs(weighted_error(problem, t, ghi, trust_row, keep));
}

EstimationState init_ghi(const GhiProblem& problem, const Eigen::MatrixXd& trust, const SolverConfig& cfg) {
  cfg.validate();
  check_trust(problem, trust);
  const std::size_t steps = problem.steps(), n = problem.plants();
  EstimationState s;
  s.ghi.assign(steps, 0.0);
  s.error = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(n), kMissing);
  s.lambda.assign(steps, cfg.lambda0);
  s.iterations.assign(steps, 0);
  s.plants_used.assign(steps, 0);
  s.gated.assign(n, 0);
  std::vector<char> converged(steps, 1);

  parallel_for(steps, [&](std::size_t t) {
    if (!problem.daytime(t)) return;
    if (!has_data(problem, t)) {
      s.ghi[t] = kMissing;
      converged[t] = 0;
      return;
    }
    const auto f = row_of(trust, t);
    double best_cost = std::numeric_limits<double>::infinity(), best = 0.0;
    for (int g = 1; g <= cfg.n_grid; ++g) {
      const double cand = static_cast<double>(g) / cfg.n_grid * problem.upper(t);
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!problem.available(i, t)) continue;
        num += f[i] * std::abs(problem.error(i, t, cand));
        den += f[i];
      }
      const double cost = den > 0.0 ? num / den : 0.0;
      if (cost < best_cost) {
        best_cost = cost;
        best = cand;
      }
    }
    s.ghi[t] = best;
    converged[t] = 0;
    int used = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!problem.available(i, t)) continue;
      ++used;
      s.error(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = problem.error(i, t, best);
    }
    s.plants_used[t] = used;
  });
  s.converged.assign(converged.begin(), converged.end());
  return s;
}

std::vector<bool> current_gate(const GhiProblem& problem, const EstimationState& state, std::size_t t,
                               const SolverConfig& cfg, double k_q) {
  const std::size_t n = problem.plants();
  std::vector<bool> keep(n, false);
  std::vector<double> errors;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < n; ++i)
    if (problem.available(i, t)) {
      idx.push_back(i);
      errors.push_back(state.error(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)));
    }
  if (!cfg.use_gate) {
    for (auto i : idx) keep[i] = true;
    return keep;
  }
  const auto k = tukey_gate(errors, k_q);
  for (std::size_t j = 0; j < idx.size(); ++j) keep[idx[j]] = k[j];
  return keep;
}

std::vector<double> objective_gradient(const GhiProblem& problem, std::span<const double> ghi,
                                       const Eigen::MatrixXd& trust, const std::vector<std::vector<bool>>& keep,
                                       const SolverConfig& cfg) {
  check_trust(problem, trust);
  if (ghi.size() != problem.steps() || keep.size() != problem.steps())
    throw InputError("objective gradient: inputs do not match the number of steps");
  std::vector<double> g(problem.steps(), 0.0);
  parallel_for(problem.steps(), [&](std::size_t t) {
    if (!problem.daytime(t) || is_missing(ghi[t])) return;
    g[t] = signed_gradient(problem, t, ghi[t], row_of(trust, t), keep[t], cfg.delta_ghi);
  });
  return g;
}

EstimationState refine_ghi(const GhiProblem& problem, EstimationState s, const Eigen::MatrixXd& trust,
                           const SolverConfig& cfg, double k_q) {
  cfg.validate();
  check_trust(problem, trust);
  const std::size_t steps = problem.steps(), n = problem.plants();
  std::vector<char> active(steps, 0), done(steps, 0);
  for (std::size_t t = 0; t < steps; ++t) active[t] = problem.daytime(t) && !is_missing(s.ghi[t]);

  std::vector<double> h_before(steps, 0.0), h_after(steps, 0.0);
  std::vector<std::vector<bool>> keep(steps);
  for (int it = 0; it < cfg.max_iterations; ++it) {
    bool pending = false;
    for (std::size_t t = 0; t < steps; ++t) pending = pending || (active[t] && !done[t]);
    if (!pending) break;

    parallel_for(steps, [&](std::size_t t) {
      h_before[t] = h_after[t] = 0.0;
      if (!active[t]) return;
      keep[t] = current_gate(problem, s, t, cfg, k_q);
      s.plants_used[t] = static_cast<int>(std::count(keep[t].begin(), keep[t].end(), true));
      const auto f = row_of(trust, t);
      const double h = timestep_objective(problem, t, s.ghi[t], f, keep[t]);
      h_before[t] = h_after[t] = h;
      if (done[t]) return;
      ++s.iterations[t];

      const double g = signed_gradient(problem, t, s.ghi[t], f, keep[t], cfg.delta_ghi);
      if (h == 0.0 || g == 0.0) {
        done[t] = 1;
        return;
      }
      const double trial = std::clamp(s.ghi[t] - s.lambda[t] * problem.i_stc() * g, 0.0, problem.upper(t));
      const double h_trial = trial == s.ghi[t] ? h : timestep_objective(problem, t, trial, f, keep[t]);
      if (h_trial < h) {
        s.ghi[t] = trial;
        h_after[t] = h_trial;
        for (std::size_t i = 0; i < n; ++i)
          if (problem.available(i, t))
            s.error(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = problem.error(i, t, trial);
      } else {
        s.lambda[t] *= cfg.k_decay;
        if (s.lambda[t] < cfg.min_step_ratio * cfg.lambda0) done[t] = 1;
      }
    });

    double before = 0.0, after = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      before += h_before[t] * h_before[t];
      after += h_after[t] * h_after[t];
      if (!active[t]) continue;
      for (std::size_t i = 0; i < n; ++i)
        if (problem.available(i, t) && !keep[t][i]) ++s.gated[i];
    }
    s.err_history.push_back({std::sqrt(before), std::sqrt(after)});
  }
  for (std::size_t t = 0; t < steps; ++t)
    if (active[t]) s.converged[t] = done[t] != 0;
  return s;
}

EstimationResult estimate(const AlignedDataset& ds, std::span<const PlantOmega> omega,
                          std::span<const SolarPosition> sun, const ClearSkySeries& clear, const ProxyParams& p,
                          const SolverConfig& cfg, const ReconciliationConfig& rc) {
  cfg.validate();
  rc.validate();
  const GhiProblem problem(ds, omega, sun, clear, p, cfg.k_safety);
  SolverConfig run = cfg;
  if (problem.plants() < 2) run.use_trust = run.use_gate = false;

  EstimationResult res;
  for (const auto& plant : ds.plants) res.plant_ids.push_back(plant.plant_id);
  if (run.use_trust) {
    for (std::size_t i = 0; i < problem.plants(); ++i) {
      const auto p_hat = problem.predicted_series(i, clear.ghi_clear);
      const auto raw = build_shadow_map(ds.plants[i], p_hat, problem.pnom(i), sun, rc);
      res.shadow_maps.push_back(smooth_threshold_map(raw, rc.bandwidth_deg, rc.floor));
    }
    res.trust = trust_weights(res.shadow_maps, sun, problem.availability(), rc.floor);
  } else {
    res.trust = uniform_trust(problem.availability());
  }

  res.state = refine_ghi(problem, init_ghi(problem, res.trust, run), res.trust, run, rc.k_q);

  std::size_t total = 0, ok = 0;
  for (std::size_t t = 0; t < problem.steps(); ++t) {
    if (!problem.daytime(t) || res.state.plants_used[t] == 0) continue;
    ++total;
    ok += res.state.converged[t] ? 1 : 0;
  }
  res.converged_fraction = total ? static_cast<double>(ok) / static_cast<double>(total) : 1.0;
  return res;
}

void write_estimate_csv(const std::filesystem::path& path, std::span<const Instant> ts, const EstimationState& state) {
  if (ts.size() != state.ghi.size()) throw InputError("estimate output: length mismatch");
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "timestamp,ghi_est_wm2,n_plants_used,iterations,converged\n";
  for (std::size_t t = 0; t < ts.size(); ++t)
    out << format_instant(ts[t]) << ',' << format_number(state.ghi[t]) << ',' << state.plants_used[t] << ','
        << state.iterations[t] << ',' << (state.converged[t] ? 1 : 0) << '\n';
}

void write_diagnostics_json(const std::filesystem::path& path, const EstimationResult& result) {
  nlohmann::ordered_json doc;
  doc["converged_fraction"] = result.converged_fraction;
  auto hist = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < result.state.err_history.size(); ++k)
    hist.push_back({{"iteration", k + 1},
                    {"error_before", result.state.err_history[k].before},
                    {"error_after", result.state.err_history[k].after}});
  doc["error_history"] = std::move(hist);
  auto gates = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < result.state.gated.size() && i < result.plant_ids.size(); ++i)
    gates[result.plant_ids[i]] = result.state.gated[i];
  doc["gated_counts"] = std::move(gates);
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace ghiest
