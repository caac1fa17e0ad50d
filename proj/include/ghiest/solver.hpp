#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ghiest/core_data.hpp"
#include "ghiest/orientation_id.hpp"
#include "ghiest/pv_proxy.hpp"
#include "ghiest/reconciliation.hpp"
#include "ghiest/solar_geometry.hpp"

namespace ghiest {

struct SolverConfig {
  int n_grid = 30;
  double k_safety = 1.3;
  double delta_ghi = 1.0;  // W/m2
  double lambda0 = 20.0;   // W/m2 per unit normalized sensitivity
  double k_decay = 0.5;
  int max_iterations = 100;
  double min_step_ratio = 1e-3;  // a timestep is converged once lambda < ratio * lambda0
  bool use_trust = true;
  bool use_gate = true;

  void validate() const;
};

/// Fixed inputs of one solve: the forward model of every plant, its
/// coefficients and observations, and the per-timestep GHI bounds.
class GhiProblem {
 public:
  GhiProblem(const AlignedDataset& ds, std::span<const PlantOmega> omega, std::span<const SolarPosition> sun,
             const ClearSkySeries& clear, const ProxyParams& p, double k_safety);

  std::size_t steps() const { return timestamps_.size(); }
  std::size_t plants() const { return models_.size(); }
  const std::vector<Instant>& timestamps() const { return timestamps_; }
  std::span<const SolarPosition> sun() const { return sun_; }

  bool daytime(std::size_t t) const { return daytime_[t]; }
  double upper(std::size_t t) const { return upper_[t]; }
  bool available(std::size_t i, std::size_t t) const { return available_[i][t]; }
  const std::vector<std::vector<bool>>& availability() const { return available_; }
  double pnom(std::size_t i) const { return pnom_[i]; }
  const PlantOmega& omega(std::size_t i) const { return omega_[i]; }
  double i_stc() const { return i_stc_; }

  // Simulated plant power (W) for a GHI value at step t.
  double predicted(std::size_t i, std::size_t t, double ghi) const;
  // Normalized error (P - P_hat) / Pnom; kMissing when the plant has no data.
  double error(std::size_t i, std::size_t t, double ghi) const;
  std::vector<double> predicted_series(std::size_t i, std::span<const double> ghi) const;

 private:
  std::vector<Instant> timestamps_;
  std::vector<SolarPosition> sun_;
  std::vector<ProxyModel> models_;
  std::vector<PlantOmega> omega_;
  std::vector<std::vector<double>> power_;
  std::vector<std::vector<bool>> available_;
  std::vector<double> pnom_;
  std::vector<double> upper_;
  std::vector<bool> daytime_;
  double i_stc_ = 1000.0;
};

struct IterationError {
  double before = 0.0;  // ||h|| at the start of the iteration
  double after = 0.0;   // after accepting/rejecting every timestep, same gate
};

struct EstimationState {
  std::vector<double> ghi;
  Eigen::MatrixXd error;  // T x n, kMissing where unavailable
  std::vector<double> lambda;
  std::vector<int> iterations;
  std::vector<bool> converged;
  std::vector<int> plants_used;
  std::vector<IterationError> err_history;
  std::vector<std::size_t> gated;  // per plant, summed over iterations
};

// Combined objective at one step: |sum_i keep_i F~_i e_i| where F~ is the
// trust row renormalized over kept plants.
double timestep_objective(const GhiProblem& problem, std::size_t t, double ghi, std::span<const double> trust_row,
                          const std::vector<bool>& keep);

EstimationState init_ghi(const GhiProblem& problem, const Eigen::MatrixXd& trust, const SolverConfig& cfg);

// Gate of step t on the current errors. All true when gating is disabled.
std::vector<bool> current_gate(const GhiProblem& problem, const EstimationState& state, std::size_t t,
                               const SolverConfig& cfg, double k_q = 1.5);

// d h_t / d GHI_t for every step, by forward differences of the simulated
// power. keep[t][i] selects the plants entering step t.
std::vector<double> objective_gradient(const GhiProblem& problem, std::span<const double> ghi,
                                       const Eigen::MatrixXd& trust, const std::vector<std::vector<bool>>& keep,
                                       const SolverConfig& cfg);

// Per-step steepest descent with step decay on rejection; the gate is
// recomputed from the current errors at the start of every iteration.
EstimationState refine_ghi(const GhiProblem& problem, EstimationState state, const Eigen::MatrixXd& trust,
                           const SolverConfig& cfg, double k_q = 1.5);

struct EstimationResult {
  std::vector<std::string> plant_ids;
  EstimationState state;
  Eigen::MatrixXd trust;
  std::vector<ShadowMap> shadow_maps;  // empty when trust is disabled
  double converged_fraction = 1.0;     // over daytime steps with data
};

// Shadow maps, trust, grid initialization and refinement. Single-plant
// datasets run without trust and gate.
EstimationResult estimate(const AlignedDataset& ds, std::span<const PlantOmega> omega,
                          std::span<const SolarPosition> sun, const ClearSkySeries& clear, const ProxyParams& p,
                          const SolverConfig& cfg = {}, const ReconciliationConfig& rc = {});

void write_estimate_csv(const std::filesystem::path& path, std::span<const Instant> ts, const EstimationState& state);
void write_diagnostics_json(const std::filesystem::path& path, const EstimationResult& result);

}  // namespace ghiest
