#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ghiest/core_data.hpp"
#include "ghiest/pv_proxy.hpp"
#include "ghiest/solar_geometry.hpp"

namespace ghiest {

// ---------------------------------------------------------------- mesh

struct OrientationMesh {
  std::vector<Orientation> orientations;
  int subdivision_level = 0;
};

using OrientationFilter = std::function<bool(const Orientation&)>;

// True for the north-facing orientations removed from the default mesh:
// tilt above 15 deg with azimuth within 60 deg of north.
bool north_facing(const Orientation& o);

// Icosphere vertices (one vertex at the zenith, one ring vertex due south)
// mapped to (tilt, azimuth); upper hemisphere only, `discard` removed.
OrientationMesh generate_mesh(int subdivision, const OrientationFilter& discard = north_facing);

// ---------------------------------------------------------------- GMM

struct GaussianComponent {
  double mean = 0.0;
  double sigma = 0.0;
  double weight = 0.0;
};

struct Gmm2 {
  GaussianComponent low;   // smaller mean
  GaussianComponent high;  // larger mean
  bool degenerate = false;
  int iterations = 0;
  double log_likelihood = 0.0;
};

inline constexpr std::size_t kGmmMinSamples = 20;

// Two-component 1-D Gaussian mixture by EM. nullopt when fewer than 20 samples.
std::optional<Gmm2> fit_gmm2(std::span<const double> samples, int max_iterations = 500, double tolerance = 1e-8);

// ---------------------------------------------------------------- clear-sky selection

struct ClearMask {
  std::vector<bool> mask;  // per timestep of one plant
  std::size_t count() const;
};

ClearMask select_clear(const PlantSeries& plant, std::span<const SolarPosition> sun, double bin_deg = 5.0);

// ---------------------------------------------------------------- regression

struct NnlsResult {
  Eigen::VectorXd x;
  int iterations = 0;
  bool converged = true;
};

// Lawson-Hanson active set solution of min ||A x - b|| subject to x >= 0.
NnlsResult nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iterations = 0);

struct HuberIrlsOptions {
  double tuning = 1.345;
  int max_iterations = 50;
  double tolerance = 1e-6;
  double sparsity = 0.01;  // fraction of the largest coefficient below which entries are zeroed
};

struct HuberIrlsResult {
  Eigen::VectorXd x;
  double scale = 0.0;
  int iterations = 0;
  std::vector<double> objective;  // Huber loss after each outer iteration
};

// Non-negative Huber M-estimate by iteratively reweighted NNLS. The residual
// scale is the MAD of the initial NNLS fit and is held fixed.
HuberIrlsResult huber_nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const HuberIrlsOptions& opt = {});

struct OmegaCoefficients {
  std::vector<double> omega;  // m2, one per orientation
  double estimated_pnom = 0.0;  // W
};

double estimate_nominal_power(std::span<const double> omega, const ProxyParams& p);

// `pr_clear` holds the clear-sky proxies of the masked timesteps, in order.
OmegaCoefficients identify_omega(const PlantSeries& plant, const ClearMask& mask, const Eigen::MatrixXd& pr_clear,
                                 const ProxyParams& p, const HuberIrlsOptions& opt = {});

// ---------------------------------------------------------------- split selection

inline const std::vector<int> kDefaultSplitDays{365, 182, 121, 91, 73};

struct FoldOmega {
  Instant start;  // inclusive
  Instant end;    // exclusive
  std::vector<double> omega;
  double estimated_pnom = 0.0;
};

struct PlantOmega {
  std::string plant_id;
  std::vector<Orientation> orientations;
  std::vector<double> omega;  // time-weighted mean over folds
  double estimated_pnom = 0.0;
  int chosen_split_days = 0;
  std::vector<FoldOmega> folds;

  // Coefficients that apply at `t`: the covering fold, else the mean.
  std::span<const double> omega_at(Instant t) const;
};

struct SplitRow {
  int split_days = 0;
  double pv_rmse = 0.0;  // normalized; +inf when a fold could not be identified
  bool feasible = false;
};

struct IdentificationOptions {
  int subdivision = 2;
  std::vector<int> split_days = kDefaultSplitDays;
  double gmm_bin_deg = 5.0;
  double tie_tolerance = 0.05;  // relative PV RMSE within which the longer split wins
  double linke_turbidity = 3.0;
  HuberIrlsOptions irls;
};

struct IdentificationResult {
  std::vector<PlantOmega> plants;
  std::vector<SplitRow> table;
  int chosen_split_days = 0;
};

IdentificationResult identify_with_splits(const AlignedDataset& ds, const ClearSkySeries& clear,
                                          std::span<const SolarPosition> sun, const ProxyParams& p,
                                          const IdentificationOptions& opt = {});

// Split rule: the longest split whose RMSE is within tie_tolerance of the best.
int choose_split(std::span<const SplitRow> table, double tie_tolerance);

void write_omega_json(const std::filesystem::path& path, std::span<const PlantOmega> plants);
std::vector<PlantOmega> read_omega_json(const std::filesystem::path& path);

}  // namespace ghiest
