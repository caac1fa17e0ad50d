#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ghiest/core_data.hpp"
#include "ghiest/solar_geometry.hpp"

namespace ghiest {

enum class IamForm { Secant, Cotangent };

struct ProxyParams {
  double k1 = 0.05;        // IAM coefficient
  double phi = 3.14e-2;    // K m2/W, cell heating
  double gamma = -4.3e-3;  // 1/K, power temperature coefficient
  double t_ref = 25.0;     // degC
  double i_stc = 1000.0;   // W/m2
  double k2 = 0.942;
  double k3 = -5.02e-2;
  double k4 = -3.77e-2;
  double i_min = 10.0;  // W/m2, efficiency cutoff
  IamForm iam_form = IamForm::Secant;

  void validate() const;
};

struct IrradianceComponents {
  double dni = 0.0;
  double dhi = 0.0;
  double i_b = 0.0;
  double i_d = 0.0;
  double i_g = 0.0;
};

inline constexpr double kDiscMaxZenith = 87.0 * kDeg;

// kt = ghi / (e0 * max(cos z, 0.065)), limited to [0, 1].
double clearness_index(double ghi, double zenith, double e0);

// Maxwell (1987) DISC direct normal irradiance.
double disc_dni(double ghi, const SolarPosition& sp, int day_of_year, double pressure = kSeaLevelPressure);

double dhi_from(double ghi, const SolarPosition& sp, double dni);

// Hay-Davies sky diffuse plus isotropic ground reflection and beam.
IrradianceComponents transpose_hay_davies(double ghi, double dhi, double dni, const SolarPosition& sp,
                                          const Orientation& o, double e0, double albedo);

double incidence_modifier(double aoi, const ProxyParams& p);
double apply_iam(const IrradianceComponents& c, double aoi, const ProxyParams& p);
double cell_temperature(double i_aoi, double t_ambient, const ProxyParams& p);
double apply_temperature(double i_aoi, double t_ambient, const ProxyParams& p);
double efficiency(double i_aoit, const ProxyParams& p);

/// Per-timestep inputs of the forward model that do not depend on GHI.
struct ProxyContext {
  std::vector<SolarPosition> sun;
  std::vector<int> day_of_year;
  std::vector<double> temperature;  // degC, kMissing allowed
  double albedo = 0.2;
  double pressure = kSeaLevelPressure;

  std::size_t steps() const { return sun.size(); }

  static ProxyContext for_plant(const AlignedDataset& ds, std::size_t plant, std::span<const SolarPosition> sun);
};

/// Forward model from GHI to the specific power of a set of module
/// orientations. Rows are timesteps, columns orientations.
class ProxyModel {
 public:
  ProxyModel(ProxyContext ctx, std::vector<Orientation> orientations, ProxyParams params);

  std::size_t steps() const { return ctx_.steps(); }
  std::size_t proxies() const { return orientations_.size(); }
  const std::vector<Orientation>& orientations() const { return orientations_; }
  const ProxyParams& params() const { return params_; }
  const ProxyContext& context() const { return ctx_; }

  // Specific power of every orientation at step t. Zero at night and where
  // the ambient temperature is missing.
  void row(std::size_t t, double ghi, std::span<double> out) const;
  // sum_j omega_j Pr(t, j), skipping zero coefficients.
  double combine(std::size_t t, double ghi, std::span<const double> omega) const;

  Eigen::MatrixXd matrix(std::span<const double> ghi) const;
  Eigen::MatrixXd matrix_rows(std::span<const double> ghi, std::span<const std::size_t> rows) const;
  // Forward difference (Pr(ghi + delta) - Pr(ghi)) / delta.
  Eigen::MatrixXd gradient(std::span<const double> ghi, double delta) const;

 private:
  double chain(std::size_t t, double ghi, double dni, double dhi, double e0, std::size_t j) const;

  ProxyContext ctx_;
  std::vector<Orientation> orientations_;
  ProxyParams params_;
};

Eigen::MatrixXd proxy_matrix(std::span<const double> ghi, const ProxyContext& ctx,
                             const std::vector<Orientation>& orientations, const ProxyParams& p);
Eigen::MatrixXd proxy_gradient(std::span<const double> ghi, const ProxyContext& ctx,
                               const std::vector<Orientation>& orientations, const ProxyParams& p,
                               double delta_ghi = 1.0);

}  // namespace ghiest
