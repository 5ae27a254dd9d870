#pragma once

namespace damrom {

/// Van Genuchten retention parameters. alpha is the inverse air-entry head.
struct VanGenuchtenParams {
  double alpha = 0.1;     // 1/m
  double m = 0.184;
  double theta_s = 0.38;
  double theta_r = 0.038;
  double k_s = 1e-8;      // m/s

  void validate() const;

  bool operator==(const VanGenuchtenParams&) const = default;
};

struct LameCoefficients {
  double lambda = 0.0;
  double mu = 0.0;
};

struct ElasticParams {
  double E = 40e6;  // Pa
  double nu = 0.3;
  double lambda = 0.0;
  double mu = 0.0;

  /// Fills lambda and mu from E and nu (plane strain / 3D relations).
  static ElasticParams from_engineering(double E, double nu);
  void validate() const;

  bool operator==(const ElasticParams&) const = default;
};

struct FluidSolidParams {
  double gamma_w = 10e3;   // N/m^3
  double rho_w = 1000.0;   // kg/m^3
  double rho_s = 2700.0;   // kg/m^3
  double porosity = 0.38;
  double K_w = 2.2e9;      // Pa
  double g = 10.0;         // m/s^2

  void validate() const;

  bool operator==(const FluidSolidParams&) const = default;
};

struct MaterialParams {
  VanGenuchtenParams vg;
  ElasticParams elastic = ElasticParams::from_engineering(40e6, 0.3);
  FluidSolidParams fluid;
  /// Conductivity floor as a fraction of k_s.
  double k_min_ratio = 1e-6;

  void validate() const;

  bool operator==(const MaterialParams&) const = default;
};

/// Effective saturation Se in (0, 1]; Se = 1 for p >= 0.
double effective_saturation(double p, const VanGenuchtenParams& vg, double gamma_w);

/// Volumetric water content Se (theta_s - theta_r) + theta_r.
double volumetric_water_content(double p, const VanGenuchtenParams& vg, double gamma_w);

/// Specific moisture capacity dTheta/dp (1/Pa), non-negative, zero for p >= 0.
double moisture_capacity(double p, const VanGenuchtenParams& vg, double gamma_w);

/// Mualem-van Genuchten conductivity (m/s), floored at k_min_ratio * k_s.
double hydraulic_conductivity(double p, const VanGenuchtenParams& vg, double gamma_w,
                              double k_min_ratio = 1e-6);

/// Mixture density (1 - eta) rho_s + Theta(p) rho_w.
double bulk_density(double p, const MaterialParams& params);

LameCoefficients lame_from_engineering(double E, double nu);

struct EngineeringModuli {
  double E = 0.0;
  double nu = 0.0;
};
EngineeringModuli engineering_from_lame(double lambda, double mu);

/// All retention quantities at one pressure, sharing the power evaluations.
/// This is what the assembly loops call at every quadrature point.
struct HydraulicState {
  double saturation = 1.0;
  double water_content = 0.0;
  double capacity = 0.0;
  double conductivity = 0.0;
};

HydraulicState evaluate_hydraulics(double p, const VanGenuchtenParams& vg, double gamma_w,
                                   double k_min_ratio);

}  // namespace damrom
