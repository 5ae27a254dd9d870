#include "damrom/constitutive.hpp"

#include <algorithm>
#include <cmath>

#include "damrom/error.hpp"

namespace damrom {

void VanGenuchtenParams::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("van Genuchten alpha must be positive");
  if (!(m > 0.0 && m < 1.0)) throw ConfigError("van Genuchten m must lie in (0, 1)");
  if (!(theta_r >= 0.0 && theta_r < theta_s && theta_s <= 1.0))
    throw ConfigError("water contents must satisfy 0 <= theta_r < theta_s <= 1");
  if (!(k_s > 0.0)) throw ConfigError("saturated conductivity must be positive");
}

LameCoefficients lame_from_engineering(double E, double nu) {
  if (!(E > 0.0)) throw ConfigError("Young's modulus must be positive");
  if (!(nu > -1.0 && nu < 0.5)) throw ConfigError("Poisson's ratio must lie in (-1, 0.5)");
  return {E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), E / (2.0 * (1.0 + nu))};
}

EngineeringModuli engineering_from_lame(double lambda, double mu) {
  return {mu * (3.0 * lambda + 2.0 * mu) / (lambda + mu), lambda / (2.0 * (lambda + mu))};
}

ElasticParams ElasticParams::from_engineering(double E, double nu) {
  const auto lame = lame_from_engineering(E, nu);
  return {E, nu, lame.lambda, lame.mu};
}

void ElasticParams::validate() const {
  const auto lame = lame_from_engineering(E, nu);
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b)); };
  if (!close(lame.lambda, lambda) || !close(lame.mu, mu))
    throw ConfigError("Lame coefficients inconsistent with E and nu");
}

void FluidSolidParams::validate() const {
  if (!(gamma_w > 0.0 && rho_w > 0.0 && rho_s > 0.0 && K_w > 0.0 && g > 0.0))
    throw ConfigError("fluid and solid parameters must be positive");
  if (!(porosity > 0.0 && porosity < 1.0)) throw ConfigError("porosity must lie in (0, 1)");
  if (std::abs(gamma_w - rho_w * g) > 1e-12 * gamma_w)
    throw ConfigError("gamma_w must equal rho_w * g");
}

void MaterialParams::validate() const {
  vg.validate();
  elastic.validate();
  fluid.validate();
  if (!(k_min_ratio > 0.0 && k_min_ratio < 1.0)) throw ConfigError("k_min_ratio must lie in (0, 1)");
}

HydraulicState evaluate_hydraulics(double p, const VanGenuchtenParams& vg, double gamma_w,
                                   double k_min_ratio) {
  HydraulicState s;
  const double dtheta = vg.theta_s - vg.theta_r;
  if (p >= 0.0) {
    s.saturation = 1.0;
    s.water_content = vg.theta_s;
    s.capacity = 0.0;
    s.conductivity = vg.k_s;
    return s;
  }
  const double n = 1.0 / (1.0 - vg.m);
  const double head = vg.alpha * (-p) / gamma_w;
  const double se = std::pow(1.0 + std::pow(head, n), -vg.m);
  // Se^(1/m) = 1 / (1 + head^n); 1 - Se^(1/m) = head^n / (1 + head^n).
  const double hn = std::pow(head, n);
  const double se_1m = 1.0 / (1.0 + hn);
  const double tail = std::pow(hn / (1.0 + hn), vg.m);  // (1 - Se^(1/m))^m

  s.saturation = se;
  s.water_content = se * dtheta + vg.theta_r;
  s.capacity = vg.alpha * vg.m * dtheta / ((1.0 - vg.m) * gamma_w) * se_1m * tail;
  const double bracket = 1.0 - tail;
  s.conductivity = std::max(vg.k_s * std::sqrt(se) * bracket * bracket, k_min_ratio * vg.k_s);
  return s;
}

double effective_saturation(double p, const VanGenuchtenParams& vg, double gamma_w) {
  if (p >= 0.0) return 1.0;
  const double head = vg.alpha * (-p) / gamma_w;
  return std::pow(1.0 + std::pow(head, 1.0 / (1.0 - vg.m)), -vg.m);
}

double volumetric_water_content(double p, const VanGenuchtenParams& vg, double gamma_w) {
  return effective_saturation(p, vg, gamma_w) * (vg.theta_s - vg.theta_r) + vg.theta_r;
}

double moisture_capacity(double p, const VanGenuchtenParams& vg, double gamma_w) {
  return evaluate_hydraulics(p, vg, gamma_w, 0.0).capacity;
}

double hydraulic_conductivity(double p, const VanGenuchtenParams& vg, double gamma_w, double k_min_ratio) {
  return evaluate_hydraulics(p, vg, gamma_w, k_min_ratio).conductivity;
}

double bulk_density(double p, const MaterialParams& params) {
  const double theta = volumetric_water_content(p, params.vg, params.fluid.gamma_w);
  return (1.0 - params.fluid.porosity) * params.fluid.rho_s + theta * params.fluid.rho_w;
}

}  // namespace damrom
