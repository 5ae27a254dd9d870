#include "damrom/scenario.hpp"

#include <algorithm>
#include <cmath>

#include "damrom/error.hpp"

namespace damrom {

double TailingsLoadParams::K_a() const {
  const double s = std::sin(phi);
  return (1.0 - s) / (1.0 + s);
}

void TailingsLoadParams::validate() const {
  if (!(gamma_t > 0.0) || !(gamma_f > 0.0)) throw ConfigError("tailings and fill specific weights must be positive");
  if (!(phi > 0.0 && phi < 0.5 * 3.14159265358979323846)) throw ConfigError("friction angle must lie in (0, 90) degrees");
}

void LoadSchedule::validate() const {
  if (!(ramp_duration > 0.0)) throw ConfigError("ramp duration must be positive");
  if (!(raise_height > 0.0)) throw ConfigError("raise height must be positive");
  if (!(t_max > 0.0)) throw ConfigError("t_max must be positive");
}

double hydrostatic_load(double y, double water_level, double gamma_w) {
  if (y > water_level + 1e-9 * std::max(1.0, std::abs(water_level)))
    throw ConfigError("hydrostatic load evaluated above the water level");
  return gamma_w * std::max(0.0, water_level - y);
}

TailingsPressure tailings_load(double y, const TailingsLoadParams& params, double height, double water_level,
                               double gamma_w) {
  const double tol = 1e-9 * height;
  if (y < -tol || y > height + tol) throw ConfigError("tailings load evaluated outside [0, H]");
  y = std::clamp(y, 0.0, height);
  const double ka = params.K_a();
  double vertical;
  if (y <= water_level)
    vertical = params.gamma_t * (height - water_level) + (params.gamma_t - gamma_w) * (water_level - y);
  else
    vertical = params.gamma_t * (height - y);
  TailingsPressure out{ka * vertical, vertical, 0.0};
  out.magnitude = std::hypot(out.x, out.y);
  return out;
}

CrestLoad crest_load(double t, const LoadSchedule& schedule, const TailingsLoadParams& params) {
  const double ramp = std::clamp(t / schedule.ramp_duration, 0.0, 1.0);
  const double qy = ramp * params.gamma_f * schedule.raise_height;
  return {params.K_a() * qy, qy};
}

void DamScenario::validate() const {
  geometry.validate();
  material.validate();
  tailings.validate();
  schedule.validate();
  if (!(seepage_multiplier >= 0.0)) throw ConfigError("seepage multiplier must be non-negative");
}

BoundarySetup build_boundary_conditions(const DamScenario& scenario) {
  scenario.validate();
  const DamGeometry geom = scenario.geometry;
  const TailingsLoadParams tail = scenario.tailings;
  const LoadSchedule sched = scenario.schedule;
  const double gamma_w = scenario.material.fluid.gamma_w;
  const double k_s = scenario.material.vg.k_s;

  BoundarySetup bc;
  bc.mech(BoundaryTag::B).fix_x = true;
  bc.mech(BoundaryTag::B).fix_y = true;

  // Loads act as pressures: each component pushes against the outward normal.
  auto upstream = [=](Point2 x, Point2 n, double t, bool wet) {
    const CrestLoad q = crest_load(t, sched, tail);
    const TailingsPressure pe = tailings_load(x.y, tail, geom.height, geom.water_level, gamma_w);
    Point2 tr{-(q.x + pe.x) * n.x, -(q.y + pe.y) * n.y};
    if (wet) tr = tr - hydrostatic_load(std::min(x.y, geom.water_level), geom.water_level, gamma_w) * n;
    return tr;
  };
  bc.mech(BoundaryTag::UD).traction = [=](Point2 x, Point2 n, double t) { return upstream(x, n, t, false); };
  bc.mech(BoundaryTag::UW).traction = [=](Point2 x, Point2 n, double t) { return upstream(x, n, t, true); };
  bc.mech(BoundaryTag::T).traction = [=](Point2, Point2, double t) {
    return Point2{0.0, -crest_load(t, sched, tail).y};
  };

  FlowBC& uw = bc.hyd(BoundaryTag::UW);
  uw.kind = FlowBCKind::Dirichlet;
  uw.pressure = [=](Point2 x) { return gamma_w * (geom.water_level - x.y); };
  FlowBC& d = bc.hyd(BoundaryTag::D);
  d.kind = FlowBCKind::Seepage;
  d.seepage_scale = scenario.seepage_multiplier * k_s / gamma_w;
  return bc;
}

std::vector<EdgeConditions> edge_conditions(const Mesh& mesh, const BoundarySetup& setup) {
  std::vector<EdgeConditions> out;
  out.reserve(mesh.boundary_edges().size());
  for (const auto& e : mesh.boundary_edges()) {
    const MechanicalBC& m = setup.mech(e.tag);
    MechanicalKind mk = MechanicalKind::Free;
    if (m.fix_x || m.fix_y)
      mk = MechanicalKind::Fixed;
    else if (m.traction)
      mk = MechanicalKind::Traction;
    out.push_back({e.tag, mk, setup.hyd(e.tag).kind});
  }
  return out;
}

MaterialParams material_with_conductivity(const DamScenario& scenario, double k_s) {
  MaterialParams m = scenario.material;
  m.vg.k_s = k_s;
  m.validate();
  return m;
}

std::shared_ptr<const Assembler> make_dam_assembler(std::shared_ptr<const Mesh> mesh, const DamScenario& scenario,
                                                    double k_s) {
  DamScenario s = scenario;
  s.material = material_with_conductivity(scenario, k_s);
  return std::make_shared<const Assembler>(std::move(mesh), s.material, build_boundary_conditions(s));
}

}  // namespace damrom
