#pragma once

#include <memory>
#include <vector>

#include "damrom/assembly.hpp"
#include "damrom/constitutive.hpp"
#include "damrom/mesh.hpp"

namespace damrom {

inline constexpr double kSecondsPerDay = 86400.0;

struct TailingsLoadParams {
  double gamma_t = 21e3;  // N/m^3
  double gamma_f = 21e3;  // N/m^3
  double phi = 35.0 * (3.14159265358979323846 / 180.0);  // rad

  /// Active earth pressure coefficient (1 - sin phi) / (1 + sin phi).
  double K_a() const;
  void validate() const;

  bool operator==(const TailingsLoadParams&) const = default;
};

struct LoadSchedule {
  double ramp_duration = 10.0 * kSecondsPerDay;
  bool hold_until_steady = true;
  double raise_height = 1.0;  // m
  double t_max = 400.0 * kSecondsPerDay;

  void validate() const;

  bool operator==(const LoadSchedule&) const = default;
};

/// Water pressure on the wetted upstream face, gamma_w (WL - y). Requires y <= WL.
double hydrostatic_load(double y, double water_level, double gamma_w);

struct TailingsPressure {
  double x = 0.0;
  double y = 0.0;
  double magnitude = 0.0;
};

/// Horizontal and vertical thrust of the impounded tailings at height y.
/// Throws ConfigError for y outside [0, H].
TailingsPressure tailings_load(double y, const TailingsLoadParams& params, double height, double water_level,
                               double gamma_w);

struct CrestLoad {
  double x = 0.0;
  double y = 0.0;
};

/// Load of the added layer: q_y = gamma_f * raise_height, q_x = K_a q_y,
/// ramped linearly over the ramp duration and held afterwards.
CrestLoad crest_load(double t, const LoadSchedule& schedule, const TailingsLoadParams& params);

/// Complete problem description of the dam level raise.
struct DamScenario {
  DamGeometry geometry;
  MaterialParams material;
  TailingsLoadParams tailings;
  LoadSchedule schedule;
  /// Seepage coefficient on a downstream edge of length l is
  /// multiplier * k_s / (gamma_w * l).
  double seepage_multiplier = 1.0;

  void validate() const;

  bool operator==(const DamScenario&) const = default;
};

/// Mechanical and hydraulic conditions on every boundary part:
///   B: u = 0, no flow
///   UD: tailings thrust plus crest load, no flow
///   UW: as UD plus water pressure, p = gamma_w (WL - y)
///   T: vertical crest load, no flow
///   D: traction free, seepage outflow where p > 0
BoundarySetup build_boundary_conditions(const DamScenario& scenario);

enum class MechanicalKind : std::uint8_t { Fixed, Traction, Free };

struct EdgeConditions {
  BoundaryTag tag;
  MechanicalKind mechanical;
  FlowBCKind flow;
};

/// One entry per boundary edge of the mesh, in mesh order.
std::vector<EdgeConditions> edge_conditions(const Mesh& mesh, const BoundarySetup& setup);

/// Scenario material with the saturated conductivity replaced by k_s.
MaterialParams material_with_conductivity(const DamScenario& scenario, double k_s);

/// Assembler for the dam at conductivity k_s.
std::shared_ptr<const Assembler> make_dam_assembler(std::shared_ptr<const Mesh> mesh, const DamScenario& scenario,
                                                    double k_s);

}  // namespace damrom
