#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "damrom/dofmap.hpp"
#include "damrom/mesh.hpp"
#include "damrom/rom.hpp"
#include "damrom/scenario.hpp"
#include "damrom/solver.hpp"

namespace damrom {

/// Pieces of the p = 0 contour of the linear pressure field, each an
/// ordered chain of points. Empty when p has no sign change.
std::vector<std::vector<Point2>> phreatic_lines(const Mesh& mesh, const Eigen::VectorXd& P);

/// Legacy ASCII VTK unstructured grid (triangles, cell type 5) with the
/// displacement at the vertices and the pressure as point data.
void write_fields(const std::filesystem::path& path, const Mesh& mesh, const FieldState& state);

/// Legacy ASCII VTK polydata with the phreatic line as polylines.
void write_phreatic_line(const std::filesystem::path& path, const Mesh& mesh, const FieldState& state);

/// Everything a comparison run produces.
struct RunReport {
  double k_s = 0.0;
  ErrorReport errors;
  double fom_seconds = 0.0;      // transient wall time of the full-order run
  double rom_seconds = 0.0;      // online wall time of the reduced run
  double offline_seconds = 0.0;  // snapshots plus basis construction, when known
  Index basis_u = 0;
  Index basis_p = 0;
  Index dofs_u = 0;
  Index dofs_p = 0;
  std::size_t steps = 0;
  bool fom_steady = false;
  std::uint64_t config_fingerprint = 0;
  std::uint64_t scenario_fingerprint = 0;

  double speedup() const { return rom_seconds > 0.0 ? fom_seconds / rom_seconds : 0.0; }
};

/// Writes <stem>.json (summary) and <stem>.csv (columns t, e_p, e_u, one row
/// per time step, t in days).
void emit_report(const RunReport& report, const std::filesystem::path& stem);

}  // namespace damrom
