#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "damrom/assembly.hpp"
#include "damrom/mesh.hpp"
#include "damrom/solver.hpp"

namespace damrom::testing {

inline std::string fixture(const std::string& name) { return std::string(DAMROM_FIXTURES) + "/" + name; }

/// Rectangle [0, width] x [0, height] from the mapped-mesh generator
/// (zero slopes); tags: B bottom, T top, D right, UW/UD left below/above
/// water_level.
inline Mesh box_mesh(double width, double height, int nx, int ny, double water_level = -1.0) {
  DamGeometry g;
  g.height = height;
  g.crest_width = width;
  g.water_level = water_level > 0.0 ? water_level : 0.5 * height;
  g.upstream_slope = 0.0;
  g.downstream_slope = 0.0;
  return generate_mapped_mesh(g, nx, ny);
}

/// Confined column under a top load: rollers on the sides, fixed base,
/// drained top held at p_top, impervious elsewhere, no gravity. With
/// p_top well above zero the medium stays saturated and the problem is
/// linear.
struct Column {
  std::shared_ptr<const Mesh> mesh;
  std::shared_ptr<const Assembler> assembler;
  MaterialParams material;
  double load = 0.0;
  double p_top = 0.0;
};

inline Column loaded_column(double width, double height, int nx, int ny, double load, double p_top,
                            double load_ramp = 0.0, MaterialParams material = {}) {
  Column c;
  c.mesh = std::make_shared<const Mesh>(box_mesh(width, height, nx, ny));
  c.material = material;
  c.load = load;
  c.p_top = p_top;
  BoundarySetup bc;
  bc.mech(BoundaryTag::B).fix_x = true;
  bc.mech(BoundaryTag::B).fix_y = true;
  for (BoundaryTag side : {BoundaryTag::UW, BoundaryTag::UD, BoundaryTag::D}) bc.mech(side).fix_x = true;
  bc.mech(BoundaryTag::T).traction = [load, load_ramp](Point2, Point2, double t) {
    const double f = load_ramp > 0.0 ? std::min(1.0, t / load_ramp) : 1.0;
    return Point2{0.0, -f * load};
  };
  bc.hyd(BoundaryTag::T).kind = FlowBCKind::Dirichlet;
  bc.hyd(BoundaryTag::T).pressure = [p_top](Point2) { return p_top; };
  PhysicsOptions opts;
  opts.gravity = false;
  c.assembler = std::make_shared<const Assembler>(c.mesh, material, bc, opts);
  return c;
}

/// State with zero displacement and uniform pressure, constraints imposed.
inline FieldState uniform_state(const Assembler& a, double p) {
  FieldState s;
  s.U = Eigen::VectorXd::Zero(a.dofs().num_u());
  s.P = Eigen::VectorXd::Constant(a.dofs().num_p(), p);
  impose_constraints(a.constraints(), s);
  return s;
}

/// Comma-separated numeric table; lines starting with '#' and a header row
/// that does not parse as numbers are skipped.
inline std::vector<std::vector<double>> read_table(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (...) {
        numeric = false;
        break;
      }
    }
    if (numeric) rows.push_back(std::move(row));
  }
  return rows;
}

/// Dense reference solve for small badly scaled systems: max-norm row then
/// column equilibration, partial-pivot LU, one refinement step.
inline Eigen::VectorXd scaled_dense_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  const Eigen::VectorXd r = A.cwiseAbs().rowwise().maxCoeff().cwiseInverse();
  const Eigen::MatrixXd Ar = r.asDiagonal() * A;
  const Eigen::VectorXd c = Ar.cwiseAbs().colwise().maxCoeff().transpose().cwiseInverse();
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(Ar * c.asDiagonal());
  Eigen::VectorXd x = c.asDiagonal() * lu.solve(r.asDiagonal() * b);
  x += c.asDiagonal() * lu.solve(r.asDiagonal() * (b - A * x));
  return x;
}

inline double rel_diff(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

}  // namespace damrom::testing
