#pragma once

#include <Eigen/Core>
#include <array>
#include <functional>
#include <memory>
#include <vector>

#include "damrom/constitutive.hpp"
#include "damrom/dofmap.hpp"
#include "damrom/mesh.hpp"
#include "damrom/sparse.hpp"

namespace damrom {

/// Mechanical condition on one boundary part. Fixed components take the
/// value of `displacement` (zero when unset); free components see `traction`.
struct MechanicalBC {
  bool fix_x = false;
  bool fix_y = false;
  std::function<Point2(Point2)> displacement;
  /// Traction vector (Pa) at a point with outward normal n at time t.
  std::function<Point2(Point2 x, Point2 n, double t)> traction;
};

enum class FlowBCKind : std::uint8_t { NoFlux, Dirichlet, Seepage };

struct FlowBC {
  FlowBCKind kind = FlowBCKind::NoFlux;
  /// Dirichlet pressure (Pa).
  std::function<double(Point2)> pressure;
  /// Seepage coefficient on an edge is seepage_scale / edge length, so the
  /// outflow is beta * p wherever p > 0.
  double seepage_scale = 0.0;
};

struct BoundarySetup {
  std::array<MechanicalBC, kNumTags> mechanical;
  std::array<FlowBC, kNumTags> flow;

  MechanicalBC& mech(BoundaryTag t) { return mechanical[static_cast<std::size_t>(t)]; }
  FlowBC& hyd(BoundaryTag t) { return flow[static_cast<std::size_t>(t)]; }
  const MechanicalBC& mech(BoundaryTag t) const { return mechanical[static_cast<std::size_t>(t)]; }
  const FlowBC& hyd(BoundaryTag t) const { return flow[static_cast<std::size_t>(t)]; }
};

struct PhysicsOptions {
  /// Self weight rho(p) g and the gravity drive of the Darcy flux.
  bool gravity = true;
  /// Extra body force (N/m^3), for manufactured solutions.
  std::function<Point2(Point2)> body_force;
  /// Volumetric fluid source (1/s) added to the flow right side.
  std::function<double(Point2)> fluid_source;
};

/// Discrete operators linearised at one pressure state.
///
///   K U - Q P = f_u
///   H P + C dU/dt - S dP/dt = f_p
struct OperatorSet {
  std::shared_ptr<const SpMat> K;  // n_u x n_u
  SpMat Q;                         // n_u x n_p
  SpMat C;                         // n_p x n_u
  SpMat S;                         // n_p x n_p, storage (non-positive)
  SpMat H;                         // n_p x n_p, conduction plus seepage
  Eigen::VectorXd f_u;
  Eigen::VectorXd f_p;
  Eigen::VectorXd pressure;
  double time = 0.0;

  Index num_u() const { return f_u.size(); }
  Index num_p() const { return f_p.size(); }
};

/// Plane-strain P2 stiffness for constant moduli.
SpMat assemble_elastic_stiffness(const Mesh& mesh, const DofMap& dofs, const ElasticParams& elastic);

/// Owns the per-element geometry cache and sparsity patterns for one mesh and
/// produces operator sets for arbitrary pressure states. Thread-safe for
/// concurrent assemble() calls.
class Assembler {
 public:
  Assembler(std::shared_ptr<const Mesh> mesh, MaterialParams material, BoundarySetup setup,
            PhysicsOptions options = {});

  const Mesh& mesh() const { return *mesh_; }
  const DofMap& dofs() const { return dofs_; }
  const MaterialParams& material() const { return material_; }
  const BoundarySetup& setup() const { return setup_; }
  const PhysicsOptions& options() const { return options_; }
  const std::shared_ptr<const SpMat>& stiffness() const { return K_; }

  /// Operators at pressure P (pressure block numbering) and time t. The
  /// seepage active set is p > 0 at the edge quadrature points of P.
  OperatorSet assemble(const Eigen::VectorXd& P, double t) const { return assemble(P, t, P); }

  /// Same, with the seepage active set taken from a separate pressure
  /// vector. Used by Picard loops to keep the active set from cycling.
  OperatorSet assemble(const Eigen::VectorXd& P, double t, const Eigen::VectorXd& active_P) const;

  /// Only the seepage part of H at pressure P.
  SpMat seepage_block(const Eigen::VectorXd& P) const;

  /// Dirichlet data in the coupled [U; P] numbering.
  const Constraints& constraints() const { return constraints_; }
  /// Pressure dofs prescribed by each boundary part (first claim wins).
  const std::vector<Index>& dirichlet_pressure_dofs(BoundaryTag tag) const {
    return p_dirichlet_by_tag_[static_cast<std::size_t>(tag)];
  }

 private:
  struct QuadPoint {
    double weight;                   // includes |J|
    Point2 x;
    std::array<double, 12> div;      // divergence of each displacement basis vector
    std::array<double, 6> n_u;       // P2 values
    std::array<double, 3> n_p;       // P1 values
  };
  struct ElementCache {
    std::array<std::array<double, 2>, 3> grad_p;  // P1 gradients
    std::vector<QuadPoint> qp;
  };
  struct EdgeCache {
    BoundaryTag tag;
    std::array<int, 2> vertices;
    int midpoint;
    double length;
    Point2 normal;
    Point2 a, b;
  };

  void build_constraints();

  std::shared_ptr<const Mesh> mesh_;
  DofMap dofs_;
  MaterialParams material_;
  BoundarySetup setup_;
  PhysicsOptions options_;

  std::vector<ElementCache> cache_;
  std::vector<EdgeCache> edges_;
  std::shared_ptr<const SpMat> K_;
  ElementPattern up_pattern_;   // Q: rows u, cols p
  ElementPattern pu_pattern_;   // C: rows p, cols u
  ElementPattern pp_pattern_;   // S and H
  std::vector<std::array<int, 4>> seepage_slots_;  // per boundary edge, into H
  Constraints constraints_;
  std::array<std::vector<Index>, kNumTags> p_dirichlet_by_tag_;
};

/// Symmetric elimination of Dirichlet dofs in A x = b: the right side takes
/// the lift contribution, constrained rows and columns are zeroed with a unit
/// diagonal, and b carries the prescribed values. The pattern is preserved.
void apply_dirichlet(SpMat& A, Eigen::VectorXd& b, const Constraints& constraints);

/// Darcy flux q = -(k/gamma_w)(grad p + gamma_w e_y) at element centroids (m/s).
/// The gravity term is dropped when the assembler runs without gravity.
std::vector<Point2> darcy_flux(const Assembler& assembler, const Eigen::VectorXd& P);

/// Outward volumetric flux (m^2/s per unit thickness) through each boundary
/// part at a steady pressure state. Dirichlet parts use the reaction of the
/// flow equation, seepage parts the Robin outflow, other parts are zero.
struct BoundaryFluxes {
  std::array<double, kNumTags> by_tag{};
  double net() const;
  double max_abs() const;
};
BoundaryFluxes boundary_fluxes(const Assembler& assembler, const Eigen::VectorXd& P);

/// L2 norms of the error against an exact field, with a degree-5 rule.
double l2_error_displacement(const Mesh& mesh, const DofMap& dofs, const Eigen::VectorXd& U,
                             const std::function<Point2(Point2)>& exact);
double l2_error_pressure(const Mesh& mesh, const DofMap& dofs, const Eigen::VectorXd& P,
                         const std::function<double(Point2)>& exact);

}  // namespace damrom
