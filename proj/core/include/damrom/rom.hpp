#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "damrom/assembly.hpp"
#include "damrom/solver.hpp"

namespace damrom {

/// Provenance of one snapshot column.
struct SnapshotColumn {
  double k_s = 0.0;  // m/s
  double time = 0.0; // s
  int run = 0;
};

/// Serial snapshot layout: every stored state of every run, run after run.
struct SnapshotSet {
  Eigen::MatrixXd U;  // n_u x columns
  Eigen::MatrixXd P;  // n_p x columns
  std::vector<SnapshotColumn> columns;

  Index cols() const { return static_cast<Index>(columns.size()); }
  /// Appends all states of a trajectory, initial condition included.
  void append(const Trajectory& run, double k_s, int run_id);
  /// Throws if matrix widths and metadata disagree or values are non-finite.
  void validate() const;
};

/// Produces the full-order trajectory for one parameter value.
using SnapshotRun = std::function<Trajectory(double k_s)>;

/// Runs every parameter (in parallel when threads > 1) and merges the
/// trajectories in parameter order. A failed run aborts collection with a
/// NumericalError naming the parameter.
SnapshotSet collect_snapshots(std::span<const double> parameters, const SnapshotRun& run, int threads = 1);

/// Worker count from DAMROM_THREADS, default 1.
int snapshot_threads_from_env();

/// Truncated left singular vectors of one snapshot matrix.
struct BasisBlock {
  Eigen::MatrixXd vectors;   // orthonormal columns
  Eigen::VectorXd retained;  // singular values kept, descending
  Eigen::VectorXd spectrum;  // every singular value, descending
  double threshold = 0.0;

  Index size() const { return vectors.cols(); }
};

/// Thin SVD of M keeping sigma_i / sigma_1 >= threshold_ratio.
BasisBlock build_basis(const Eigen::MatrixXd& M, double threshold_ratio);

struct ReducedState {
  Eigen::VectorXd a_u;
  Eigen::VectorXd a_p;
  double time = 0.0;
};

/// Displacement and pressure bases with rows of constrained dofs zeroed and
/// a lift vector carrying the prescribed values.
struct ReducedBasis {
  BasisBlock u;
  BasisBlock p;
  Eigen::VectorXd lift_u;
  Eigen::VectorXd lift_p;

  Index size_u() const { return u.size(); }
  Index size_p() const { return p.size(); }
  ReducedState project(const FieldState& state) const;
  FieldState reconstruct(const ReducedState& state) const;
};

/// Lift vectors from the Dirichlet data of a problem.
void lift_vectors(const Constraints& constraints, Index n_u, Index n_p, Eigen::VectorXd& lift_u,
                  Eigen::VectorXd& lift_p);

/// Subtracts the lift from every snapshot, zeroes constrained rows and
/// truncates each field with the same threshold.
ReducedBasis build_reduced_basis(const SnapshotSet& snapshots, const Constraints& constraints,
                                 double threshold_ratio);

/// Reduced operators of one Picard linearisation point.
struct ReducedOperators {
  std::shared_ptr<const OperatorSet> full;
  Eigen::MatrixXd Q;  // r_u x r_p
  Eigen::MatrixXd C;  // r_p x r_u
  Eigen::MatrixXd S;  // r_p x r_p
  Eigen::MatrixXd H;  // r_p x r_p
};

struct ReducedStepResult {
  ReducedState state;
  ReducedOperators ops;
  int iterations = 0;
  std::vector<double> history;
};

/// Galerkin-projected theta scheme. Every Picard iterate assembles the
/// full-order operators at the reconstructed pressure, projects them and
/// solves the dense reduced system.
class ReducedSolver {
 public:
  ReducedSolver(std::shared_ptr<const Assembler> assembler, std::shared_ptr<const ReducedBasis> basis,
                ThetaScheme scheme, PicardControl control);

  const ReducedBasis& basis() const { return *basis_; }
  const ThetaScheme& scheme() const { return scheme_; }
  const Assembler& assembler() const { return *assembler_; }

  ReducedOperators project(std::shared_ptr<const OperatorSet> full) const;
  ReducedOperators operators_at(const ReducedState& state, double load_time) const;

  /// Replaces the displacement coefficients by the reduced equilibrium with
  /// the loads at load_time, pressure held.
  void equilibrate_displacement(ReducedState& state, double load_time) const;

  ReducedStepResult step(const ReducedState& prev, const ReducedOperators& ops_prev, const ThetaScheme& scheme,
                         std::optional<double> load_time = std::nullopt) const;
  ReducedStepResult step(const ReducedState& prev, const ReducedOperators& ops_prev) const {
    return step(prev, ops_prev, scheme_);
  }

 private:
  std::shared_ptr<const Assembler> assembler_;
  std::shared_ptr<const ReducedBasis> basis_;
  ThetaScheme scheme_;
  PicardControl control_;
  Eigen::MatrixXd K_;  // projected stiffness, state independent
};

struct ReducedRun {
  Trajectory trajectory;              // reconstructed full-order states
  std::vector<ReducedState> reduced;  // coefficients, same indexing
};

/// Reduced counterpart of run_transient.
ReducedRun run_reduced(const ReducedSolver& solver, const ReducedState& initial, const StopRule& rule);

/// Reduced counterpart of initial_steady_state.
ReducedState reduced_steady_state(const ReducedSolver& solver, const ReducedState& guess,
                                  const SteadyStateOptions& options = {});

/// Per-step relative errors ||X_rom - X_fom|| / ||X_fom|| of each field.
/// The series cover steps 1..N; the initial condition is reported apart.
struct ErrorReport {
  std::vector<double> times;
  std::vector<double> e_u;
  std::vector<double> e_p;
  double initial_e_u = 0.0;
  double initial_e_p = 0.0;
  double max_e_u = 0.0;  // over the steps
  double max_e_p = 0.0;
  double fom_seconds = 0.0;
  double rom_seconds = 0.0;
  double speedup = 0.0;
};

/// Both trajectories must share their time grid.
ErrorReport compare_fom_rom(const Trajectory& fom, const Trajectory& rom);

}  // namespace damrom
