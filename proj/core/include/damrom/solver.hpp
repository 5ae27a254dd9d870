#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "damrom/assembly.hpp"
#include "damrom/error.hpp"
#include "damrom/sparse.hpp"

namespace damrom {

struct ThetaScheme {
  double theta = 0.75;
  double dt = 8640.0;  // s

  void validate() const;

  bool operator==(const ThetaScheme&) const = default;
};

struct PicardControl {
  double tol_rel = 1e-6;
  int max_iters = 50;
  double relaxation = 1.0;
  /// Lower bound on field norms when scaling increments.
  double norm_floor = 1e-12;
  /// After this many iterations the seepage active set may only grow
  /// (nodal max over later iterates), so set switching terminates.
  /// Zero disables the lock.
  int seepage_lock_after = 10;
  /// When the increment stops shrinking (ratio above stall_ratio) the
  /// relaxation factor is halved, down to min_relaxation. Equal to
  /// relaxation disables the backoff.
  double min_relaxation = 0.125;
  double stall_ratio = 0.9;
  /// Refinement sweeps tried with stale sparse LU factors before
  /// refactorising (0 refactorises on every solve).
  int factor_reuse_sweeps = 4;

  void validate() const;

  bool operator==(const PicardControl&) const = default;
};

/// Tracks the pressure used to pick the seepage active set in a Picard loop.
class SeepageActiveSet {
 public:
  explicit SeepageActiveSet(int lock_after) : lock_after_(lock_after) {}
  /// Pressure to hand to the assembler at iteration `it` (1-based).
  const Eigen::VectorXd& update(const Eigen::VectorXd& P, int it);

 private:
  int lock_after_;
  Eigen::VectorXd active_;
};

struct FieldState {
  Eigen::VectorXd U;
  Eigen::VectorXd P;
  double time = 0.0;
};

/// Scalar weight of every operator in the theta-combined blocks.
///   K^ = k K
///   Q^ = q_old Q^i + q_new Q^{i+1}
///   C^ = c_old C^i + c_new C^{i+1}
///   H^ = h_old H^i + h_new H^{i+1} + s_old S^i + s_new S^{i+1}
struct ThetaWeights {
  double k, q_old, q_new, c_old, c_new, h_old, h_new, s_old, s_new;

  static ThetaWeights from(const ThetaScheme& scheme);
};

/// Right sides of the theta-combined system.
struct ThetaRhs {
  Eigen::VectorXd f_u;
  Eigen::VectorXd f_p;
};
ThetaRhs theta_rhs(const OperatorSet& ops_old, const OperatorSet& ops_new, const FieldState& prev,
                   const ThetaScheme& scheme);

/// Monolithic [[K^, Q^], [C^, H^]] x = [f^_u; f^_p].
struct CoupledSystem {
  SpMat A;
  Eigen::VectorXd b;
  Index n_u = 0;
  Index n_p = 0;
};

/// Frozen sparsity of the coupled matrix, built from one operator set. Any
/// operator set with the same block patterns can be combined into it.
class SystemLayout {
 public:
  explicit SystemLayout(const OperatorSet& like);

  CoupledSystem combine(const OperatorSet& ops_old, const OperatorSet& ops_new, const FieldState& prev,
                        const ThetaScheme& scheme) const;

 private:
  Index n_u_, n_p_;
  SpMat pattern_;
  BlockEmbedding k_, q_, c_, h_, s_;
};

/// One-shot theta combination; builds a layout on the fly.
CoupledSystem combine_theta(const OperatorSet& ops_old, const OperatorSet& ops_new, const FieldState& prev,
                            const ThetaScheme& scheme);

/// Sparse LU (KLU) with row/column equilibration, a residual check against
/// ||Ax - b|| <= 1e-10 (||A||_F ||x|| + ||b||) and one refinement step. The
/// symbolic analysis is reused while the pattern stays the same, and later
/// factorisations reuse the pivot sequence unless the residual check fails.
class SparseDirectSolver {
 public:
  /// reuse_sweeps > 0 lets a solve first try refinement sweeps with the
  /// previous factors (same pattern); a new factorisation happens only when
  /// those do not reach the residual bound.
  explicit SparseDirectSolver(int reuse_sweeps = 0);
  ~SparseDirectSolver();
  SparseDirectSolver(SparseDirectSolver&&) noexcept;
  SparseDirectSolver& operator=(SparseDirectSolver&&) noexcept;

  Eigen::VectorXd solve(const SpMat& A, const Eigen::VectorXd& b);

  /// Numeric factorisations performed by all solvers in the process.
  static std::uint64_t factorization_count();

 private:
  struct Backend;
  int reuse_sweeps_;
  std::unique_ptr<Backend> backend_;
};

Eigen::VectorXd solve_sparse(const SpMat& A, const Eigen::VectorXd& b);

/// Picard iteration did not reach the tolerance.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, std::vector<double> history)
      : NumericalError(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

/// Scaled increment sqrt((|dU|/|U|)^2 + (|dP|/|P|)^2).
double picard_increment(const Eigen::VectorXd& U_new, const Eigen::VectorXd& U_old, const Eigen::VectorXd& P_new,
                        const Eigen::VectorXd& P_old, double floor);

struct StepResult {
  FieldState state;
  std::shared_ptr<const OperatorSet> ops;  // last assembly, reused as level i
  int iterations = 0;
  std::vector<double> history;
};

/// Full-order time stepper: theta scheme with Picard linearisation.
class TransientSolver {
 public:
  TransientSolver(std::shared_ptr<const Assembler> assembler, ThetaScheme scheme, PicardControl control);

  const Assembler& assembler() const { return *assembler_; }
  const ThetaScheme& scheme() const { return scheme_; }
  const PicardControl& control() const { return control_; }

  /// Operators at a state, for seeding level i of the first step.
  std::shared_ptr<const OperatorSet> operators_at(const FieldState& state) const;

  /// Advances prev by one step. Loads are evaluated at load_time (defaults
  /// to prev.time + dt); the returned state is stamped prev.time + dt.
  StepResult step(const FieldState& prev, const OperatorSet& ops_prev, const ThetaScheme& scheme,
                  std::optional<double> load_time = std::nullopt);
  StepResult step(const FieldState& prev, const OperatorSet& ops_prev) { return step(prev, ops_prev, scheme_); }

 private:
  std::shared_ptr<const Assembler> assembler_;
  ThetaScheme scheme_;
  PicardControl control_;
  SystemLayout layout_;
  SparseDirectSolver linear_;
};

StepResult picard_solve_step(TransientSolver& solver, const FieldState& state, const OperatorSet& ops);

/// Steady-state rule: once t >= plateau_time, stop when the Euclidean norm
/// of the step-to-step pressure change in kPa falls below tol_kpa.
struct StopRule {
  double plateau_time = 0.0;
  double tol_kpa = 1e-2;
  double t_max = 0.0;
  /// When positive, run exactly this many steps and ignore the rule.
  int fixed_steps = 0;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<FieldState> states;  // states[0] is the initial condition
  std::vector<int> iterations;     // per state, 0 for the initial one
  std::vector<double> wall_seconds;
  bool reached_steady = false;
  std::optional<std::string> failure;

  std::size_t steps() const { return states.empty() ? 0 : states.size() - 1; }
  double total_wall() const;
};

/// Pressure change between consecutive states in kPa.
double pressure_change_kpa(const Eigen::VectorXd& P_new, const Eigen::VectorXd& P_old);

/// Fixed-dt run from `initial` until the stop rule fires or t_max. A Picard
/// failure ends the run and is recorded in Trajectory::failure.
Trajectory run_transient(TransientSolver& solver, const FieldState& initial, const StopRule& rule);

struct SteadyStateOptions {
  double dt0 = 8640.0;
  double growth = 2.0;
  double dt_max = 1e5 * 86400.0;
  double tol_kpa = 1e-2;
  int max_steps = 200;
  double load_time = 0.0;

  bool operator==(const SteadyStateOptions&) const = default;
};

/// Solves K U = f_u + Q P for the displacement of a state, pressure fixed.
void equilibrate_displacement(const Assembler& assembler, FieldState& state, double load_time);

/// Pressure p = gamma_w (WL - y) at every vertex and zero displacement,
/// Dirichlet values imposed. No linear solve.
FieldState hydrostatic_pressure(const Assembler& assembler, double water_level);

/// hydrostatic_pressure with the displacement in equilibrium with the loads
/// at t = 0.
FieldState hydrostatic_guess(const Assembler& assembler, double water_level);

/// Pseudo-transient backward-Euler march with growing steps under loads held
/// at load_time, until the pressure change drops below tol_kpa.
FieldState initial_steady_state(std::shared_ptr<const Assembler> assembler, const PicardControl& control,
                                const FieldState& guess, const SteadyStateOptions& options = {});

}  // namespace damrom

namespace damrom {

/// Writes the prescribed values into a state (coupled numbering split into
/// U and P).
void impose_constraints(const Constraints& constraints, FieldState& state);

/// Stacks [U; P].
Eigen::VectorXd stack(const FieldState& state);

}  // namespace damrom
