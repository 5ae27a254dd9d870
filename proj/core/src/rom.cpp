#include "damrom/rom.hpp"

#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <sstream>
#include <thread>

namespace damrom {

namespace {
using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Columns wider than this are compressed block by block before the final SVD.
constexpr Index kSvdBlock = 256;
// Block singular values below this fraction of the largest one are dropped
// during compression. Far below any sensible truncation threshold.
constexpr double kCompressionFloor = 1e-13;

// Returns W with W W^T = M M^T up to the compression floor, with far fewer
// columns than M when M is numerically low rank.
Eigen::MatrixXd compress_columns(const Eigen::MatrixXd& M) {
  std::vector<Eigen::MatrixXd> parts;
  double top = 0.0;
  for (Index c0 = 0; c0 < M.cols(); c0 += kSvdBlock) {
    const Index w = std::min(kSvdBlock, M.cols() - c0);
    const Index r = std::min(M.rows(), w);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(M.middleCols(c0, w));
    const Eigen::MatrixXd R = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(R, Eigen::ComputeThinU);
    const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(M.rows(), r);
    parts.push_back(Q * (svd.matrixU() * svd.singularValues().asDiagonal()));
    if (svd.singularValues().size() > 0) top = std::max(top, svd.singularValues()[0]);
  }
  Index keep = 0;
  for (auto& part : parts) {
    Index k = 0;
    while (k < part.cols() && part.col(k).norm() > kCompressionFloor * top) ++k;
    part.conservativeResize(Eigen::NoChange, k);
    keep += k;
  }
  Eigen::MatrixXd W(M.rows(), std::max<Index>(keep, 1));
  W.setZero();
  Index at = 0;
  for (const auto& part : parts) {
    W.middleCols(at, part.cols()) = part;
    at += part.cols();
  }
  return W;
}

// Blocks differ by many orders of magnitude (stiffness against flow terms),
// so rows and columns are scaled to unit max-norm before the dense LU.
Eigen::VectorXd solve_equilibrated(Eigen::MatrixXd A, const Eigen::VectorXd& b) {
  const Eigen::VectorXd dr = A.cwiseAbs().rowwise().maxCoeff().cwiseInverse();
  A = dr.asDiagonal() * A;
  const Eigen::VectorXd dc = A.cwiseAbs().colwise().maxCoeff().transpose().cwiseInverse();
  A = A * dc.asDiagonal();
  if (!dr.allFinite() || !dc.allFinite()) throw NumericalError("reduced system is singular");
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible()) throw NumericalError("reduced system is singular");
  return dc.cwiseProduct(lu.solve(dr.cwiseProduct(b)));
}

double relative_error(const Eigen::VectorXd& approx, const Eigen::VectorXd& exact) {
  const double den = exact.norm();
  const double num = (approx - exact).norm();
  return den > 0.0 ? num / den : num;
}
}  // namespace

void SnapshotSet::append(const Trajectory& run, double k_s, int run_id) {
  if (run.states.empty()) return;
  const Index n_u = run.states.front().U.size(), n_p = run.states.front().P.size();
  if (cols() > 0 && (U.rows() != n_u || P.rows() != n_p))
    throw ConfigError("snapshot run has a different number of dofs than the set");
  const Index c0 = cols(), n = static_cast<Index>(run.states.size());
  U.conservativeResize(n_u, c0 + n);
  P.conservativeResize(n_p, c0 + n);
  for (Index j = 0; j < n; ++j) {
    const FieldState& s = run.states[static_cast<std::size_t>(j)];
    if (s.U.size() != n_u || s.P.size() != n_p) throw ConfigError("snapshot states differ in size within a run");
    U.col(c0 + j) = s.U;
    P.col(c0 + j) = s.P;
    columns.push_back({k_s, run.times[static_cast<std::size_t>(j)], run_id});
  }
}

void SnapshotSet::validate() const {
  if (U.cols() != cols() || P.cols() != cols()) throw ConfigError("snapshot matrices and metadata disagree in width");
  if (!U.allFinite() || !P.allFinite()) throw NumericalError("snapshot matrix holds non-finite values");
}

int snapshot_threads_from_env() {
  const char* v = std::getenv("DAMROM_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError(std::string("DAMROM_THREADS must be a positive integer, got ") + v);
  return static_cast<int>(std::min<long>(n, 256));
}

SnapshotSet collect_snapshots(std::span<const double> parameters, const SnapshotRun& run, int threads) {
  if (parameters.empty()) throw ConfigError("snapshot parameter list is empty");
  std::vector<Trajectory> results(parameters.size());
  std::vector<std::string> failures(parameters.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < parameters.size(); i = next++) {
      try {
        results[i] = run(parameters[i]);
        if (results[i].failure) failures[i] = *results[i].failure;
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  const int n_workers = std::clamp<int>(threads, 1, static_cast<int>(parameters.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  SnapshotSet set;
  for (std::size_t i = 0; i < parameters.size(); ++i) {
    if (!failures[i].empty()) {
      std::ostringstream msg;
      msg << "snapshot run for k_s = " << parameters[i] << " m/s failed: " << failures[i];
      throw NumericalError(msg.str());
    }
    set.append(results[i], parameters[i], static_cast<int>(i));
  }
  set.validate();
  return set;
}

BasisBlock build_basis(const Eigen::MatrixXd& M, double threshold_ratio) {
  if (!(threshold_ratio > 0.0 && threshold_ratio < 1.0)) throw ConfigError("threshold ratio must lie in (0, 1)");
  if (M.size() == 0) throw ConfigError("snapshot matrix is empty");
  if (!M.allFinite()) throw NumericalError("snapshot matrix holds non-finite values");
  if (M.cwiseAbs().maxCoeff() == 0.0) throw NumericalError("snapshot matrix is identically zero");

  const bool wide = M.cols() > 2 * kSvdBlock && M.rows() > kSvdBlock;
  const Eigen::MatrixXd W = wide ? compress_columns(M) : Eigen::MatrixXd();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(wide ? W : M, Eigen::ComputeThinU);
  const Eigen::VectorXd& sigma = svd.singularValues();

  BasisBlock out;
  out.threshold = threshold_ratio;
  out.spectrum = sigma;
  Index keep = 0;
  while (keep < sigma.size() && sigma[keep] >= threshold_ratio * sigma[0]) ++keep;
  out.vectors = svd.matrixU().leftCols(keep);
  out.retained = sigma.head(keep);
  return out;
}

ReducedState ReducedBasis::project(const FieldState& state) const {
  if (state.U.size() != lift_u.size() || state.P.size() != lift_p.size())
    throw ConfigError("state size does not match the reduced basis");
  ReducedState r;
  r.a_u = u.vectors.transpose() * (state.U - lift_u);
  r.a_p = p.vectors.transpose() * (state.P - lift_p);
  r.time = state.time;
  return r;
}

FieldState ReducedBasis::reconstruct(const ReducedState& state) const {
  if (state.a_u.size() != size_u() || state.a_p.size() != size_p())
    throw ConfigError("coefficient vector length does not match the reduced basis");
  FieldState s;
  s.U = u.vectors * state.a_u + lift_u;
  s.P = p.vectors * state.a_p + lift_p;
  s.time = state.time;
  return s;
}

void lift_vectors(const Constraints& constraints, Index n_u, Index n_p, Eigen::VectorXd& lift_u,
                  Eigen::VectorXd& lift_p) {
  lift_u = Eigen::VectorXd::Zero(n_u);
  lift_p = Eigen::VectorXd::Zero(n_p);
  for (const auto& [dof, value] : constraints.entries()) {
    if (dof < n_u)
      lift_u[dof] = value;
    else
      lift_p[dof - n_u] = value;
  }
}

ReducedBasis build_reduced_basis(const SnapshotSet& snapshots, const Constraints& constraints,
                                 double threshold_ratio) {
  snapshots.validate();
  if (snapshots.cols() == 0) throw ConfigError("snapshot set is empty");
  const Index n_u = snapshots.U.rows(), n_p = snapshots.P.rows();
  ReducedBasis basis;
  lift_vectors(constraints, n_u, n_p, basis.lift_u, basis.lift_p);

  Eigen::MatrixXd Mu = snapshots.U.colwise() - basis.lift_u;
  Eigen::MatrixXd Mp = snapshots.P.colwise() - basis.lift_p;
  for (const auto& [dof, value] : constraints.entries()) {
    if (dof < n_u)
      Mu.row(dof).setZero();
    else
      Mp.row(dof - n_u).setZero();
  }
  basis.u = build_basis(Mu, threshold_ratio);
  basis.p = build_basis(Mp, threshold_ratio);
  for (const auto& [dof, value] : constraints.entries()) {
    if (dof < n_u)
      basis.u.vectors.row(dof).setZero();
    else
      basis.p.vectors.row(dof - n_u).setZero();
  }
  return basis;
}

ReducedSolver::ReducedSolver(std::shared_ptr<const Assembler> assembler, std::shared_ptr<const ReducedBasis> basis,
                             ThetaScheme scheme, PicardControl control)
    : assembler_(std::move(assembler)), basis_(std::move(basis)), scheme_(scheme), control_(control) {
  scheme_.validate();
  control_.validate();
  if (basis_->lift_u.size() != assembler_->dofs().num_u() || basis_->lift_p.size() != assembler_->dofs().num_p())
    throw ConfigError("reduced basis does not match the problem size");
  const Eigen::MatrixXd& Bu = basis_->u.vectors;
  K_ = Bu.transpose() * (*assembler_->stiffness() * Bu);
}

ReducedOperators ReducedSolver::project(std::shared_ptr<const OperatorSet> full) const {
  const Eigen::MatrixXd& Bu = basis_->u.vectors;
  const Eigen::MatrixXd& Bp = basis_->p.vectors;
  ReducedOperators r;
  r.Q = Bu.transpose() * (full->Q * Bp);
  r.C = Bp.transpose() * (full->C * Bu);
  r.S = Bp.transpose() * (full->S * Bp);
  r.H = Bp.transpose() * (full->H * Bp);
  r.full = std::move(full);
  return r;
}

ReducedOperators ReducedSolver::operators_at(const ReducedState& state, double load_time) const {
  const FieldState full = basis_->reconstruct(state);
  return project(std::make_shared<const OperatorSet>(assembler_->assemble(full.P, load_time)));
}

void ReducedSolver::equilibrate_displacement(ReducedState& state, double load_time) const {
  const ReducedBasis& B = *basis_;
  const FieldState full = B.reconstruct(state);
  const OperatorSet ops = assembler_->assemble(full.P, load_time);
  const Eigen::VectorXd g = ops.f_u + ops.Q * full.P - *ops.K * B.lift_u;
  state.a_u = solve_equilibrated(K_, B.u.vectors.transpose() * g);
}

ReducedStepResult ReducedSolver::step(const ReducedState& prev, const ReducedOperators& ops_prev,
                                      const ThetaScheme& scheme, std::optional<double> load_time) const {
  scheme.validate();
  const ReducedBasis& B = *basis_;
  const Index r_u = B.size_u(), r_p = B.size_p();
  const ThetaWeights w = ThetaWeights::from(scheme);
  const double t_next = prev.time + scheme.dt;
  const double lt = load_time.value_or(t_next);
  const FieldState prev_full = B.reconstruct(prev);
  const OperatorSet& old_full = *ops_prev.full;

  ReducedState iterate = prev;
  ReducedStepResult out;
  SeepageActiveSet active(control_.seepage_lock_after);
  double omega = control_.relaxation;
  for (int it = 1; it <= control_.max_iters; ++it) {
    const Eigen::VectorXd P_it = B.p.vectors * iterate.a_p + B.lift_p;
    const Eigen::VectorXd& active_P = active.update(P_it, it);
    ReducedOperators ops = project(std::make_shared<const OperatorSet>(assembler_->assemble(P_it, lt, active_P)));
    const OperatorSet& new_full = *ops.full;

    Eigen::MatrixXd A(r_u + r_p, r_u + r_p);
    A.topLeftCorner(r_u, r_u) = w.k * K_;
    A.topRightCorner(r_u, r_p) = w.q_old * ops_prev.Q + w.q_new * ops.Q;
    A.bottomLeftCorner(r_p, r_u) = w.c_old * ops_prev.C + w.c_new * ops.C;
    A.bottomRightCorner(r_p, r_p) =
        w.h_old * ops_prev.H + w.h_new * ops.H + w.s_old * ops_prev.S + w.s_new * ops.S;

    // Right side: project f^ minus the combined operators applied to the lift.
    const ThetaRhs rhs = theta_rhs(old_full, new_full, prev_full, scheme);
    const Eigen::VectorXd Ku = *new_full.K * B.lift_u;
    const Eigen::VectorXd g_u = rhs.f_u - w.k * Ku - w.q_old * (old_full.Q * B.lift_p) - w.q_new * (new_full.Q * B.lift_p);
    const Eigen::VectorXd g_p = rhs.f_p - w.c_old * (old_full.C * B.lift_u) - w.c_new * (new_full.C * B.lift_u) -
                                w.h_old * (old_full.H * B.lift_p) - w.h_new * (new_full.H * B.lift_p) -
                                w.s_old * (old_full.S * B.lift_p) - w.s_new * (new_full.S * B.lift_p);
    Eigen::VectorXd b(r_u + r_p);
    b << B.u.vectors.transpose() * g_u, B.p.vectors.transpose() * g_p;

    const Eigen::VectorXd x = solve_equilibrated(A, b);
    if (!x.allFinite()) throw NumericalError("reduced solve produced non-finite coefficients");

    ReducedState next;
    next.time = t_next;
    next.a_u = omega * x.head(r_u) + (1.0 - omega) * iterate.a_u;
    next.a_p = omega * x.tail(r_p) + (1.0 - omega) * iterate.a_p;
    const double inc = picard_increment(next.a_u, iterate.a_u, next.a_p, iterate.a_p, control_.norm_floor);
    const bool stalled = !out.history.empty() && inc > control_.stall_ratio * out.history.back();
    out.history.push_back(inc);
    iterate = std::move(next);
    if (stalled) omega = std::max(0.5 * omega, control_.min_relaxation);
    if (inc < control_.tol_rel) {
      out.state = std::move(iterate);
      out.ops = std::move(ops);
      out.iterations = it;
      return out;
    }
  }
  std::ostringstream msg;
  msg << "reduced Picard iteration did not converge in " << control_.max_iters << " iterations at t = " << t_next
      << " s; last increments:";
  const std::size_t n = out.history.size();
  for (std::size_t k = n > 5 ? n - 5 : 0; k < n; ++k) msg << ' ' << out.history[k];
  throw ConvergenceError(msg.str(), out.history);
}

ReducedRun run_reduced(const ReducedSolver& solver, const ReducedState& initial, const StopRule& rule) {
  ReducedRun run;
  Trajectory& traj = run.trajectory;
  const ReducedBasis& B = solver.basis();
  run.reduced.push_back(initial);
  traj.times.push_back(initial.time);
  traj.states.push_back(B.reconstruct(initial));
  traj.iterations.push_back(0);
  traj.wall_seconds.push_back(0.0);

  const double dt = solver.scheme().dt;
  ReducedOperators ops = solver.operators_at(initial, initial.time);
  for (int n = 1;; ++n) {
    if (rule.fixed_steps > 0 && n > rule.fixed_steps) break;
    const auto t0 = Clock::now();
    ReducedStepResult res;
    try {
      res = solver.step(run.reduced.back(), ops);
    } catch (const ConvergenceError& e) {
      traj.failure = e.what();
      break;
    }
    res.state.time = initial.time + n * dt;
    FieldState full = B.reconstruct(res.state);
    const double wall = seconds_since(t0);
    const double change = pressure_change_kpa(full.P, traj.states.back().P);

    traj.times.push_back(res.state.time);
    traj.states.push_back(std::move(full));
    traj.iterations.push_back(res.iterations);
    traj.wall_seconds.push_back(wall);
    run.reduced.push_back(std::move(res.state));
    ops = std::move(res.ops);

    if (rule.fixed_steps > 0) continue;
    const double t = traj.times.back();
    if (t >= rule.plateau_time - 1e-9 * dt && change < rule.tol_kpa) {
      traj.reached_steady = true;
      break;
    }
    if (rule.t_max > 0.0 && t >= rule.t_max - 1e-9 * dt) break;
  }
  return run;
}

ReducedState reduced_steady_state(const ReducedSolver& solver, const ReducedState& guess,
                                  const SteadyStateOptions& options) {
  if (!(options.dt0 > 0.0) || !(options.growth >= 1.0) || !(options.dt_max >= options.dt0))
    throw ConfigError("invalid steady-state march options");
  const ReducedBasis& B = solver.basis();
  ReducedState state = guess;
  state.time = 0.0;
  ReducedOperators ops = solver.operators_at(state, options.load_time);
  double dt = options.dt0;
  for (int n = 0; n < options.max_steps; ++n) {
    const ThetaScheme be{1.0, dt};
    ReducedStepResult res;
    try {
      res = solver.step(state, ops, be, options.load_time);
    } catch (const ConvergenceError&) {
      dt *= 0.25;
      if (dt < 1e-6 * options.dt0) throw;
      continue;
    }
    const double change =
        pressure_change_kpa(B.p.vectors * res.state.a_p + B.lift_p, B.p.vectors * state.a_p + B.lift_p);
    state = std::move(res.state);
    state.time = 0.0;
    ops = std::move(res.ops);
    if (dt >= options.dt_max && change < options.tol_kpa) return state;
    dt = std::min(dt * options.growth, options.dt_max);
  }
  throw ConvergenceError("reduced steady-state march did not settle in " + std::to_string(options.max_steps) +
                             " steps",
                         {});
}

ErrorReport compare_fom_rom(const Trajectory& fom, const Trajectory& rom) {
  if (fom.states.size() != rom.states.size() || fom.times.size() != rom.times.size())
    throw ConfigError("trajectories have different numbers of time levels");
  ErrorReport rep;
  for (std::size_t i = 0; i < fom.states.size(); ++i) {
    const double scale = std::max({1.0, std::abs(fom.times[i]), std::abs(rom.times[i])});
    if (std::abs(fom.times[i] - rom.times[i]) > 1e-9 * scale) throw ConfigError("trajectories have different time grids");
    const double eu = relative_error(rom.states[i].U, fom.states[i].U);
    const double ep = relative_error(rom.states[i].P, fom.states[i].P);
    if (i == 0) {
      rep.initial_e_u = eu;
      rep.initial_e_p = ep;
      continue;
    }
    rep.times.push_back(fom.times[i]);
    rep.e_u.push_back(eu);
    rep.e_p.push_back(ep);
    rep.max_e_u = std::max(rep.max_e_u, eu);
    rep.max_e_p = std::max(rep.max_e_p, ep);
  }
  rep.fom_seconds = fom.total_wall();
  rep.rom_seconds = rom.total_wall();
  rep.speedup = rep.rom_seconds > 0.0 ? rep.fom_seconds / rep.rom_seconds : 0.0;
  return rep;
}

}  // namespace damrom
