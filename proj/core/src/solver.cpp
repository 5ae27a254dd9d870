#include "damrom/solver.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <sstream>

#include <klu.h>

namespace damrom {

namespace {
std::atomic<std::uint64_t> g_factorizations{0};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }
}  // namespace

void ThetaScheme::validate() const {
  if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("theta must lie in [0, 1]");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("time step must be positive");
}

void PicardControl::validate() const {
  if (!(tol_rel > 0.0)) throw ConfigError("Picard tolerance must be positive");
  if (max_iters < 1) throw ConfigError("Picard max_iters must be at least 1");
  if (!(relaxation > 0.0 && relaxation <= 1.0)) throw ConfigError("Picard relaxation must lie in (0, 1]");
  if (seepage_lock_after < 0) throw ConfigError("seepage lock iteration must be non-negative");
  if (!(min_relaxation > 0.0 && min_relaxation <= relaxation))
    throw ConfigError("Picard min_relaxation must lie in (0, relaxation]");
  if (!(stall_ratio > 0.0)) throw ConfigError("Picard stall_ratio must be positive");
  if (factor_reuse_sweeps < 0) throw ConfigError("factor reuse sweeps must be non-negative");
}

const Eigen::VectorXd& SeepageActiveSet::update(const Eigen::VectorXd& P, int it) {
  if (lock_after_ == 0 || it <= lock_after_ || active_.size() != P.size())
    active_ = P;
  else
    active_ = active_.cwiseMax(P);
  return active_;
}

ThetaWeights ThetaWeights::from(const ThetaScheme& s) {
  const double th = s.theta, om = 1.0 - s.theta, dt = s.dt;
  return {th, -th * om, -th * th, om, th, dt * th * om, dt * th * th, -om, -th};
}

ThetaRhs theta_rhs(const OperatorSet& ops_old, const OperatorSet& ops_new, const FieldState& prev,
                   const ThetaScheme& scheme) {
  const double th = scheme.theta, om = 1.0 - th, dt = scheme.dt;
  if (prev.U.size() != ops_old.num_u() || prev.P.size() != ops_old.num_p() || ops_new.num_u() != ops_old.num_u() ||
      ops_new.num_p() != ops_old.num_p())
    throw NumericalError("theta combination: dimension mismatch");
  const Eigen::VectorXd& U = prev.U;
  const Eigen::VectorXd& P = prev.P;

  ThetaRhs r;
  r.f_u = om * ops_old.f_u + th * ops_new.f_u;
  if (om != 0.0) r.f_u -= om * (*ops_old.K * U);
  r.f_u += (th * om) * (ops_new.Q * P) + (om * om) * (ops_old.Q * P);

  r.f_p = (dt * om) * ops_old.f_p + (dt * th) * ops_new.f_p;
  r.f_p -= (dt * om * om) * (ops_old.H * P) + (dt * th * om) * (ops_new.H * P);
  r.f_p -= om * (ops_old.S * P) + th * (ops_new.S * P);
  r.f_p += om * (ops_old.C * U) + th * (ops_new.C * U);
  return r;
}

SystemLayout::SystemLayout(const OperatorSet& like) : n_u_(like.num_u()), n_p_(like.num_p()) {
  const Index n = n_u_ + n_p_;
  if (!like.K || like.K->rows() != n_u_ || like.Q.rows() != n_u_ || like.Q.cols() != n_p_ || like.C.rows() != n_p_ ||
      like.C.cols() != n_u_ || like.H.rows() != n_p_ || like.S.rows() != n_p_)
    throw NumericalError("system layout: inconsistent operator dimensions");
  std::vector<Eigen::Triplet<double, int>> trips;
  auto add_block = [&trips](const SpMat& m, Index r0, Index c0) {
    for (Index c = 0; c < m.outerSize(); ++c)
      for (SpMat::InnerIterator it(m, c); it; ++it)
        trips.emplace_back(static_cast<int>(r0 + it.row()), static_cast<int>(c0 + it.col()), 0.0);
  };
  add_block(*like.K, 0, 0);
  add_block(like.Q, 0, n_u_);
  add_block(like.C, n_u_, 0);
  add_block(like.H, n_u_, n_u_);
  add_block(like.S, n_u_, n_u_);
  for (Index i = 0; i < n; ++i) trips.emplace_back(static_cast<int>(i), static_cast<int>(i), 0.0);
  pattern_.resize(n, n);
  pattern_.setFromTriplets(trips.begin(), trips.end());
  pattern_.makeCompressed();

  k_ = BlockEmbedding(*like.K, pattern_, 0, 0);
  q_ = BlockEmbedding(like.Q, pattern_, 0, n_u_);
  c_ = BlockEmbedding(like.C, pattern_, n_u_, 0);
  h_ = BlockEmbedding(like.H, pattern_, n_u_, n_u_);
  s_ = BlockEmbedding(like.S, pattern_, n_u_, n_u_);
}

CoupledSystem SystemLayout::combine(const OperatorSet& ops_old, const OperatorSet& ops_new, const FieldState& prev,
                                    const ThetaScheme& scheme) const {
  if (ops_old.num_u() != n_u_ || ops_new.num_u() != n_u_ || ops_old.num_p() != n_p_ || ops_new.num_p() != n_p_)
    throw NumericalError("theta combination: dimension mismatch");
  const ThetaWeights w = ThetaWeights::from(scheme);
  CoupledSystem sys;
  sys.n_u = n_u_;
  sys.n_p = n_p_;
  sys.A = pattern_;
  k_.add(w.k, *ops_new.K, sys.A);
  q_.add(w.q_old, ops_old.Q, sys.A);
  q_.add(w.q_new, ops_new.Q, sys.A);
  c_.add(w.c_old, ops_old.C, sys.A);
  c_.add(w.c_new, ops_new.C, sys.A);
  h_.add(w.h_old, ops_old.H, sys.A);
  h_.add(w.h_new, ops_new.H, sys.A);
  s_.add(w.s_old, ops_old.S, sys.A);
  s_.add(w.s_new, ops_new.S, sys.A);

  ThetaRhs rhs = theta_rhs(ops_old, ops_new, prev, scheme);
  sys.b.resize(n_u_ + n_p_);
  sys.b << rhs.f_u, rhs.f_p;
  return sys;
}

CoupledSystem combine_theta(const OperatorSet& ops_old, const OperatorSet& ops_new, const FieldState& prev,
                            const ThetaScheme& scheme) {
  return SystemLayout(ops_new).combine(ops_old, ops_new, prev, scheme);
}

namespace {
// max_i |r_i| / (|A| |x| + |b|)_i
double componentwise_backward_error(const SpMat& A, const Eigen::VectorXd& x, const Eigen::VectorXd& b,
                                    const Eigen::VectorXd& r) {
  Eigen::VectorXd scale = b.cwiseAbs();
  for (Index c = 0; c < A.outerSize(); ++c)
    for (SpMat::InnerIterator it(A, c); it; ++it) scale[it.row()] += std::abs(it.value() * x[c]);
  double worst = 0.0;
  for (Index i = 0; i < r.size(); ++i) {
    if (r[i] == 0.0) continue;
    worst = std::max(worst, scale[i] > 0.0 ? std::abs(r[i]) / scale[i] : INFINITY);
  }
  return worst;
}
}  // namespace

struct SparseDirectSolver::Backend {
  klu_common common{};
  klu_symbolic* symbolic = nullptr;
  klu_numeric* numeric = nullptr;
  std::vector<int> outer, inner;
  Eigen::VectorXd dr, dc;  // equilibration the current factors were built with

  Backend() {
    klu_defaults(&common);
    common.ordering = 0;  // AMD
    common.scale = 0;     // rows and columns are equilibrated beforehand
  }
  ~Backend() { reset(); }
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  void drop_numeric() {
    if (numeric) klu_free_numeric(&numeric, &common);
  }
  void reset() {
    drop_numeric();
    if (symbolic) klu_free_symbolic(&symbolic, &common);
    outer.clear();
    inner.clear();
  }
  bool same_pattern(const SpMat& A) const {
    if (!symbolic || static_cast<std::size_t>(A.outerSize()) + 1 != outer.size() ||
        static_cast<std::size_t>(A.nonZeros()) != inner.size())
      return false;
    return std::equal(outer.begin(), outer.end(), A.outerIndexPtr()) &&
           std::equal(inner.begin(), inner.end(), A.innerIndexPtr());
  }
  void analyze(SpMat& A) {
    reset();
    symbolic = klu_analyze(static_cast<int>(A.rows()), A.outerIndexPtr(), A.innerIndexPtr(), &common);
    if (!symbolic) throw NumericalError("sparse LU symbolic analysis failed (status " + std::to_string(common.status) + ")");
    outer.assign(A.outerIndexPtr(), A.outerIndexPtr() + A.outerSize() + 1);
    inner.assign(A.innerIndexPtr(), A.innerIndexPtr() + A.nonZeros());
  }
  void factor(SpMat& A) {
    drop_numeric();
    numeric = klu_factor(A.outerIndexPtr(), A.innerIndexPtr(), A.valuePtr(), symbolic, &common);
    ++g_factorizations;
    if (!numeric) {
      throw NumericalError(common.status == KLU_SINGULAR ? "singular matrix: sparse LU found a zero pivot"
                                                         : "sparse LU factorisation failed");
    }
  }
  /// Returns false when the old pivot sequence could not be reused.
  bool refactor(SpMat& A) {
    ++g_factorizations;
    return klu_refactor(A.outerIndexPtr(), A.innerIndexPtr(), A.valuePtr(), symbolic, numeric, &common) != 0;
  }
  void solve_in_place(Eigen::VectorXd& x) {
    klu_solve(symbolic, numeric, static_cast<int>(x.size()), 1, x.data(), &common);
  }
};

SparseDirectSolver::SparseDirectSolver(int reuse_sweeps)
    : reuse_sweeps_(reuse_sweeps), backend_(std::make_unique<Backend>()) {}
SparseDirectSolver::~SparseDirectSolver() = default;
SparseDirectSolver::SparseDirectSolver(SparseDirectSolver&&) noexcept = default;
SparseDirectSolver& SparseDirectSolver::operator=(SparseDirectSolver&&) noexcept = default;

Eigen::VectorXd SparseDirectSolver::solve(const SpMat& A_in, const Eigen::VectorXd& b) {
  if (A_in.rows() != A_in.cols() || A_in.rows() != b.size()) throw NumericalError("solve_sparse: dimension mismatch");
  SpMat A = A_in;
  A.makeCompressed();
  const Index n = A.rows();
  Backend& be = *backend_;
  const double norm_a = frobenius_norm(A);
  auto bound = [&](const Eigen::VectorXd& x) { return 1e-10 * (norm_a * x.norm() + b.norm()); };

  if (reuse_sweeps_ > 0 && be.numeric && be.same_pattern(A)) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n), r = b;
    double last = r.norm();
    for (int k = 0; k < reuse_sweeps_; ++k) {
      Eigen::VectorXd z = be.dr.cwiseProduct(r);
      be.solve_in_place(z);
      x += be.dc.cwiseProduct(z);
      r = b - A * x;
      const double rn = r.norm();
      if (!std::isfinite(rn)) break;
      if (rn <= bound(x) && componentwise_backward_error(A, x, b, r) <= 1e-12) return x;
      if (rn > 0.25 * last) break;
      last = rn;
    }
  }

  Eigen::VectorXd dr = Eigen::VectorXd::Zero(n), dc = Eigen::VectorXd::Zero(n);
  for (Index c = 0; c < n; ++c)
    for (SpMat::InnerIterator it(A, c); it; ++it) dr[it.row()] = std::max(dr[it.row()], std::abs(it.value()));
  for (Index i = 0; i < n; ++i) {
    if (!(dr[i] > 0.0) || !std::isfinite(dr[i])) {
      std::ostringstream msg;
      msg << "singular matrix: row " << i << (std::isfinite(dr[i]) ? " is empty" : " has non-finite entries");
      throw NumericalError(msg.str());
    }
    dr[i] = 1.0 / dr[i];
  }
  SpMat As = A;
  for (Index c = 0; c < n; ++c)
    for (SpMat::InnerIterator it(As, c); it; ++it) {
      it.valueRef() *= dr[it.row()];
      dc[c] = std::max(dc[c], std::abs(it.value()));
    }
  for (Index c = 0; c < n; ++c) {
    if (!(dc[c] > 0.0)) throw NumericalError("singular matrix: column " + std::to_string(c) + " is empty");
    dc[c] = 1.0 / dc[c];
  }
  for (Index c = 0; c < n; ++c)
    for (SpMat::InnerIterator it(As, c); it; ++it) it.valueRef() *= dc[c];

  if (!be.same_pattern(As)) be.analyze(As);
  be.dr = dr;
  be.dc = dc;
  bool fresh = be.numeric == nullptr;
  if (fresh) {
    be.factor(As);
  } else if (!be.refactor(As)) {
    be.factor(As);
    fresh = true;
  }

  auto attempt = [&](Eigen::VectorXd& x, Eigen::VectorXd& r) {
    Eigen::VectorXd y = dr.cwiseProduct(b);
    be.solve_in_place(y);
    x = dc.cwiseProduct(y);
    r = b - A * x;
    if (r.norm() > bound(x)) {
      Eigen::VectorXd z = dr.cwiseProduct(r);
      be.solve_in_place(z);
      x += dc.cwiseProduct(z);
      r = b - A * x;
    }
    return x.allFinite() && r.norm() <= bound(x);
  };
  Eigen::VectorXd x, r;
  bool ok = attempt(x, r);
  if (!ok && !fresh) {
    be.factor(As);
    ok = attempt(x, r);
  }
  if (!ok) {
    std::ostringstream msg;
    msg << "singular or ill-conditioned matrix: residual " << r.norm() << " exceeds bound " << bound(x);
    throw NumericalError(msg.str());
  }
  return x;
}

std::uint64_t SparseDirectSolver::factorization_count() { return g_factorizations.load(); }

Eigen::VectorXd solve_sparse(const SpMat& A, const Eigen::VectorXd& b) {
  SparseDirectSolver s;
  return s.solve(A, b);
}

double picard_increment(const Eigen::VectorXd& U_new, const Eigen::VectorXd& U_old, const Eigen::VectorXd& P_new,
                        const Eigen::VectorXd& P_old, double floor) {
  const double eu = (U_new - U_old).norm() / std::max(U_new.norm(), floor);
  const double ep = (P_new - P_old).norm() / std::max(P_new.norm(), floor);
  return std::sqrt(eu * eu + ep * ep);
}

void impose_constraints(const Constraints& constraints, FieldState& state) {
  const Index n_u = state.U.size();
  for (const auto& [dof, value] : constraints.entries()) {
    if (dof < n_u)
      state.U[dof] = value;
    else
      state.P[dof - n_u] = value;
  }
}

Eigen::VectorXd stack(const FieldState& state) {
  Eigen::VectorXd x(state.U.size() + state.P.size());
  x << state.U, state.P;
  return x;
}

TransientSolver::TransientSolver(std::shared_ptr<const Assembler> assembler, ThetaScheme scheme, PicardControl control)
    : assembler_(std::move(assembler)),
      scheme_(scheme),
      control_(control),
      layout_(assembler_->assemble(Eigen::VectorXd::Zero(assembler_->dofs().num_p()), 0.0)),
      linear_(control_.factor_reuse_sweeps) {
  scheme_.validate();
  control_.validate();
}

std::shared_ptr<const OperatorSet> TransientSolver::operators_at(const FieldState& state) const {
  return std::make_shared<const OperatorSet>(assembler_->assemble(state.P, state.time));
}

StepResult TransientSolver::step(const FieldState& prev, const OperatorSet& ops_prev, const ThetaScheme& scheme,
                                 std::optional<double> load_time) {
  scheme.validate();
  const Constraints& cons = assembler_->constraints();
  const double t_next = prev.time + scheme.dt;
  const double lt = load_time.value_or(t_next);
  const Index n_u = assembler_->dofs().num_u();

  FieldState iterate = prev;
  impose_constraints(cons, iterate);
  StepResult out;
  SeepageActiveSet active(control_.seepage_lock_after);
  double w = control_.relaxation;
  for (int it = 1; it <= control_.max_iters; ++it) {
    const Eigen::VectorXd& active_P = active.update(iterate.P, it);
    auto ops = std::make_shared<const OperatorSet>(assembler_->assemble(iterate.P, lt, active_P));
    CoupledSystem sys = layout_.combine(ops_prev, *ops, prev, scheme);
    apply_dirichlet(sys.A, sys.b, cons);
    const Eigen::VectorXd x = linear_.solve(sys.A, sys.b);

    FieldState next;
    next.time = t_next;
    next.U = w * x.head(n_u) + (1.0 - w) * iterate.U;
    next.P = w * x.tail(x.size() - n_u) + (1.0 - w) * iterate.P;
    impose_constraints(cons, next);
    const double inc = picard_increment(next.U, iterate.U, next.P, iterate.P, control_.norm_floor);
    const bool stalled = !out.history.empty() && inc > control_.stall_ratio * out.history.back();
    out.history.push_back(inc);
    iterate = std::move(next);
    if (stalled) w = std::max(0.5 * w, control_.min_relaxation);
    if (inc < control_.tol_rel) {
      out.state = std::move(iterate);
      out.ops = std::move(ops);
      out.iterations = it;
      return out;
    }
  }
  std::ostringstream msg;
  msg << "Picard iteration did not converge in " << control_.max_iters << " iterations at t = " << t_next
      << " s; last increments:";
  const std::size_t n = out.history.size();
  for (std::size_t k = n > 5 ? n - 5 : 0; k < n; ++k) msg << ' ' << out.history[k];
  throw ConvergenceError(msg.str(), out.history);
}

StepResult picard_solve_step(TransientSolver& solver, const FieldState& state, const OperatorSet& ops) {
  return solver.step(state, ops);
}

double Trajectory::total_wall() const {
  double s = 0.0;
  for (double w : wall_seconds) s += w;
  return s;
}

double pressure_change_kpa(const Eigen::VectorXd& P_new, const Eigen::VectorXd& P_old) {
  return (P_new - P_old).norm() * 1e-3;
}

Trajectory run_transient(TransientSolver& solver, const FieldState& initial, const StopRule& rule) {
  Trajectory traj;
  traj.times.push_back(initial.time);
  traj.states.push_back(initial);
  traj.iterations.push_back(0);
  traj.wall_seconds.push_back(0.0);

  const double dt = solver.scheme().dt;
  std::shared_ptr<const OperatorSet> ops = solver.operators_at(initial);
  for (int n = 1;; ++n) {
    if (rule.fixed_steps > 0 && n > rule.fixed_steps) break;
    const FieldState& prev = traj.states.back();
    const auto t0 = Clock::now();
    StepResult res;
    try {
      res = solver.step(prev, *ops);
    } catch (const ConvergenceError& e) {
      traj.failure = e.what();
      break;
    }
    const double wall = seconds_since(t0);
    const double change = pressure_change_kpa(res.state.P, prev.P);
    res.state.time = initial.time + n * dt;
    traj.times.push_back(res.state.time);
    traj.iterations.push_back(res.iterations);
    traj.wall_seconds.push_back(wall);
    traj.states.push_back(std::move(res.state));
    ops = std::move(res.ops);

    const double t = traj.times.back();
    if (rule.fixed_steps > 0) continue;
    if (t >= rule.plateau_time - 1e-9 * dt && change < rule.tol_kpa) {
      traj.reached_steady = true;
      break;
    }
    if (t >= rule.t_max - 1e-9 * dt) break;
  }
  return traj;
}

FieldState hydrostatic_pressure(const Assembler& assembler, double water_level) {
  const Mesh& mesh = assembler.mesh();
  const double gamma_w = assembler.material().fluid.gamma_w;
  FieldState s;
  s.U = Eigen::VectorXd::Zero(assembler.dofs().num_u());
  s.P.resize(assembler.dofs().num_p());
  for (std::size_t v = 0; v < mesh.num_nodes(); ++v)
    s.P[static_cast<Index>(v)] = gamma_w * (water_level - mesh.node(static_cast<int>(v)).y);
  impose_constraints(assembler.constraints(), s);
  return s;
}

FieldState hydrostatic_guess(const Assembler& assembler, double water_level) {
  FieldState s = hydrostatic_pressure(assembler, water_level);
  equilibrate_displacement(assembler, s, 0.0);
  return s;
}

void equilibrate_displacement(const Assembler& assembler, FieldState& state, double load_time) {
  const OperatorSet ops = assembler.assemble(state.P, load_time);
  const Index n_u = ops.num_u();
  Constraints fixed;
  for (const auto& [dof, value] : assembler.constraints().entries())
    if (dof < n_u) fixed.add(dof, value);
  SpMat K = *ops.K;
  Eigen::VectorXd rhs = ops.f_u + ops.Q * state.P;
  apply_dirichlet(K, rhs, fixed);
  state.U = solve_sparse(K, rhs);
}

FieldState initial_steady_state(std::shared_ptr<const Assembler> assembler, const PicardControl& control,
                                const FieldState& guess, const SteadyStateOptions& options) {
  if (!(options.dt0 > 0.0) || !(options.growth >= 1.0) || !(options.dt_max >= options.dt0))
    throw ConfigError("invalid steady-state march settings");
  TransientSolver solver(assembler, ThetaScheme{1.0, options.dt0}, control);
  FieldState state = guess;
  state.time = 0.0;
  impose_constraints(assembler->constraints(), state);
  auto ops = std::make_shared<const OperatorSet>(assembler->assemble(state.P, options.load_time));

  double dt = options.dt0;
  for (int n = 0; n < options.max_steps; ++n) {
    StepResult res;
    try {
      res = solver.step(state, *ops, ThetaScheme{1.0, dt}, options.load_time);
    } catch (const ConvergenceError&) {
      dt *= 0.25;
      if (dt < 1e-6 * options.dt0) throw;
      continue;
    }
    const double change = pressure_change_kpa(res.state.P, state.P);
    state = std::move(res.state);
    state.time = 0.0;
    ops = std::move(res.ops);
    if (dt >= options.dt_max && change < options.tol_kpa) {
      state.time = guess.time;
      return state;
    }
    dt = std::min(dt * options.growth, options.dt_max);
  }
  throw NumericalError("steady state not reached within " + std::to_string(options.max_steps) + " pseudo-steps");
}

}  // namespace damrom
