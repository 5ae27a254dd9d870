#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <random>

#include "damrom/scenario.hpp"
#include "damrom/solver.hpp"
#include "test_problems.hpp"

using namespace damrom;
using damrom::testing::fixture;
using damrom::testing::loaded_column;
using damrom::testing::read_table;
using damrom::testing::uniform_state;

namespace {

SpMat scalar(double v) {
  SpMat m(1, 1);
  m.insert(0, 0) = v;
  m.makeCompressed();
  return m;
}

OperatorSet scalar_ops(double K, double Q, double C, double S, double H, double fu, double fp) {
  OperatorSet o;
  o.K = std::make_shared<const SpMat>(scalar(K));
  o.Q = scalar(Q);
  o.C = scalar(C);
  o.S = scalar(S);
  o.H = scalar(H);
  o.f_u = Eigen::VectorXd::Constant(1, fu);
  o.f_p = Eigen::VectorXd::Constant(1, fp);
  o.pressure = Eigen::VectorXd::Zero(1);
  return o;
}

OperatorSet random_ops(std::mt19937& rng, Index nu, Index np, std::shared_ptr<const SpMat> K) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  auto dense = [&](Index r, Index c) {
    Eigen::MatrixXd m(r, c);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j) m(i, j) = d(rng);
    return SpMat(m.sparseView(0.0, 0.0));
  };
  OperatorSet o;
  o.K = std::move(K);
  o.Q = dense(nu, np);
  o.C = dense(np, nu);
  o.S = dense(np, np);
  o.H = dense(np, np);
  o.f_u = Eigen::VectorXd::NullaryExpr(nu, [&] { return d(rng); });
  o.f_p = Eigen::VectorXd::NullaryExpr(np, [&] { return d(rng); });
  o.pressure = Eigen::VectorXd::Zero(np);
  return o;
}

OperatorSet scaled_sum(const OperatorSet& a, const OperatorSet& b, double s) {
  OperatorSet o = a;
  o.Q = SpMat(a.Q + s * b.Q);
  o.C = SpMat(a.C + s * b.C);
  o.S = SpMat(a.S + s * b.S);
  o.H = SpMat(a.H + s * b.H);
  o.f_u = a.f_u + s * b.f_u;
  o.f_p = a.f_p + s * b.f_p;
  return o;
}

Eigen::VectorXd reference_lu(const SpMat& A, const Eigen::VectorXd& b) {
  return damrom::testing::scaled_dense_solve(Eigen::MatrixXd(A), b);
}

// Settled column: load applied, pressure uniform at the drained value,
// displacement in equilibrium.
FieldState settled(const Assembler& a, double p) {
  FieldState s = uniform_state(a, p);
  equilibrate_displacement(a, s, 0.0);
  return s;
}

}  // namespace

TEST(ThetaScheme, MatchesSymbolicExpansion) {
  const auto rows = read_table(fixture("theta_oracle.csv"));
  ASSERT_EQ(rows.size(), 24u);
  for (const auto& r : rows) {
    const double theta = r[0], dt = r[1], K = r[2];
    const OperatorSet o0 = scalar_ops(K, r[3], r[5], r[7], r[9], r[11], r[13]);
    OperatorSet o1 = scalar_ops(K, r[4], r[6], r[8], r[10], r[12], r[14]);
    o1.K = o0.K;
    FieldState prev;
    prev.U = Eigen::VectorXd::Constant(1, r[15]);
    prev.P = Eigen::VectorXd::Constant(1, r[16]);
    const CoupledSystem sys = combine_theta(o0, o1, prev, ThetaScheme{theta, dt});
    const Eigen::MatrixXd A(sys.A);
    const double expected_A[4] = {r[17], r[18], r[19], r[20]};
    const double got_A[4] = {A(0, 0), A(0, 1), A(1, 0), A(1, 1)};
    for (int k = 0; k < 4; ++k)
      EXPECT_NEAR(got_A[k], expected_A[k], 1e-12 * std::max(1.0, std::abs(expected_A[k]))) << "theta " << theta;
    EXPECT_NEAR(sys.b[0], r[21], 1e-12 * std::max(1.0, std::abs(r[21])));
    EXPECT_NEAR(sys.b[1], r[22], 1e-12 * std::max(1.0, std::abs(r[22])));
  }
}

TEST(ThetaScheme, WeightsForBackwardEuler) {
  const ThetaWeights w = ThetaWeights::from(ThetaScheme{1.0, 2.0});
  EXPECT_EQ(w.k, 1.0);
  EXPECT_EQ(w.q_old, 0.0);
  EXPECT_EQ(w.q_new, -1.0);
  EXPECT_EQ(w.c_old, 0.0);
  EXPECT_EQ(w.h_new, 2.0);
  EXPECT_EQ(w.s_new, -1.0);
}

TEST(ThetaScheme, CombinationIsLinearInEachOperatorSet) {
  std::mt19937 rng(7);
  const Index nu = 6, np = 4;
  Eigen::MatrixXd Kd = Eigen::MatrixXd::Identity(nu, nu) * 3.0;
  auto K = std::make_shared<const SpMat>(Kd.sparseView());
  const OperatorSet a0 = random_ops(rng, nu, np, K), b0 = random_ops(rng, nu, np, K);
  const OperatorSet a1 = random_ops(rng, nu, np, K), b1 = random_ops(rng, nu, np, K);
  FieldState prev;
  prev.U = Eigen::VectorXd::LinSpaced(nu, -1.0, 2.0);
  prev.P = Eigen::VectorXd::LinSpaced(np, 0.5, -0.5);
  const ThetaScheme sch{0.75, 0.3};
  const double s = 1.7;
  const CoupledSystem base = combine_theta(a0, a1, prev, sch);
  // Old level.
  {
    const CoupledSystem sum = combine_theta(scaled_sum(a0, b0, s), a1, prev, sch);
    const CoupledSystem only_b = combine_theta(b0, a1, prev, sch);
    const CoupledSystem zero_b = combine_theta(scaled_sum(b0, b0, -1.0), a1, prev, sch);
    // sum - base == s * (only_b - zero_b)
    EXPECT_LT((Eigen::MatrixXd(sum.A - base.A) - s * Eigen::MatrixXd(only_b.A - zero_b.A)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(((sum.b - base.b) - s * (only_b.b - zero_b.b)).cwiseAbs().maxCoeff(), 1e-12);
  }
  // New level.
  {
    const CoupledSystem sum = combine_theta(a0, scaled_sum(a1, b1, s), prev, sch);
    const CoupledSystem only_b = combine_theta(a0, b1, prev, sch);
    const CoupledSystem zero_b = combine_theta(a0, scaled_sum(b1, b1, -1.0), prev, sch);
    EXPECT_LT((Eigen::MatrixXd(sum.A - base.A) - s * Eigen::MatrixXd(only_b.A - zero_b.A)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(((sum.b - base.b) - s * (only_b.b - zero_b.b)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ThetaScheme, LayoutMatchesOneShotCombination) {
  const auto col = loaded_column(1.0, 4.0, 2, 8, 50e3, 20e3);
  const FieldState s = uniform_state(*col.assembler, 20e3);
  const OperatorSet ops = col.assembler->assemble(s.P, 0.0);
  const SystemLayout layout(ops);
  const CoupledSystem a = layout.combine(ops, ops, s, ThetaScheme{});
  const CoupledSystem b = combine_theta(ops, ops, s, ThetaScheme{});
  EXPECT_EQ(frobenius_norm(SpMat(a.A - b.A)), 0.0);
  EXPECT_EQ((a.b - b.b).norm(), 0.0);
}

TEST(Transient, BackwardEulerMatchesDirectImplementation) {
  const auto col = loaded_column(1.0, 4.0, 2, 8, 50e3, 20e3);
  const Assembler& a = *col.assembler;
  const double dt = 3600.0;
  TransientSolver solver(col.assembler, ThetaScheme{1.0, dt}, PicardControl{});
  FieldState fom = uniform_state(a, 20e3);
  FieldState ref = fom;
  auto ops = solver.operators_at(fom);
  const Index nu = a.dofs().num_u(), np = a.dofs().num_p();
  for (int n = 0; n < 5; ++n) {
    StepResult r = solver.step(fom, *ops);
    fom = r.state;
    ops = r.ops;

    const OperatorSet o = a.assemble(ref.P, ref.time + dt);
    std::vector<Eigen::Triplet<double>> t;
    auto put = [&t](const SpMat& m, Index r0, Index c0, double s) {
      for (Index c = 0; c < m.outerSize(); ++c)
        for (SpMat::InnerIterator it(m, c); it; ++it) t.emplace_back(r0 + it.row(), c0 + it.col(), s * it.value());
    };
    put(*o.K, 0, 0, 1.0);
    put(o.Q, 0, nu, -1.0);
    put(o.C, nu, 0, 1.0);
    put(o.H, nu, nu, dt);
    put(o.S, nu, nu, -1.0);
    SpMat A(nu + np, nu + np);
    A.setFromTriplets(t.begin(), t.end());
    Eigen::VectorXd b(nu + np);
    b << o.f_u, dt * o.f_p + o.C * ref.U - o.S * ref.P;
    apply_dirichlet(A, b, a.constraints());
    const Eigen::VectorXd x = reference_lu(A, b);
    ref.U = x.head(nu);
    ref.P = x.tail(np);
    ref.time += dt;

    EXPECT_LT((fom.U - ref.U).norm(), 1e-10 * ref.U.norm());
    EXPECT_LT((fom.P - ref.P).norm(), 1e-10 * ref.P.norm());
  }
}

TEST(Transient, LinearProblemConvergesImmediately) {
  const auto col = loaded_column(1.0, 4.0, 2, 8, 50e3, 20e3);
  TransientSolver solver(col.assembler, ThetaScheme{}, PicardControl{});
  const FieldState s = uniform_state(*col.assembler, 20e3);
  const StepResult r = solver.step(s, *solver.operators_at(s));
  EXPECT_LE(r.iterations, 2);
}

TEST(Transient, ConvergedStateIsAFixedPoint) {
  const auto col = loaded_column(1.0, 4.0, 2, 8, 50e3, 20e3);
  TransientSolver solver(col.assembler, ThetaScheme{}, PicardControl{});
  const FieldState s = settled(*col.assembler, 20e3);
  const StepResult r = solver.step(s, *solver.operators_at(s));
  EXPECT_LT((r.state.P - s.P).norm(), 1e-8 * s.P.norm());
  EXPECT_LT((r.state.U - s.U).norm(), 1e-8 * s.U.norm());
  EXPECT_EQ(r.iterations, 1);
}

TEST(Transient, StopRuleFiresAtSteadyState) {
  const auto col = loaded_column(1.0, 4.0, 2, 8, 50e3, 20e3);
  TransientSolver solver(col.assembler, ThetaScheme{}, PicardControl{});
  StopRule rule;
  rule.t_max = 100 * 8640.0;
  const Trajectory tr = run_transient(solver, settled(*col.assembler, 20e3), rule);
  EXPECT_TRUE(tr.reached_steady);
  EXPECT_EQ(tr.steps(), 1u);
  EXPECT_EQ(tr.states.size(), tr.times.size());
  EXPECT_EQ(tr.iterations.front(), 0);
}

TEST(Transient, FixedStepsAndTimeStamps) {
  const auto col = loaded_column(1.0, 4.0, 2, 8, 50e3, 20e3, 5 * 8640.0);
  TransientSolver solver(col.assembler, ThetaScheme{0.75, 8640.0}, PicardControl{});
  StopRule rule;
  rule.fixed_steps = 7;
  const Trajectory tr = run_transient(solver, uniform_state(*col.assembler, 20e3), rule);
  ASSERT_EQ(tr.steps(), 7u);
  EXPECT_FALSE(tr.reached_steady);
  for (std::size_t n = 1; n < tr.times.size(); ++n) {
    EXPECT_GT(tr.times[n], tr.times[n - 1]);
    EXPECT_NEAR(tr.times[n], n * 8640.0, 1e-6);
    EXPECT_EQ(tr.states[n].time, tr.times[n]);
  }
  EXPECT_GE(tr.total_wall(), 0.0);
}

TEST(Transient, DirichletValuesHeldEveryStep) {
  DamScenario sc;
  auto mesh = std::make_shared<const Mesh>(generate_dam_mesh(sc.geometry, 4));
  auto a = make_dam_assembler(mesh, sc, 1e-8);
  TransientSolver solver(a, ThetaScheme{0.75, 8640.0}, PicardControl{});
  StopRule rule;
  rule.fixed_steps = 12;
  const Trajectory tr = run_transient(solver, hydrostatic_guess(*a, sc.geometry.water_level), rule);
  ASSERT_FALSE(tr.failure.has_value());
  for (const FieldState& s : tr.states) {
    const Eigen::VectorXd x = stack(s);
    for (const auto& [dof, value] : a->constraints().entries()) EXPECT_EQ(x[dof], value);
  }
}

TEST(Transient, HalvingTheStepKeepsTheSteadyState) {
  DamScenario sc;
  auto mesh = std::make_shared<const Mesh>(generate_dam_mesh(sc.geometry, 4));
  auto a = make_dam_assembler(mesh, sc, 5e-8);
  const FieldState init = initial_steady_state(a, PicardControl{}, hydrostatic_guess(*a, sc.geometry.water_level));
  auto run = [&](double dt) {
    TransientSolver solver(a, ThetaScheme{0.75, dt}, PicardControl{});
    StopRule rule;
    rule.plateau_time = sc.schedule.ramp_duration;
    rule.tol_kpa = 1e-4;
    rule.t_max = sc.schedule.t_max;
    const Trajectory tr = run_transient(solver, init, rule);
    EXPECT_TRUE(tr.reached_steady);
    return tr.states.back().P;
  };
  const Eigen::VectorXd coarse = run(0.1 * 86400.0);
  const Eigen::VectorXd fine = run(0.05 * 86400.0);
  EXPECT_LT((coarse - fine).norm(), 1e-3 * fine.norm());
}

TEST(Transient, RunsAreDeterministic) {
  DamScenario sc;
  auto mesh = std::make_shared<const Mesh>(generate_dam_mesh(sc.geometry, 3));
  auto a = make_dam_assembler(mesh, sc, 1e-8);
  auto run = [&] {
    TransientSolver solver(a, ThetaScheme{}, PicardControl{});
    StopRule rule;
    rule.fixed_steps = 15;
    return run_transient(solver, hydrostatic_guess(*a, sc.geometry.water_level), rule);
  };
  const Trajectory x = run(), y = run();
  ASSERT_EQ(x.steps(), y.steps());
  for (std::size_t n = 0; n < x.states.size(); ++n) {
    EXPECT_EQ((x.states[n].P - y.states[n].P).norm(), 0.0);
    EXPECT_EQ((x.states[n].U - y.states[n].U).norm(), 0.0);
  }
}

TEST(Picard, NonConvergenceCarriesHistory) {
  DamScenario sc;
  auto mesh = std::make_shared<const Mesh>(generate_dam_mesh(sc.geometry, 4));
  auto a = make_dam_assembler(mesh, sc, 1e-8);
  PicardControl ctl;
  ctl.max_iters = 2;
  ctl.tol_rel = 1e-300;
  TransientSolver solver(a, ThetaScheme{}, ctl);
  const FieldState s = hydrostatic_guess(*a, sc.geometry.water_level);
  try {
    solver.step(s, *solver.operators_at(s));
    FAIL() << "expected a convergence error";
  } catch (const ConvergenceError& e) {
    EXPECT_EQ(e.history().size(), 2u);
    EXPECT_NE(std::string(e.what()).find("did not converge"), std::string::npos);
  }
  StopRule rule;
  rule.fixed_steps = 3;
  const Trajectory tr = run_transient(solver, s, rule);
  EXPECT_TRUE(tr.failure.has_value());
  EXPECT_EQ(tr.steps(), 0u);
}

TEST(Picard, IncrementScalesEachField) {
  const Eigen::VectorXd U0 = Eigen::VectorXd::Constant(4, 1e-3), P0 = Eigen::VectorXd::Constant(3, 1e5);
  EXPECT_EQ(picard_increment(U0, U0, P0, P0, 1e-12), 0.0);
  const double inc = picard_increment(1.01 * U0, U0, P0, P0, 1e-12);
  EXPECT_NEAR(inc, 0.01 / 1.01, 1e-12);
  const double both = picard_increment(1.01 * U0, U0, 1.01 * P0, P0, 1e-12);
  EXPECT_NEAR(both, std::sqrt(2.0) * 0.01 / 1.01, 1e-12);
}

TEST(Picard, SeepageActiveSetLocks) {
  SeepageActiveSet s(2);
  Eigen::VectorXd a(2), b(2);
  a << 1.0, -1.0;
  b << -1.0, 2.0;
  EXPECT_EQ(s.update(a, 1), a);
  EXPECT_EQ(s.update(b, 2), b);
  Eigen::VectorXd c(2);
  c << 3.0, -5.0;
  const Eigen::VectorXd got = s.update(c, 3);
  EXPECT_EQ(got[0], 3.0);
  EXPECT_EQ(got[1], 2.0);
  SeepageActiveSet off(0);
  EXPECT_EQ(off.update(c, 40), c);
}

TEST(Picard, ControlValidation) {
  PicardControl c;
  EXPECT_NO_THROW(c.validate());
  c.tol_rel = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.max_iters = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.relaxation = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(ThetaScheme({1.2, 1.0}).validate(), ConfigError);
  EXPECT_THROW(ThetaScheme({0.5, 0.0}).validate(), ConfigError);
}

TEST(SparseSolver, MatchesDenseSolve) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  const int n = 40;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    M(i, i) = 4.0 + d(rng);
    for (int k = 0; k < 3; ++k) M(i, (i * 7 + k * 13 + 1) % n) += d(rng);
  }
  // Badly scaled rows, as in the coupled system.
  for (int i = 0; i < n / 2; ++i) M.row(i) *= 1e8;
  const Eigen::VectorXd b = Eigen::VectorXd::NullaryExpr(n, [&] { return d(rng); });
  const SpMat A = M.sparseView();
  const Eigen::VectorXd x = solve_sparse(A, b);
  const Eigen::VectorXd ref = M.fullPivLu().solve(b);
  EXPECT_LT((x - ref).norm(), 1e-10 * ref.norm());
}

TEST(SparseSolver, ReusesFactorsForNearbyMatrices) {
  const auto col = loaded_column(1.0, 4.0, 2, 8, 50e3, 20e3);
  const FieldState s = uniform_state(*col.assembler, 20e3);
  const OperatorSet ops = col.assembler->assemble(s.P, 0.0);
  CoupledSystem sys = combine_theta(ops, ops, s, ThetaScheme{});
  apply_dirichlet(sys.A, sys.b, col.assembler->constraints());
  SparseDirectSolver solver(4);
  const Eigen::VectorXd x0 = solver.solve(sys.A, sys.b);
  const auto before = SparseDirectSolver::factorization_count();
  SpMat A2 = sys.A;
  for (Index k = 0; k < A2.nonZeros(); ++k) A2.valuePtr()[k] *= 1.0 + 1e-9 * std::sin(static_cast<double>(k));
  const Eigen::VectorXd x1 = solver.solve(A2, sys.b);
  EXPECT_EQ(SparseDirectSolver::factorization_count(), before);
  EXPECT_LT((A2 * x1 - sys.b).norm(), 1e-10 * (frobenius_norm(A2) * x1.norm() + sys.b.norm()));
  EXPECT_LT((x1 - x0).norm(), 1e-6 * x0.norm());
  // A large change forces a new factorisation and stays accurate.
  SpMat A3 = sys.A;
  for (Index k = 0; k < A3.nonZeros(); ++k) A3.valuePtr()[k] *= 1.0 + 0.3 * std::sin(static_cast<double>(k));
  const Eigen::VectorXd x3 = solver.solve(A3, sys.b);
  EXPECT_GT(SparseDirectSolver::factorization_count(), before);
  EXPECT_LT((x3 - reference_lu(A3, sys.b)).norm(), 1e-8 * x3.norm());
}

TEST(SparseSolver, RejectsSingularAndMismatched) {
  Eigen::MatrixXd M(3, 3);
  M << 1, 2, 3, 2, 4, 6, 0, 0, 1;
  EXPECT_THROW(solve_sparse(M.sparseView(), Eigen::VectorXd::Ones(3)), NumericalError);
  Eigen::MatrixXd Z = Eigen::MatrixXd::Identity(3, 3);
  Z(1, 1) = 0.0;
  EXPECT_THROW(solve_sparse(Z.sparseView(), Eigen::VectorXd::Ones(3)), NumericalError);
  EXPECT_THROW(solve_sparse(Eigen::MatrixXd::Identity(3, 3).sparseView(), Eigen::VectorXd::Ones(2)), NumericalError);
}

TEST(SteadyState, InitialStateIsStationary) {
  DamScenario sc;
  auto mesh = std::make_shared<const Mesh>(generate_dam_mesh(sc.geometry, 4));
  auto a = make_dam_assembler(mesh, sc, 1e-8);
  const FieldState s = initial_steady_state(a, PicardControl{}, hydrostatic_guess(*a, sc.geometry.water_level));
  TransientSolver solver(a, ThetaScheme{1.0, 1e3 * 86400.0}, PicardControl{});
  const StepResult r = solver.step(s, *solver.operators_at(s), ThetaScheme{1.0, 1e3 * 86400.0}, 0.0);
  EXPECT_LT(pressure_change_kpa(r.state.P, s.P), 1e-2);
  SteadyStateOptions bad;
  bad.growth = 0.5;
  EXPECT_THROW(initial_steady_state(a, PicardControl{}, s, bad), ConfigError);
}
