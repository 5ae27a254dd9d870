#include <benchmark/benchmark.h>

#include "damrom/pipeline.hpp"

using namespace damrom;

namespace {

struct Problem {
  std::shared_ptr<const Mesh> mesh;
  std::shared_ptr<const Assembler> assembler;
  FieldState state;
};

Problem dam(int levels) {
  DamScenario sc;
  Problem p;
  p.mesh = std::make_shared<const Mesh>(generate_dam_mesh(sc.geometry, levels));
  p.assembler = make_dam_assembler(p.mesh, sc, 1e-8);
  p.state = hydrostatic_guess(*p.assembler, sc.geometry.water_level);
  return p;
}

void BM_Assemble(benchmark::State& state) {
  const Problem p = dam(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(p.assembler->assemble(p.state.P, 0.0));
  state.counters["dofs"] = static_cast<double>(p.assembler->dofs().total());
}
BENCHMARK(BM_Assemble)->Arg(10)->Arg(19)->Unit(benchmark::kMillisecond);

void BM_SparseFactorSolve(benchmark::State& state) {
  const Problem p = dam(static_cast<int>(state.range(0)));
  const OperatorSet ops = p.assembler->assemble(p.state.P, 0.0);
  CoupledSystem sys = combine_theta(ops, ops, p.state, ThetaScheme{});
  apply_dirichlet(sys.A, sys.b, p.assembler->constraints());
  SparseDirectSolver solver(0);
  for (auto _ : state) benchmark::DoNotOptimize(solver.solve(sys.A, sys.b));
  state.counters["dofs"] = static_cast<double>(sys.A.rows());
}
BENCHMARK(BM_SparseFactorSolve)->Arg(10)->Arg(19)->Unit(benchmark::kMillisecond);

void BM_TransientStep(benchmark::State& state) {
  const Problem p = dam(static_cast<int>(state.range(0)));
  TransientSolver solver(p.assembler, ThetaScheme{}, PicardControl{});
  const auto ops = solver.operators_at(p.state);
  FieldState start = p.state;
  start.time = 5.0 * kSecondsPerDay;
  for (auto _ : state) benchmark::DoNotOptimize(solver.step(start, *ops));
}
BENCHMARK(BM_TransientStep)->Arg(10)->Arg(19)->Unit(benchmark::kMillisecond);

// Basis from a short full-order run during the load ramp.
void BM_ReducedStep(benchmark::State& state) {
  const Problem p = dam(static_cast<int>(state.range(0)));
  TransientSolver fom(p.assembler, ThetaScheme{}, PicardControl{});
  StopRule rule;
  rule.fixed_steps = 20;
  const Trajectory traj = run_transient(fom, p.state, rule);
  SnapshotSet snaps;
  snaps.append(traj, 1e-8, 0);
  auto basis = std::make_shared<const ReducedBasis>(build_reduced_basis(snaps, p.assembler->constraints(), 1e-4));
  ReducedSolver rom(p.assembler, basis, ThetaScheme{}, PicardControl{});
  const ReducedState start = basis->project(traj.states.back());
  const ReducedOperators ops = rom.operators_at(start, start.time);
  for (auto _ : state) benchmark::DoNotOptimize(rom.step(start, ops));
  state.counters["basis"] = static_cast<double>(basis->size_u() + basis->size_p());
}
BENCHMARK(BM_ReducedStep)->Arg(10)->Arg(19)->Unit(benchmark::kMillisecond);

void BM_BuildBasis(benchmark::State& state) {
  const Index rows = state.range(0), cols = state.range(1);
  Eigen::MatrixXd M(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) M(i, j) = std::sin(0.01 * static_cast<double>(i * (j % 7 + 1))) / (1.0 + j % 13);
  for (auto _ : state) benchmark::DoNotOptimize(build_basis(M, 1e-4));
}
BENCHMARK(BM_BuildBasis)->Args({2000, 500})->Args({6000, 2000})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
