#include "damrom/pipeline.hpp"

#include <chrono>
#include <cstdio>

#include "damrom/msh_io.hpp"

namespace damrom {

namespace fs = std::filesystem;

namespace {
using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }
}  // namespace

std::shared_ptr<const Mesh> build_mesh(const RunConfig& config) {
  if (!config.mesh_file.empty()) return std::make_shared<const Mesh>(read_msh(config.mesh_file));
  return std::make_shared<const Mesh>(generate_dam_mesh(config.scenario.geometry, config.mesh_levels));
}

DiscretisationId discretisation_id(const Mesh& mesh) { return {mesh.fingerprint(), DofMap(mesh).fingerprint()}; }

DamStudy::DamStudy(RunConfig config) : DamStudy(config, build_mesh(config)) {}

DamStudy::DamStudy(RunConfig config, std::shared_ptr<const Mesh> mesh)
    : config_(std::move(config)), mesh_(std::move(mesh)) {
  config_.validate();
  if (!mesh_) throw ConfigError("no mesh");
}

std::shared_ptr<const Assembler> DamStudy::assembler(double k_s) const {
  return make_dam_assembler(mesh_, config_.scenario, k_s);
}

FieldState DamStudy::initial_state() const {
  std::lock_guard lock(initial_mutex_);
  if (!initial_) {
    auto asm_ = assembler(config_.scenario.material.vg.k_s);
    const FieldState guess = hydrostatic_guess(*asm_, config_.scenario.geometry.water_level);
    initial_ = initial_steady_state(asm_, config_.picard, guess, config_.steady);
  }
  return *initial_;
}

FomResult DamStudy::run_fom(double k_s, int fixed_steps) const {
  auto asm_ = assembler(k_s);
  FomResult out;
  const auto t0 = Clock::now();
  const FieldState initial = initial_state();
  out.initial_seconds = seconds_since(t0);

  TransientSolver solver(asm_, config_.scheme, config_.picard);
  StopRule rule = config_.stop_rule();
  rule.fixed_steps = fixed_steps;
  out.trajectory = run_transient(solver, initial, rule);
  return out;
}

SnapshotSet DamStudy::collect(int threads) const {
  return collect_snapshots(config_.rom.sweep, [this](double k_s) { return run_fom(k_s).trajectory; }, threads);
}

ReducedBasis DamStudy::reduce(const SnapshotSet& snapshots) const {
  // Constraints do not depend on k_s.
  const auto asm_ = assembler(config_.rom.sweep.front());
  return build_reduced_basis(snapshots, asm_->constraints(), config_.rom.threshold_ratio);
}

RomResult DamStudy::run_rom(std::shared_ptr<const ReducedBasis> basis, double k_s, int fixed_steps) const {
  auto asm_ = assembler(k_s);
  if (basis->lift_u.size() != asm_->dofs().num_u() || basis->lift_p.size() != asm_->dofs().num_p())
    throw ConfigError("basis does not match the mesh");
  ReducedSolver solver(asm_, basis, config_.scheme, config_.picard);
  RomResult out;
  const auto t0 = Clock::now();
  ReducedState guess = basis->project(hydrostatic_pressure(*asm_, config_.scenario.geometry.water_level));
  solver.equilibrate_displacement(guess, config_.steady.load_time);
  const ReducedState initial = reduced_steady_state(solver, guess, config_.steady);
  out.initial_seconds = seconds_since(t0);

  StopRule rule = config_.stop_rule();
  rule.fixed_steps = fixed_steps;
  out.run = run_reduced(solver, initial, rule);
  return out;
}

RunReport DamStudy::report(double k_s, const Trajectory& fom, const Trajectory& rom,
                           const ReducedBasis& basis) const {
  RunReport r;
  r.k_s = k_s;
  r.errors = compare_fom_rom(fom, rom);
  r.fom_seconds = fom.total_wall();
  r.rom_seconds = rom.total_wall();
  r.basis_u = basis.size_u();
  r.basis_p = basis.size_p();
  r.dofs_u = basis.lift_u.size();
  r.dofs_p = basis.lift_p.size();
  r.steps = fom.steps();
  r.fom_steady = fom.reached_steady;
  r.config_fingerprint = config_fingerprint(config_);
  r.scenario_fingerprint = scenario_fingerprint(config_, k_s);
  return r;
}

RunReport DamStudy::bench(std::shared_ptr<const ReducedBasis> basis, double k_s) const {
  FomResult fom = run_fom(k_s);
  if (fom.trajectory.failure) throw NumericalError("full-order run failed: " + *fom.trajectory.failure);
  RomResult rom = run_rom(basis, k_s, static_cast<int>(fom.trajectory.steps()));
  if (rom.run.trajectory.failure) throw NumericalError("reduced run failed: " + *rom.run.trajectory.failure);
  return report(k_s, fom.trajectory, rom.run.trajectory, *basis);
}

void DamStudy::write_field_series(const fs::path& dir, const Trajectory& traj) const {
  const std::size_t n = traj.states.size();
  const auto every = static_cast<std::size_t>(config_.output.field_every);
  char name[64];
  for (std::size_t i = 0; i < n; ++i) {
    if (i % every != 0 && i + 1 != n) continue;
    std::snprintf(name, sizeof name, "fields_%05zu.vtk", i);
    write_fields(dir / name, *mesh_, traj.states[i]);
    std::snprintf(name, sizeof name, "phreatic_%05zu.vtk", i);
    write_phreatic_line(dir / name, *mesh_, traj.states[i]);
  }
}

}  // namespace damrom
