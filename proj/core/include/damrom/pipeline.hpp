#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>

#include "damrom/config.hpp"
#include "damrom/matrix_io.hpp"
#include "damrom/output.hpp"
#include "damrom/rom.hpp"

namespace damrom {

/// Mesh named by the config: the Gmsh file when given, else the generated
/// dam mesh at mesh_levels.
std::shared_ptr<const Mesh> build_mesh(const RunConfig& config);

DiscretisationId discretisation_id(const Mesh& mesh);

/// Full-order run with the time spent on its initial condition.
struct FomResult {
  Trajectory trajectory;
  double initial_seconds = 0.0;
};

/// Reduced run with the time spent on its initial condition.
struct RomResult {
  ReducedRun run;
  double initial_seconds = 0.0;
};

/// One dam problem on one mesh: every stage of the offline/online workflow.
/// Const member functions do not share mutable state and may run
/// concurrently.
class DamStudy {
 public:
  explicit DamStudy(RunConfig config);
  DamStudy(RunConfig config, std::shared_ptr<const Mesh> mesh);

  const RunConfig& config() const { return config_; }
  const Mesh& mesh() const { return *mesh_; }
  std::shared_ptr<const Mesh> mesh_ptr() const { return mesh_; }
  DiscretisationId id() const { return discretisation_id(*mesh_); }

  std::shared_ptr<const Assembler> assembler(double k_s) const;

  /// Steady state under the initial loads, from the hydrostatic guess. It
  /// does not depend on k_s (every conductivity, the seepage coefficient
  /// included, scales with it), so it is computed once at the configured
  /// k_s and shared by all runs.
  FieldState initial_state() const;

  /// Shared initial steady state followed by the transient run under the stop rule
  /// (or exactly fixed_steps steps when positive).
  FomResult run_fom(double k_s, int fixed_steps = 0) const;

  /// Full-order runs over the configured sweep, `threads` at a time.
  SnapshotSet collect(int threads) const;

  ReducedBasis reduce(const SnapshotSet& snapshots) const;

  /// Online run: reduced steady state from the projected hydrostatic guess,
  /// then the reduced transient. Never calls the sparse solver.
  RomResult run_rom(std::shared_ptr<const ReducedBasis> basis, double k_s, int fixed_steps = 0) const;

  /// FOM and ROM at the same k_s on the same time grid.
  RunReport bench(std::shared_ptr<const ReducedBasis> basis, double k_s) const;
  RunReport report(double k_s, const Trajectory& fom, const Trajectory& rom, const ReducedBasis& basis) const;

  /// Field and phreatic-line VTK files at the output cadence.
  void write_field_series(const std::filesystem::path& dir, const Trajectory& traj) const;

 private:
  RunConfig config_;
  std::shared_ptr<const Mesh> mesh_;
  mutable std::mutex initial_mutex_;
  mutable std::optional<FieldState> initial_;
};

}  // namespace damrom
