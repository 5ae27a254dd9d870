#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>

#include "damrom/rom.hpp"
#include "damrom/solver.hpp"

namespace damrom {

/// Binary matrix file: 8-byte magic "DRMAT001", rows and cols as
/// little-endian u64, then rows*cols little-endian f64 in row-major order.
void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& M);
Eigen::MatrixXd read_matrix(const std::filesystem::path& path);

/// Identity of the discretisation a basis belongs to.
struct DiscretisationId {
  std::uint64_t mesh_hash = 0;
  std::uint64_t dof_fingerprint = 0;
};

/// Basis archive: basis_u.bin, basis_p.bin, lift_u.bin, lift_p.bin and
/// manifest.json (threshold, singular values, mesh hash, dof fingerprint).
void save_basis(const std::filesystem::path& dir, const ReducedBasis& basis, const DiscretisationId& id);

/// Throws IoError("basis not found ...") when the archive is missing and
/// ConfigError when it was built for another mesh.
ReducedBasis load_basis(const std::filesystem::path& dir, const DiscretisationId& expected);

/// Snapshot directory: one matrix file per field per run plus index.json
/// holding the parameter value and time stamps of every column.
void save_snapshots(const std::filesystem::path& dir, const SnapshotSet& snapshots, const DiscretisationId& id);
SnapshotSet load_snapshots(const std::filesystem::path& dir, const DiscretisationId& expected);

/// Trajectory directory: U.bin and P.bin (one column per time level) and
/// trajectory.json with times, iteration counts and wall-clock seconds.
void save_trajectory(const std::filesystem::path& dir, const Trajectory& traj);
Trajectory load_trajectory(const std::filesystem::path& dir);

}  // namespace damrom
