#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "damrom/mesh.hpp"

namespace damrom {

using Index = Eigen::Index;

/// Taylor-Hood degree-of-freedom numbering.
///
/// P2 nodes are the mesh vertices followed by one midpoint per edge. The
/// coupled unknown vector is [U; P]: displacement dofs 2*node + component for
/// every P2 node, then one pressure dof per vertex.
class DofMap {
 public:
  explicit DofMap(const Mesh& mesh);

  int num_vertices() const { return num_vertices_; }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  int num_p2_nodes() const { return num_vertices_ + num_edges(); }

  Index num_u() const { return 2 * static_cast<Index>(num_p2_nodes()); }
  Index num_p() const { return num_vertices_; }
  Index total() const { return num_u() + num_p(); }

  static Index u_dof(int node, int component) { return 2 * static_cast<Index>(node) + component; }
  /// Pressure dof of a vertex inside the pressure block.
  static Index p_dof(int vertex) { return vertex; }
  /// Pressure dof of a vertex in the coupled [U; P] numbering.
  Index p_global(int vertex) const { return num_u() + vertex; }

  const std::array<int, 6>& element_nodes(std::size_t t) const { return element_nodes_[t]; }
  std::array<Index, 12> element_u_dofs(std::size_t t) const;
  std::array<Index, 3> element_p_dofs(std::size_t t) const;

  /// Midpoint P2 node of the mesh edge (a, b); throws if no such edge.
  int edge_node(int a, int b) const;
  Point2 node_position(int p2_node) const { return positions_[static_cast<std::size_t>(p2_node)]; }

  std::uint64_t fingerprint() const;

 private:
  int num_vertices_ = 0;
  std::vector<std::array<int, 2>> edges_;  // sorted (lo, hi)
  std::vector<std::array<int, 6>> element_nodes_;
  std::vector<Point2> positions_;
};

/// Prescribed values on a set of coupled dofs.
class Constraints {
 public:
  /// Adds dof = value. Re-adding the same value is a no-op; a different value
  /// throws ConfigError.
  void add(Index dof, double value);

  bool contains(Index dof) const { return values_.count(dof) != 0; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  const std::map<Index, double>& entries() const { return values_; }

  /// Overwrites the constrained entries of x (coupled numbering).
  void impose(Eigen::Ref<Eigen::VectorXd> x) const;
  /// Dense mask over [0, n): true on constrained dofs.
  std::vector<char> mask(Index n) const;

 private:
  std::map<Index, double> values_;
};

}  // namespace damrom
