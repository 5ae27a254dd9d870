#include "damrom/dofmap.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "damrom/error.hpp"

namespace damrom {

DofMap::DofMap(const Mesh& mesh) : num_vertices_(static_cast<int>(mesh.num_nodes())) {
  const auto tris = mesh.triangles();
  edges_.reserve(tris.size() * 3);
  for (const auto& t : tris) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      edges_.push_back({std::min(a, b), std::max(a, b)});
    }
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

  element_nodes_.reserve(tris.size());
  for (const auto& t : tris) {
    element_nodes_.push_back({t[0], t[1], t[2], edge_node(t[0], t[1]), edge_node(t[1], t[2]), edge_node(t[2], t[0])});
  }

  positions_.assign(mesh.nodes().begin(), mesh.nodes().end());
  for (const auto& e : edges_) {
    const Point2 a = mesh.node(e[0]), b = mesh.node(e[1]);
    positions_.push_back(0.5 * (a + b));
  }
}

int DofMap::edge_node(int a, int b) const {
  const std::array<int, 2> key{std::min(a, b), std::max(a, b)};
  auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
  if (it == edges_.end() || *it != key)
    throw MeshError("no mesh edge between nodes " + std::to_string(a) + " and " + std::to_string(b));
  return num_vertices_ + static_cast<int>(it - edges_.begin());
}

std::array<Index, 12> DofMap::element_u_dofs(std::size_t t) const {
  std::array<Index, 12> dofs{};
  const auto& nodes = element_nodes_[t];
  for (int a = 0; a < 6; ++a) {
    dofs[2 * a] = u_dof(nodes[a], 0);
    dofs[2 * a + 1] = u_dof(nodes[a], 1);
  }
  return dofs;
}

std::array<Index, 3> DofMap::element_p_dofs(std::size_t t) const {
  const auto& nodes = element_nodes_[t];
  return {p_dof(nodes[0]), p_dof(nodes[1]), p_dof(nodes[2])};
}

std::uint64_t DofMap::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::uint64_t w) {
    for (int i = 0; i < 8; ++i) {
      h ^= (w >> (8 * i)) & 0xffu;
      h *= 0x100000001b3ull;
    }
  };
  mix(static_cast<std::uint64_t>(num_vertices_));
  mix(static_cast<std::uint64_t>(edges_.size()));
  for (const auto& nodes : element_nodes_) {
    for (int n : nodes) mix(static_cast<std::uint64_t>(n));
  }
  return h;
}

void Constraints::add(Index dof, double value) {
  auto [it, inserted] = values_.emplace(dof, value);
  if (!inserted && it->second != value) {
    throw ConfigError("conflicting Dirichlet values on dof " + std::to_string(dof) + ": " +
                      std::to_string(it->second) + " vs " + std::to_string(value));
  }
}

void Constraints::impose(Eigen::Ref<Eigen::VectorXd> x) const {
  for (const auto& [dof, value] : values_) x[dof] = value;
}

std::vector<char> Constraints::mask(Index n) const {
  std::vector<char> m(static_cast<std::size_t>(n), 0);
  for (const auto& [dof, value] : values_) {
    if (dof < 0 || dof >= n) throw ConfigError("constrained dof " + std::to_string(dof) + " out of range");
    m[static_cast<std::size_t>(dof)] = 1;
  }
  return m;
}

}  // namespace damrom
