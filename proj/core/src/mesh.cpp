#include "damrom/mesh.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>
#include <tuple>

#include "damrom/error.hpp"

namespace damrom {

namespace {

constexpr std::array<std::string_view, kNumTags> kTagNames = {"UD", "UW", "B", "D", "T"};

double signed_area(const Point2& a, const Point2& b, const Point2& c) {
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

struct EdgeKey {
  int lo;
  int hi;
  auto operator<=>(const EdgeKey&) const = default;
};

EdgeKey make_key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

class Fnv1a {
 public:
  void add(std::uint64_t word) {
    for (int i = 0; i < 8; ++i) {
      hash_ ^= (word >> (8 * i)) & 0xffu;
      hash_ *= 0x100000001b3ull;
    }
  }
  void add(double v) { add(std::bit_cast<std::uint64_t>(v)); }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ull;
};

}  // namespace

std::string_view tag_name(BoundaryTag tag) { return kTagNames[static_cast<std::size_t>(tag)]; }

std::optional<BoundaryTag> parse_tag(std::string_view name) {
  for (BoundaryTag tag : kAllTags) {
    if (tag_name(tag) == name) return tag;
  }
  return std::nullopt;
}

void DamGeometry::validate() const {
  if (!(height > 0.0)) throw ConfigError("dam height must be positive");
  if (!(water_level > 0.0 && water_level < height))
    throw ConfigError("water level must satisfy 0 < WL < H");
  if (!(crest_width > 0.0)) throw ConfigError("crest width must be positive");
  if (!(upstream_slope >= 0.0 && downstream_slope >= 0.0))
    throw ConfigError("face slopes must be non-negative");
}

Mesh::Mesh(std::vector<Point2> nodes, std::vector<std::array<int, 3>> triangles,
           std::vector<BoundaryEdge> boundary)
    : nodes_(std::move(nodes)), triangles_(std::move(triangles)), boundary_(std::move(boundary)) {
  validate();
}

double Mesh::triangle_area(std::size_t t) const {
  const auto& tri = triangles_[t];
  return signed_area(node(tri[0]), node(tri[1]), node(tri[2]));
}

double Mesh::total_area() const {
  double sum = 0.0;
  for (std::size_t t = 0; t < triangles_.size(); ++t) sum += triangle_area(t);
  return sum;
}

double Mesh::edge_length(const BoundaryEdge& edge) const {
  const Point2 d = node(edge.nodes[1]) - node(edge.nodes[0]);
  return std::hypot(d.x, d.y);
}

Point2 Mesh::outward_normal(const BoundaryEdge& edge) const {
  // Boundary edges are stored with the interior on their left, so the
  // outward normal is the tangent rotated clockwise.
  const Point2 d = node(edge.nodes[1]) - node(edge.nodes[0]);
  const double len = std::hypot(d.x, d.y);
  return {d.y / len, -d.x / len};
}

std::uint64_t Mesh::fingerprint() const {
  Fnv1a h;
  h.add(static_cast<std::uint64_t>(nodes_.size()));
  for (const auto& p : nodes_) {
    h.add(p.x);
    h.add(p.y);
  }
  h.add(static_cast<std::uint64_t>(triangles_.size()));
  for (const auto& t : triangles_) {
    for (int v : t) h.add(static_cast<std::uint64_t>(v));
  }
  h.add(static_cast<std::uint64_t>(boundary_.size()));
  for (const auto& e : boundary_) {
    h.add(static_cast<std::uint64_t>(e.nodes[0]));
    h.add(static_cast<std::uint64_t>(e.nodes[1]));
    h.add(static_cast<std::uint64_t>(e.tag));
  }
  return h.value();
}

void Mesh::validate() {
  const int n = static_cast<int>(nodes_.size());
  auto in_range = [n](int i) { return i >= 0 && i < n; };

  // Directed boundary edges of the triangulation: (a, b) with the triangle on the left.
  std::vector<std::tuple<EdgeKey, int, int>> edges;
  edges.reserve(triangles_.size() * 3);
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    const auto& tri = triangles_[t];
    for (int v : tri) {
      if (!in_range(v)) throw MeshError("triangle " + std::to_string(t) + " references node out of range");
    }
    if (!(triangle_area(t) > 0.0))
      throw MeshError("triangle " + std::to_string(t) + " is not positively oriented");
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k];
      const int b = tri[(k + 1) % 3];
      edges.emplace_back(make_key(a, b), a, b);
    }
  }
  std::sort(edges.begin(), edges.end());

  std::vector<std::pair<EdgeKey, bool>> topo_boundary;  // key, matched by a tag
  for (std::size_t i = 0; i < edges.size();) {
    std::size_t j = i;
    while (j < edges.size() && std::get<0>(edges[j]) == std::get<0>(edges[i])) ++j;
    const std::size_t count = j - i;
    if (count > 2) throw MeshError("non-manifold edge shared by more than two triangles");
    if (count == 1) topo_boundary.emplace_back(std::get<0>(edges[i]), false);
    i = j;
  }

  for (auto& e : boundary_) {
    if (!in_range(e.nodes[0]) || !in_range(e.nodes[1]))
      throw MeshError("boundary edge references node out of range");
    const EdgeKey key = make_key(e.nodes[0], e.nodes[1]);
    auto it = std::lower_bound(topo_boundary.begin(), topo_boundary.end(), std::make_pair(key, false),
                               [](const auto& a, const auto& b) { return a.first < b.first; });
    if (it == topo_boundary.end() || it->first != key)
      throw MeshError("tagged edge (" + std::to_string(e.nodes[0]) + ", " + std::to_string(e.nodes[1]) +
                      ") is not on the boundary");
    if (it->second)
      throw MeshError("boundary edge (" + std::to_string(e.nodes[0]) + ", " + std::to_string(e.nodes[1]) +
                      ") carries more than one tag");
    it->second = true;
    // Orient along the owning triangle so the interior lies on the left.
    auto owner = std::lower_bound(edges.begin(), edges.end(), std::make_tuple(key, 0, 0),
                                  [](const auto& a, const auto& b) { return std::get<0>(a) < std::get<0>(b); });
    e.nodes = {std::get<1>(*owner), std::get<2>(*owner)};
  }
  for (const auto& [key, tagged] : topo_boundary) {
    if (!tagged)
      throw MeshError("untagged boundary edge (" + std::to_string(key.lo) + ", " + std::to_string(key.hi) + ")");
  }
}

Mesh generate_mapped_mesh(const DamGeometry& geom, int nx, int ny) {
  geom.validate();
  if (nx < 1 || ny < 2) throw ConfigError("mapped mesh needs nx >= 1 and ny >= 2");
  if (!(geom.area() > 0.0)) throw MeshError("degenerate dam geometry: zero area");

  // Row carrying the water level; the fraction is snapped to quarters so that
  // the row index doubles exactly under refinement when ny is a multiple of 4.
  const double frac = std::clamp(std::round(4.0 * geom.water_level / geom.height) / 4.0, 0.25, 0.75);
  const int j_wl = std::clamp(static_cast<int>(std::lround(ny * frac)), 1, ny - 1);

  auto row_y = [&](int j) {
    if (j <= j_wl) return geom.water_level * static_cast<double>(j) / j_wl;
    return geom.water_level +
           (geom.height - geom.water_level) * static_cast<double>(j - j_wl) / (ny - j_wl);
  };

  std::vector<Point2> nodes;
  nodes.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  for (int j = 0; j <= ny; ++j) {
    const double y = j == ny ? geom.height : row_y(j);
    const double xl = geom.upstream_x(y);
    const double xr = geom.downstream_x(y);
    for (int i = 0; i <= nx; ++i) {
      const double s = static_cast<double>(i) / nx;
      nodes.push_back({xl + s * (xr - xl), y});
    }
  }
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };

  std::vector<std::array<int, 3>> tris;
  tris.reserve(static_cast<std::size_t>(2 * nx * ny));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      tris.push_back({a, b, c});
      tris.push_back({a, c, d});
    }
  }

  std::vector<BoundaryEdge> boundary;
  for (int i = 0; i < nx; ++i) boundary.push_back({{id(i, 0), id(i + 1, 0)}, BoundaryTag::B});
  for (int j = 0; j < ny; ++j) boundary.push_back({{id(nx, j), id(nx, j + 1)}, BoundaryTag::D});
  for (int i = nx; i > 0; --i) boundary.push_back({{id(i, ny), id(i - 1, ny)}, BoundaryTag::T});
  for (int j = ny; j > 0; --j) {
    const BoundaryTag tag = j <= j_wl ? BoundaryTag::UW : BoundaryTag::UD;
    boundary.push_back({{id(0, j), id(0, j - 1)}, tag});
  }
  return Mesh(std::move(nodes), std::move(tris), std::move(boundary));
}

Mesh generate_dam_mesh(const DamGeometry& geom, int n_levels) {
  geom.validate();
  if (n_levels < 2) throw ConfigError("mesh refinement level must be at least 2");
  const double mean_width = 0.5 * (geom.base_width() + geom.crest_width);
  const int aspect = std::max(1, static_cast<int>(std::lround(mean_width / geom.height)));
  return generate_mapped_mesh(geom, n_levels * aspect, n_levels);
}

double boundary_measure(const Mesh& mesh, BoundaryTag tag) {
  double sum = 0.0;
  for (const auto& e : mesh.boundary_edges()) {
    if (e.tag == tag) sum += mesh.edge_length(e);
  }
  return sum;
}

}  // namespace damrom
