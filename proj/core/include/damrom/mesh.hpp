#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace damrom {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }

/// Boundary parts of the dam cross-section: upstream dry, upstream wet,
/// bottom, downstream, top.
enum class BoundaryTag : std::uint8_t { UD = 0, UW = 1, B = 2, D = 3, T = 4 };

inline constexpr std::array<BoundaryTag, 5> kAllTags = {
    BoundaryTag::UD, BoundaryTag::UW, BoundaryTag::B, BoundaryTag::D, BoundaryTag::T};
inline constexpr std::size_t kNumTags = kAllTags.size();

std::string_view tag_name(BoundaryTag tag);
std::optional<BoundaryTag> parse_tag(std::string_view name);

/// Trapezoidal embankment cross-section. The upstream toe sits at the origin,
/// the upstream face rises towards +x, the downstream face falls towards the
/// far toe. Slopes are run:rise.
struct DamGeometry {
  double height = 10.0;
  double water_level = 7.0;
  double crest_width = 4.0;
  double upstream_slope = 2.0;
  double downstream_slope = 2.0;

  double base_width() const { return crest_width + (upstream_slope + downstream_slope) * height; }
  double area() const { return 0.5 * (base_width() + crest_width) * height; }
  double upstream_x(double y) const { return upstream_slope * y; }
  double downstream_x(double y) const { return base_width() - downstream_slope * y; }

  /// Throws ConfigError unless H > 0, 0 < WL < H, crest > 0, slopes >= 0.
  void validate() const;

  bool operator==(const DamGeometry&) const = default;
};

struct BoundaryEdge {
  std::array<int, 2> nodes{};
  BoundaryTag tag = BoundaryTag::B;
};

/// Immutable 2D triangulation with tagged boundary edges.
///
/// Construction validates: node indices in range, positive orientation of
/// every triangle, and that the tagged edges are exactly the topological
/// boundary (edges with incidence one), each tagged once. Boundary edges are
/// re-oriented so the interior lies on their left.
class Mesh {
 public:
  Mesh(std::vector<Point2> nodes, std::vector<std::array<int, 3>> triangles,
       std::vector<BoundaryEdge> boundary);

  std::span<const Point2> nodes() const { return nodes_; }
  std::span<const std::array<int, 3>> triangles() const { return triangles_; }
  std::span<const BoundaryEdge> boundary_edges() const { return boundary_; }

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_triangles() const { return triangles_.size(); }

  const Point2& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  double triangle_area(std::size_t t) const;
  double total_area() const;

  /// Outward unit normal of a boundary edge.
  Point2 outward_normal(const BoundaryEdge& edge) const;
  double edge_length(const BoundaryEdge& edge) const;

  /// Stable 64-bit hash over coordinates, connectivity and tags.
  std::uint64_t fingerprint() const;

 private:
  void validate();

  std::vector<Point2> nodes_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<BoundaryEdge> boundary_;
};

/// Mapped structured mesh of the trapezoid: nx columns, ny rows, each cell
/// split into two triangles. Rows are graded piecewise-linearly so that a
/// horizontal grid line sits exactly at the water level.
Mesh generate_mapped_mesh(const DamGeometry& geom, int nx, int ny);

/// Refinement family used by the driver: ny = n_levels rows and
/// nx = n_levels * max(1, round(mean width / height)) columns.
Mesh generate_dam_mesh(const DamGeometry& geom, int n_levels);

/// Total length of the edges carrying `tag`. Zero if none do.
double boundary_measure(const Mesh& mesh, BoundaryTag tag);

}  // namespace damrom
