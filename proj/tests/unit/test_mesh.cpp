#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "damrom/dofmap.hpp"
#include "damrom/error.hpp"
#include "damrom/mesh.hpp"
#include "damrom/msh_io.hpp"
#include "test_problems.hpp"

using namespace damrom;
using damrom::testing::box_mesh;
using damrom::testing::fixture;

namespace {

double tag_length(const Mesh& m, BoundaryTag t) { return boundary_measure(m, t); }

}  // namespace

TEST(DamMesh, DefaultLevelSizes) {
  const Mesh m = generate_dam_mesh(DamGeometry{}, 19);
  const DofMap d(m);
  EXPECT_EQ(m.num_nodes(), 780u);
  EXPECT_EQ(d.total(), 6786);
  EXPECT_GE(d.total(), 6000);
}

TEST(DamMesh, GeometryIsReproduced) {
  const DamGeometry g;
  const Mesh m = generate_dam_mesh(g, 8);
  EXPECT_NEAR(m.total_area(), g.area(), 1e-10 * g.area());
  EXPECT_NEAR(tag_length(m, BoundaryTag::B), g.base_width(), 1e-12);
  EXPECT_NEAR(tag_length(m, BoundaryTag::T), g.crest_width, 1e-12);
  const double face = std::hypot(g.upstream_slope, 1.0);
  EXPECT_NEAR(tag_length(m, BoundaryTag::UW), g.water_level * face, 1e-10);
  EXPECT_NEAR(tag_length(m, BoundaryTag::UD), (g.height - g.water_level) * face, 1e-10);
  EXPECT_NEAR(tag_length(m, BoundaryTag::D), g.height * std::hypot(g.downstream_slope, 1.0), 1e-10);
}

TEST(DamMesh, WaterLevelIsAGridLine) {
  const DamGeometry g;
  const Mesh m = generate_dam_mesh(g, 7);
  bool found = false;
  for (const Point2& x : m.nodes())
    if (std::abs(x.y - g.water_level) < 1e-12 && std::abs(x.x - g.upstream_x(g.water_level)) < 1e-12) found = true;
  EXPECT_TRUE(found);
  for (const auto& e : m.boundary_edges()) {
    if (e.tag != BoundaryTag::UW) continue;
    for (int v : e.nodes) EXPECT_LE(m.node(v).y, g.water_level + 1e-12);
  }
}

TEST(DamMesh, TrianglesArePositive) {
  const Mesh m = generate_dam_mesh(DamGeometry{}, 6);
  for (std::size_t t = 0; t < m.num_triangles(); ++t) EXPECT_GT(m.triangle_area(t), 0.0);
}

TEST(DamMesh, FingerprintIsStableAndSensitive) {
  const DamGeometry g;
  EXPECT_EQ(generate_dam_mesh(g, 5).fingerprint(), generate_dam_mesh(g, 5).fingerprint());
  EXPECT_NE(generate_dam_mesh(g, 5).fingerprint(), generate_dam_mesh(g, 6).fingerprint());
  DamGeometry g2 = g;
  g2.crest_width = 5.0;
  EXPECT_NE(generate_dam_mesh(g, 5).fingerprint(), generate_dam_mesh(g2, 5).fingerprint());
}

TEST(DamMesh, RejectsBadGeometry) {
  DamGeometry g;
  g.water_level = 12.0;
  EXPECT_THROW(g.validate(), ConfigError);
  g = {};
  g.upstream_slope = -1.0;
  EXPECT_THROW(g.validate(), ConfigError);
  EXPECT_THROW(generate_dam_mesh(DamGeometry{}, 0), ConfigError);
}

TEST(MeshValidation, RejectsInvertedTriangle) {
  std::vector<Point2> nodes = {{0, 0}, {1, 0}, {0, 1}};
  std::vector<BoundaryEdge> edges = {{{0, 1}, BoundaryTag::B}, {{1, 2}, BoundaryTag::D}, {{2, 0}, BoundaryTag::UW}};
  EXPECT_NO_THROW(Mesh(nodes, {{0, 1, 2}}, edges));
  EXPECT_THROW(Mesh(nodes, {{0, 2, 1}}, edges), MeshError);
}

TEST(MeshValidation, RejectsUntaggedBoundary) {
  std::vector<Point2> nodes = {{0, 0}, {1, 0}, {0, 1}};
  std::vector<BoundaryEdge> edges = {{{0, 1}, BoundaryTag::B}, {{1, 2}, BoundaryTag::D}};
  EXPECT_THROW(Mesh(nodes, {{0, 1, 2}}, edges), MeshError);
  edges.push_back({{2, 0}, BoundaryTag::UW});
  edges.push_back({{0, 2}, BoundaryTag::UD});
  EXPECT_THROW(Mesh(nodes, {{0, 1, 2}}, edges), MeshError);
}

TEST(MeshValidation, RejectsOutOfRangeNode) {
  std::vector<Point2> nodes = {{0, 0}, {1, 0}, {0, 1}};
  EXPECT_THROW(Mesh(nodes, {{0, 1, 3}}, {}), MeshError);
}

TEST(Tags, NamesRoundTrip) {
  for (BoundaryTag t : kAllTags) EXPECT_EQ(parse_tag(tag_name(t)), t);
  EXPECT_FALSE(parse_tag("X").has_value());
}

TEST(DofMap, TaylorHoodCounts) {
  const Mesh m = generate_dam_mesh(DamGeometry{}, 4);
  const DofMap d(m);
  // Euler: E = V + F - 1 for a simply connected triangulation.
  const int edges = static_cast<int>(m.num_nodes() + m.num_triangles()) - 1;
  EXPECT_EQ(d.num_edges(), edges);
  EXPECT_EQ(d.num_u(), 2 * (static_cast<Index>(m.num_nodes()) + edges));
  EXPECT_EQ(d.num_p(), static_cast<Index>(m.num_nodes()));
  EXPECT_EQ(d.p_global(0), d.num_u());
}

TEST(DofMap, MidpointsSitBetweenVertices) {
  const Mesh m = generate_dam_mesh(DamGeometry{}, 3);
  const DofMap d(m);
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    const auto& n = d.element_nodes(t);
    const std::array<std::array<int, 2>, 3> pairs = {{{0, 1}, {1, 2}, {2, 0}}};
    for (int k = 0; k < 3; ++k) {
      const Point2 mid = 0.5 * (d.node_position(n[pairs[k][0]]) + d.node_position(n[pairs[k][1]]));
      const Point2 got = d.node_position(n[3 + k]);
      EXPECT_NEAR(got.x, mid.x, 1e-12);
      EXPECT_NEAR(got.y, mid.y, 1e-12);
      EXPECT_EQ(d.edge_node(n[pairs[k][0]], n[pairs[k][1]]), n[3 + k]);
    }
  }
  EXPECT_THROW(d.edge_node(0, static_cast<int>(m.num_nodes()) - 1), std::exception);
}

TEST(MshReader, ReadsFormat22) {
  const Mesh m = read_msh(fixture("dam_small_v22.msh"));
  EXPECT_EQ(m.num_nodes(), 6u);
  EXPECT_EQ(m.num_triangles(), 5u);
  EXPECT_EQ(m.boundary_edges().size(), 5u);
  EXPECT_NEAR(m.total_area(), DamGeometry{}.area(), 1e-12);
  EXPECT_NEAR(boundary_measure(m, BoundaryTag::T), 4.0, 1e-12);
}

TEST(MshReader, Format41MatchesFormat22) {
  const Mesh a = read_msh(fixture("dam_small_v22.msh"));
  const Mesh b = read_msh(fixture("dam_small_v41.msh"));
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
}

TEST(MshReader, WriteReadRoundTrip) {
  const Mesh m = generate_dam_mesh(DamGeometry{}, 5);
  std::stringstream buf;
  write_msh(m, buf);
  const Mesh back = parse_msh(buf);
  EXPECT_EQ(back.fingerprint(), m.fingerprint());
}

TEST(MshReader, ErrorsCarryLineNumbers) {
  try {
    read_msh(fixture("bad_unknown_group.msh"));
    FAIL() << "no error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 28);
  }
  try {
    read_msh(fixture("bad_missing_node.msh"));
    FAIL() << "no error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("node 9"), std::string::npos);
    EXPECT_EQ(e.line(), 30);
  }
  EXPECT_THROW(read_msh(fixture("bad_truncated.msh")), ParseError);
  EXPECT_THROW(read_msh(fixture("does_not_exist.msh")), IoError);
}

TEST(MshReader, RejectsMissingFormatHeader) {
  std::stringstream in("$Nodes\n1\n1 0 0 0\n$EndNodes\n");
  EXPECT_THROW(parse_msh(in), ParseError);
}

TEST(DamMesh, UnitSquareCounts) {
  const Mesh m = box_mesh(1.0, 1.0, 2, 2);
  EXPECT_EQ(m.num_triangles(), 8u);
  EXPECT_EQ(m.num_nodes(), 9u);
  DamGeometry square;
  square.height = 1.0;
  square.water_level = 0.5;
  square.crest_width = 1.0;
  square.upstream_slope = square.downstream_slope = 0.0;
  EXPECT_EQ(generate_dam_mesh(square, 2).num_triangles(), 8u);
  EXPECT_NEAR(boundary_measure(m, BoundaryTag::B), 1.0, 1e-15);
}

TEST(DamMesh, DefaultLevelMatchesReferenceDensity) {
  const Mesh m = generate_dam_mesh(DamGeometry{}, 19);
  EXPECT_GE(m.num_triangles(), 1382u);
}

TEST(MshReader, RejectsBinaryFormat) {
  std::stringstream in("$MeshFormat\n4.1 1 8\n$EndMeshFormat\n");
  try {
    parse_msh(in);
    FAIL() << "no error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported format"), std::string::npos);
  }
}
