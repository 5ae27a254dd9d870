#include "damrom/msh_io.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "damrom/error.hpp"

namespace damrom {

namespace {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  bool next(std::string& out) {
    if (!std::getline(in_, out)) return false;
    ++line_;
    if (!out.empty() && out.back() == '\r') out.pop_back();
    return true;
  }

  std::string expect() {
    std::string s;
    if (!next(s)) throw ParseError("unexpected end of file", line_);
    return s;
  }

  std::istringstream expect_stream() { return std::istringstream(expect()); }

  int line() const { return line_; }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, line_); }

 private:
  std::istream& in_;
  int line_ = 0;
};

template <typename T>
T read_value(std::istringstream& ss, const LineReader& r, const char* what) {
  T v{};
  if (!(ss >> v)) r.fail(std::string("expected ") + what);
  return v;
}

void skip_section(LineReader& r, const std::string& name) {
  const std::string end = "$End" + name;
  std::string s;
  while (r.next(s)) {
    if (s == end) return;
  }
  r.fail("unterminated section $" + name);
}

void expect_end(LineReader& r, const std::string& name) {
  if (r.expect() != "$End" + name) r.fail("expected $End" + name);
}

// Number of nodes for Gmsh element types; 0 for unsupported types.
int nodes_per_element(int type) {
  switch (type) {
    case 15: return 1;
    case 1: return 2;
    case 2: return 3;
    default: return 0;
  }
}

struct RawLine {
  int a, b, physical, line;
};

struct RawMesh {
  double version = 0.0;
  std::map<std::pair<int, int>, std::string> physical_names;  // (dim, tag) -> name
  std::unordered_map<int, std::vector<int>> curve_physicals;  // v4 entity tag -> physical tags
  std::map<long, Point2> nodes;
  std::vector<std::array<long, 3>> triangles;
  std::vector<int> triangle_lines;
  std::vector<RawLine> lines;
};

void check_element_type(int type, const LineReader& r) {
  if (type == 1 || type == 2 || type == 15) return;
  if (type == 3 || type == 9 || type == 10 || type == 16 || type == 20 || type == 21)
    r.fail("non-triangle 2D cell (element type " + std::to_string(type) + ")");
  if (type == 8) r.fail("second-order boundary lines are not supported");
  r.fail("unsupported element type " + std::to_string(type));
}

void parse_format(LineReader& r, RawMesh& raw) {
  auto ss = r.expect_stream();
  std::string version;
  int file_type = -1;
  int data_size = 0;
  if (!(ss >> version >> file_type >> data_size)) r.fail("malformed $MeshFormat header");
  if (file_type != 0) r.fail("unsupported format: binary MSH files are not supported");
  if (version == "2.2") {
    raw.version = 2.2;
  } else if (version == "4.1") {
    raw.version = 4.1;
  } else {
    r.fail("unsupported MSH version " + version + " (expected 2.2 or 4.1)");
  }
  expect_end(r, "MeshFormat");
}

void parse_physical_names(LineReader& r, RawMesh& raw) {
  auto head = r.expect_stream();
  const int n = read_value<int>(head, r, "physical name count");
  for (int i = 0; i < n; ++i) {
    auto ss = r.expect_stream();
    const int dim = read_value<int>(ss, r, "physical dimension");
    const int tag = read_value<int>(ss, r, "physical tag");
    std::string rest;
    std::getline(ss, rest);
    const auto q0 = rest.find('"');
    const auto q1 = rest.rfind('"');
    if (q0 == std::string::npos || q1 == q0) r.fail("physical name must be quoted");
    raw.physical_names[{dim, tag}] = rest.substr(q0 + 1, q1 - q0 - 1);
  }
  expect_end(r, "PhysicalNames");
}

void parse_entities_v4(LineReader& r, RawMesh& raw) {
  auto head = r.expect_stream();
  std::array<int, 4> counts{};
  for (auto& c : counts) c = read_value<int>(head, r, "entity count");
  for (int i = 0; i < counts[0]; ++i) r.expect();  // points carry no boundary groups we need
  for (int i = 0; i < counts[1]; ++i) {
    auto ss = r.expect_stream();
    const int tag = read_value<int>(ss, r, "curve tag");
    for (int k = 0; k < 6; ++k) read_value<double>(ss, r, "curve bounding box");
    const int nphys = read_value<int>(ss, r, "physical tag count");
    auto& phys = raw.curve_physicals[tag];
    for (int k = 0; k < nphys; ++k) phys.push_back(read_value<int>(ss, r, "physical tag"));
  }
  for (int i = 0; i < counts[2] + counts[3]; ++i) r.expect();
  expect_end(r, "Entities");
}

void parse_nodes_v2(LineReader& r, RawMesh& raw) {
  auto head = r.expect_stream();
  const long n = read_value<long>(head, r, "node count");
  for (long i = 0; i < n; ++i) {
    auto ss = r.expect_stream();
    const long id = read_value<long>(ss, r, "node id");
    const double x = read_value<double>(ss, r, "x coordinate");
    const double y = read_value<double>(ss, r, "y coordinate");
    raw.nodes[id] = {x, y};
  }
  expect_end(r, "Nodes");
}

void parse_nodes_v4(LineReader& r, RawMesh& raw) {
  auto head = r.expect_stream();
  const long blocks = read_value<long>(head, r, "node block count");
  for (long b = 0; b < blocks; ++b) {
    auto bh = r.expect_stream();
    read_value<int>(bh, r, "entity dimension");
    read_value<int>(bh, r, "entity tag");
    const int parametric = read_value<int>(bh, r, "parametric flag");
    const long count = read_value<long>(bh, r, "block node count");
    if (parametric != 0) r.fail("parametric node blocks are not supported");
    std::vector<long> ids(static_cast<std::size_t>(count));
    for (auto& id : ids) {
      auto ss = r.expect_stream();
      id = read_value<long>(ss, r, "node tag");
    }
    for (long id : ids) {
      auto ss = r.expect_stream();
      const double x = read_value<double>(ss, r, "x coordinate");
      const double y = read_value<double>(ss, r, "y coordinate");
      raw.nodes[id] = {x, y};
    }
  }
  expect_end(r, "Nodes");
}

void add_element(RawMesh& raw, int type, const std::vector<long>& nodes, int physical, const LineReader& r) {
  if (type == 2) {
    raw.triangles.push_back({nodes[0], nodes[1], nodes[2]});
    raw.triangle_lines.push_back(r.line());
  } else if (type == 1) {
    raw.lines.push_back({static_cast<int>(nodes[0]), static_cast<int>(nodes[1]), physical, r.line()});
  }
}

void parse_elements_v2(LineReader& r, RawMesh& raw) {
  auto head = r.expect_stream();
  const long n = read_value<long>(head, r, "element count");
  for (long i = 0; i < n; ++i) {
    auto ss = r.expect_stream();
    read_value<long>(ss, r, "element id");
    const int type = read_value<int>(ss, r, "element type");
    check_element_type(type, r);
    const int ntags = read_value<int>(ss, r, "tag count");
    int physical = -1;
    for (int k = 0; k < ntags; ++k) {
      const int t = read_value<int>(ss, r, "element tag");
      if (k == 0) physical = t;
    }
    std::vector<long> nodes(static_cast<std::size_t>(nodes_per_element(type)));
    for (auto& v : nodes) v = read_value<long>(ss, r, "element node");
    add_element(raw, type, nodes, physical, r);
  }
  expect_end(r, "Elements");
}

void parse_elements_v4(LineReader& r, RawMesh& raw) {
  auto head = r.expect_stream();
  const long blocks = read_value<long>(head, r, "element block count");
  for (long b = 0; b < blocks; ++b) {
    auto bh = r.expect_stream();
    const int dim = read_value<int>(bh, r, "entity dimension");
    const int entity = read_value<int>(bh, r, "entity tag");
    const int type = read_value<int>(bh, r, "element type");
    const long count = read_value<long>(bh, r, "block element count");
    check_element_type(type, r);

    int physical = -1;
    if (dim == 1) {
      auto it = raw.curve_physicals.find(entity);
      if (it != raw.curve_physicals.end()) {
        for (int p : it->second) {
          auto name = raw.physical_names.find({1, p});
          if (name == raw.physical_names.end() || !parse_tag(name->second)) continue;
          if (physical != -1) r.fail("curve entity " + std::to_string(entity) + " belongs to two boundary groups");
          physical = p;
        }
      }
    }
    for (long i = 0; i < count; ++i) {
      auto ss = r.expect_stream();
      read_value<long>(ss, r, "element tag");
      std::vector<long> nodes(static_cast<std::size_t>(nodes_per_element(type)));
      for (auto& v : nodes) v = read_value<long>(ss, r, "element node");
      add_element(raw, type, nodes, physical, r);
    }
  }
  expect_end(r, "Elements");
}

}  // namespace

Mesh parse_msh(std::istream& in) {
  LineReader r(in);
  RawMesh raw;
  bool have_format = false;
  std::string s;
  while (r.next(s)) {
    if (s.empty()) continue;
    if (s[0] != '$') r.fail("expected a section header, got '" + s + "'");
    const std::string name = s.substr(1);
    if (name == "MeshFormat") {
      parse_format(r, raw);
      have_format = true;
      continue;
    }
    if (!have_format) r.fail("missing $MeshFormat header");
    if (name == "PhysicalNames") {
      parse_physical_names(r, raw);
    } else if (name == "Entities" && raw.version > 4.0) {
      parse_entities_v4(r, raw);
    } else if (name == "Nodes") {
      raw.version > 4.0 ? parse_nodes_v4(r, raw) : parse_nodes_v2(r, raw);
    } else if (name == "Elements") {
      raw.version > 4.0 ? parse_elements_v4(r, raw) : parse_elements_v2(r, raw);
    } else {
      skip_section(r, name);
    }
  }
  if (!have_format) throw ParseError("missing $MeshFormat header", r.line());
  if (raw.triangles.empty()) throw ParseError("mesh contains no triangles", r.line());

  bool any_group = false;
  for (const auto& [key, name] : raw.physical_names) {
    if (key.first == 1 && parse_tag(name)) any_group = true;
  }
  if (!any_group) throw ParseError("missing physical groups: boundary lines need groups named UD, UW, B, D or T", r.line());

  // Compact numbering over the nodes used by triangles.
  std::map<long, int> index;
  for (std::size_t e = 0; e < raw.triangles.size(); ++e) {
    for (long v : raw.triangles[e]) {
      if (!raw.nodes.count(v))
        throw ParseError("element references undefined node " + std::to_string(v), raw.triangle_lines[e]);
      index.emplace(v, 0);
    }
  }
  std::vector<Point2> nodes;
  nodes.reserve(index.size());
  for (auto& [id, slot] : index) {
    auto it = raw.nodes.find(id);
    slot = static_cast<int>(nodes.size());
    nodes.push_back(it->second);
  }

  std::vector<std::array<int, 3>> tris;
  tris.reserve(raw.triangles.size());
  for (const auto& t : raw.triangles) {
    std::array<int, 3> tri{index[t[0]], index[t[1]], index[t[2]]};
    const Point2 a = nodes[tri[0]], b = nodes[tri[1]], c = nodes[tri[2]];
    if ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y) < 0.0) std::swap(tri[1], tri[2]);
    tris.push_back(tri);
  }

  std::vector<BoundaryEdge> boundary;
  for (const auto& l : raw.lines) {
    auto name = raw.physical_names.find({1, l.physical});
    if (l.physical < 0 || name == raw.physical_names.end())
      throw ParseError("boundary line is not in a named physical group", l.line);
    const auto tag = parse_tag(name->second);
    if (!tag) throw ParseError("unknown boundary group '" + name->second + "'", l.line);
    auto ia = index.find(l.a), ib = index.find(l.b);
    if (ia == index.end() || ib == index.end())
      throw ParseError("boundary line references a node not used by any triangle", l.line);
    boundary.push_back({{ia->second, ib->second}, *tag});
  }
  return Mesh(std::move(nodes), std::move(tris), std::move(boundary));
}

Mesh read_msh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file " + path.string());
  return parse_msh(in);
}

void write_msh(const Mesh& mesh, std::ostream& out) {
  out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n";
  out << "$PhysicalNames\n" << kNumTags + 1 << "\n";
  for (BoundaryTag tag : kAllTags) out << "1 " << static_cast<int>(tag) + 1 << " \"" << tag_name(tag) << "\"\n";
  out << "2 " << kNumTags + 1 << " \"domain\"\n$EndPhysicalNames\n";

  out << "$Nodes\n" << mesh.num_nodes() << "\n" << std::setprecision(17);
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    const auto& p = mesh.nodes()[i];
    out << i + 1 << ' ' << p.x << ' ' << p.y << " 0\n";
  }
  out << "$EndNodes\n";

  out << "$Elements\n" << mesh.boundary_edges().size() + mesh.num_triangles() << "\n";
  std::size_t id = 1;
  for (const auto& e : mesh.boundary_edges()) {
    const int phys = static_cast<int>(e.tag) + 1;
    out << id++ << " 1 2 " << phys << ' ' << phys << ' ' << e.nodes[0] + 1 << ' ' << e.nodes[1] + 1 << "\n";
  }
  for (const auto& t : mesh.triangles()) {
    out << id++ << " 2 2 " << kNumTags + 1 << " 1 " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << "\n";
  }
  out << "$EndElements\n";
}

void write_msh(const Mesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write mesh file " + path.string());
  write_msh(mesh, out);
  if (!out) throw IoError("failed writing mesh file " + path.string());
}

}  // namespace damrom
