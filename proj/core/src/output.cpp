#include "damrom/output.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

namespace damrom {

namespace fs = std::filesystem;

namespace {
std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << std::setprecision(12);
  return out;
}

void close_checked(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw IoError("write failed: " + path.string());
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

using EdgeKey = std::pair<int, int>;
EdgeKey key(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }
}  // namespace

std::vector<std::vector<Point2>> phreatic_lines(const Mesh& mesh, const Eigen::VectorXd& P) {
  if (P.size() != static_cast<Index>(mesh.num_nodes())) throw ConfigError("pressure vector does not match the mesh");

  // Crossing point per cut edge; computed once per edge so neighbours share it.
  std::map<EdgeKey, Point2> cut;
  auto crossing = [&](int a, int b) -> const Point2& {
    const EdgeKey k = key(a, b);
    auto it = cut.find(k);
    if (it != cut.end()) return it->second;
    const double pa = P[k.first], pb = P[k.second];
    const double t = pa / (pa - pb);
    const Point2 xa = mesh.node(k.first), xb = mesh.node(k.second);
    return cut.emplace(k, xa + t * (xb - xa)).first->second;
  };

  std::map<EdgeKey, std::vector<EdgeKey>> links;
  for (const auto& tri : mesh.triangles()) {
    std::vector<EdgeKey> hits;
    for (int i = 0; i < 3; ++i) {
      const int a = tri[i], b = tri[(i + 1) % 3];
      if ((P[a] > 0.0) != (P[b] > 0.0)) {
        crossing(a, b);
        hits.push_back(key(a, b));
      }
    }
    if (hits.size() == 2) {
      links[hits[0]].push_back(hits[1]);
      links[hits[1]].push_back(hits[0]);
    }
  }

  std::vector<std::vector<Point2>> lines;
  std::map<EdgeKey, bool> seen;
  auto walk = [&](EdgeKey start) {
    std::vector<Point2> line;
    EdgeKey prev{-1, -1}, cur = start;
    while (true) {
      seen[cur] = true;
      line.push_back(cut.at(cur));
      EdgeKey next{-1, -1};
      for (const EdgeKey& n : links[cur])
        if (n != prev && !seen[n]) next = n;
      if (next.first < 0) {
        // Close a loop if the chain came back to its start.
        for (const EdgeKey& n : links[cur])
          if (n == start && line.size() > 2) line.push_back(cut.at(start));
        break;
      }
      prev = cur;
      cur = next;
    }
    lines.push_back(std::move(line));
  };
  for (const auto& [edge, nb] : links)
    if (nb.size() == 1 && !seen[edge]) walk(edge);
  for (const auto& [edge, nb] : links)
    if (!seen[edge]) walk(edge);

  // Orient each piece from upstream (small x) to downstream.
  for (auto& line : lines)
    if (line.size() > 1 && line.front().x > line.back().x) std::reverse(line.begin(), line.end());
  return lines;
}

void write_fields(const fs::path& path, const Mesh& mesh, const FieldState& state) {
  const auto nv = static_cast<Index>(mesh.num_nodes());
  if (state.P.size() != nv || state.U.size() < 2 * nv) throw ConfigError("state does not match the mesh");
  std::ofstream out = open_out(path);
  out.precision(12);
  out << "# vtk DataFile Version 3.0\n";
  out << "damrom fields t=" << state.time << " s\n";
  out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << nv << " double\n";
  for (const Point2& x : mesh.nodes()) out << x.x << ' ' << x.y << " 0\n";
  const auto nt = mesh.num_triangles();
  out << "CELLS " << nt << ' ' << 4 * nt << '\n';
  for (const auto& t : mesh.triangles()) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  out << "CELL_TYPES " << nt << '\n';
  for (std::size_t i = 0; i < nt; ++i) out << "5\n";
  out << "POINT_DATA " << nv << '\n';
  out << "VECTORS displacement double\n";
  for (Index v = 0; v < nv; ++v)
    out << state.U[DofMap::u_dof(v, 0)] << ' ' << state.U[DofMap::u_dof(v, 1)] << " 0\n";
  out << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
  for (Index v = 0; v < nv; ++v) out << state.P[v] << '\n';
  close_checked(out, path);
}

void write_phreatic_line(const fs::path& path, const Mesh& mesh, const FieldState& state) {
  const auto lines = phreatic_lines(mesh, state.P);
  std::size_t n_points = 0;
  for (const auto& l : lines) n_points += l.size();
  std::ofstream out = open_out(path);
  out.precision(12);
  out << "# vtk DataFile Version 3.0\n";
  out << "damrom phreatic line t=" << state.time << " s\n";
  out << "ASCII\nDATASET POLYDATA\n";
  out << "POINTS " << n_points << " double\n";
  for (const auto& l : lines)
    for (const Point2& x : l) out << x.x << ' ' << x.y << " 0\n";
  out << "LINES " << lines.size() << ' ' << n_points + lines.size() << '\n';
  std::size_t at = 0;
  for (const auto& l : lines) {
    out << l.size();
    for (std::size_t i = 0; i < l.size(); ++i) out << ' ' << at + i;
    out << '\n';
    at += l.size();
  }
  close_checked(out, path);
}

void emit_report(const RunReport& r, const fs::path& stem) {
  using nlohmann::json;
  const ErrorReport& e = r.errors;
  if (e.times.size() != e.e_p.size() || e.times.size() != e.e_u.size())
    throw ConfigError("error series have different lengths");
  json j{{"k_s", r.k_s},
         {"steps", r.steps},
         {"fom_reached_steady", r.fom_steady},
         {"dofs", {{"u", r.dofs_u}, {"p", r.dofs_p}, {"total", r.dofs_u + r.dofs_p}}},
         {"basis", {{"u", r.basis_u}, {"p", r.basis_p}}},
         {"errors",
          {{"max_e_u", e.max_e_u},
           {"max_e_p", e.max_e_p},
           {"initial_e_u", e.initial_e_u},
           {"initial_e_p", e.initial_e_p},
           {"t_days", json::array()},
           {"e_u", e.e_u},
           {"e_p", e.e_p}}},
         {"timing",
          {{"fom_seconds", r.fom_seconds},
           {"rom_seconds", r.rom_seconds},
           {"offline_seconds", r.offline_seconds},
           {"speedup", r.speedup()}}},
         {"config_fingerprint", hex64(r.config_fingerprint)},
         {"scenario_fingerprint", hex64(r.scenario_fingerprint)}};
  for (double t : e.times) j["errors"]["t_days"].push_back(t / kSecondsPerDay);

  fs::path json_path = stem;
  json_path += ".json";
  std::ofstream js = open_out(json_path);
  js << j.dump(2) << '\n';
  close_checked(js, json_path);

  fs::path csv_path = stem;
  csv_path += ".csv";
  std::ofstream csv = open_out(csv_path);
  csv << "t,e_p,e_u\n";
  char buf[96];
  for (std::size_t i = 0; i < e.times.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6f,%.9e,%.9e\n", e.times[i] / kSecondsPerDay, e.e_p[i], e.e_u[i]);
    csv << buf;
  }
  close_checked(csv, csv_path);
}

}  // namespace damrom
