#include "damrom/matrix_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

namespace damrom {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "matrix files assume a little-endian host");

namespace {
constexpr char kMagic[8] = {'D', 'R', 'M', 'A', 'T', '0', '0', '1'};

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

std::uint64_t parse_hex64(const std::string& s, const fs::path& where) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(s, &used, 16);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw IoError(where.string() + ": malformed hash '" + s + "'");
  return v;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

template <class T>
T field(const json& j, const char* key, const fs::path& where) {
  if (!j.contains(key)) throw IoError(where.string() + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw IoError(where.string() + ": bad value for '" + key + "': " + e.what());
  }
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

json id_json(const DiscretisationId& id) {
  return {{"mesh_hash", hex64(id.mesh_hash)}, {"dof_fingerprint", hex64(id.dof_fingerprint)}};
}

void check_id(const json& j, const DiscretisationId& expected, const fs::path& where, const char* what) {
  const std::uint64_t mesh = parse_hex64(field<std::string>(j, "mesh_hash", where), where);
  const std::uint64_t dofs = parse_hex64(field<std::string>(j, "dof_fingerprint", where), where);
  if (mesh != expected.mesh_hash || dofs != expected.dof_fingerprint) {
    throw ConfigError(std::string(what) + " in " + where.parent_path().string() +
                      " was built for a different mesh (hash " + hex64(mesh) + ", expected " +
                      hex64(expected.mesh_hash) + ")");
  }
}
}  // namespace

void write_matrix(const fs::path& path, const Eigen::MatrixXd& M) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const std::uint64_t dims[2] = {static_cast<std::uint64_t>(M.rows()), static_cast<std::uint64_t>(M.cols())};
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = M;
  out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

Eigen::MatrixXd read_matrix(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  std::uint64_t dims[2];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw IoError(path.string() + ": not a matrix file");
  in.read(reinterpret_cast<char*>(dims), sizeof dims);
  if (!in) throw IoError(path.string() + ": truncated header");
  const std::uint64_t limit = std::uint64_t{1} << 31;
  if (dims[0] >= limit || dims[1] >= limit) throw IoError(path.string() + ": implausible dimensions");

  const auto expected_bytes = static_cast<std::uintmax_t>(sizeof kMagic + sizeof dims + 8 * dims[0] * dims[1]);
  std::error_code ec;
  const auto actual = fs::file_size(path, ec);
  if (ec || actual != expected_bytes) throw IoError(path.string() + ": size does not match header dimensions");

  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(static_cast<Index>(dims[0]),
                                                                           static_cast<Index>(dims[1]));
  in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
  if (!in) throw IoError(path.string() + ": truncated data");
  return rm;
}

void save_basis(const fs::path& dir, const ReducedBasis& basis, const DiscretisationId& id) {
  ensure_dir(dir);
  write_matrix(dir / "basis_u.bin", basis.u.vectors);
  write_matrix(dir / "basis_p.bin", basis.p.vectors);
  write_matrix(dir / "lift_u.bin", basis.lift_u);
  write_matrix(dir / "lift_p.bin", basis.lift_p);
  json m = id_json(id);
  m["format"] = "damrom-basis";
  m["version"] = 1;
  m["threshold"] = basis.u.threshold;
  m["sizes"] = {{"u", basis.size_u()}, {"p", basis.size_p()}};
  m["singular_values"] = {{"u", to_std(basis.u.retained)}, {"p", to_std(basis.p.retained)}};
  m["spectrum"] = {{"u", to_std(basis.u.spectrum)}, {"p", to_std(basis.p.spectrum)}};
  write_json(dir / "manifest.json", m);
}

ReducedBasis load_basis(const fs::path& dir, const DiscretisationId& expected) {
  const fs::path manifest = dir / "manifest.json";
  if (!fs::exists(manifest)) throw IoError("basis not found: " + manifest.string() + " does not exist");
  const json m = read_json(manifest);
  if (field<std::string>(m, "format", manifest) != "damrom-basis") throw IoError(manifest.string() + ": not a basis");
  check_id(m, expected, manifest, "basis");

  ReducedBasis b;
  b.u.vectors = read_matrix(dir / "basis_u.bin");
  b.p.vectors = read_matrix(dir / "basis_p.bin");
  b.lift_u = read_matrix(dir / "lift_u.bin");
  b.lift_p = read_matrix(dir / "lift_p.bin");
  if (b.lift_u.size() != b.u.vectors.rows() || b.lift_p.size() != b.p.vectors.rows())
    throw IoError(dir.string() + ": lift and basis row counts differ");
  b.u.threshold = b.p.threshold = field<double>(m, "threshold", manifest);
  const json& sv = m.at("singular_values");
  const json& sp = m.at("spectrum");
  b.u.retained = to_vector(field<std::vector<double>>(sv, "u", manifest));
  b.p.retained = to_vector(field<std::vector<double>>(sv, "p", manifest));
  b.u.spectrum = to_vector(field<std::vector<double>>(sp, "u", manifest));
  b.p.spectrum = to_vector(field<std::vector<double>>(sp, "p", manifest));
  if (b.u.retained.size() != b.size_u() || b.p.retained.size() != b.size_p())
    throw IoError(manifest.string() + ": singular value count does not match basis width");
  return b;
}

void save_snapshots(const fs::path& dir, const SnapshotSet& snapshots, const DiscretisationId& id) {
  snapshots.validate();
  ensure_dir(dir);
  json index = id_json(id);
  index["format"] = "damrom-snapshots";
  index["version"] = 1;
  json runs = json::array();
  Index c = 0;
  while (c < snapshots.cols()) {
    const int run = snapshots.columns[static_cast<std::size_t>(c)].run;
    Index end = c;
    std::vector<double> times;
    while (end < snapshots.cols() && snapshots.columns[static_cast<std::size_t>(end)].run == run) {
      times.push_back(snapshots.columns[static_cast<std::size_t>(end)].time);
      ++end;
    }
    std::ostringstream stem;
    stem << "run_" << std::setw(3) << std::setfill('0') << run;
    write_matrix(dir / (stem.str() + "_u.bin"), snapshots.U.middleCols(c, end - c));
    write_matrix(dir / (stem.str() + "_p.bin"), snapshots.P.middleCols(c, end - c));
    runs.push_back({{"run", run},
                    {"k_s", snapshots.columns[static_cast<std::size_t>(c)].k_s},
                    {"u", stem.str() + "_u.bin"},
                    {"p", stem.str() + "_p.bin"},
                    {"times", times}});
    c = end;
  }
  index["runs"] = runs;
  write_json(dir / "index.json", index);
}

SnapshotSet load_snapshots(const fs::path& dir, const DiscretisationId& expected) {
  const fs::path path = dir / "index.json";
  if (!fs::exists(path)) throw IoError("snapshots not found: " + path.string() + " does not exist");
  const json index = read_json(path);
  if (field<std::string>(index, "format", path) != "damrom-snapshots") throw IoError(path.string() + ": not a snapshot index");
  check_id(index, expected, path, "snapshot set");

  SnapshotSet set;
  for (const json& r : field<json>(index, "runs", path)) {
    const int run = field<int>(r, "run", path);
    const double k_s = field<double>(r, "k_s", path);
    const auto times = field<std::vector<double>>(r, "times", path);
    const Eigen::MatrixXd U = read_matrix(dir / field<std::string>(r, "u", path));
    const Eigen::MatrixXd P = read_matrix(dir / field<std::string>(r, "p", path));
    if (U.cols() != static_cast<Index>(times.size()) || P.cols() != U.cols())
      throw IoError(path.string() + ": run " + std::to_string(run) + " column count disagrees with its time list");
    if (set.cols() > 0 && (U.rows() != set.U.rows() || P.rows() != set.P.rows()))
      throw IoError(path.string() + ": runs differ in dof count");
    const Index c0 = set.cols();
    set.U.conservativeResize(U.rows(), c0 + U.cols());
    set.P.conservativeResize(P.rows(), c0 + P.cols());
    set.U.middleCols(c0, U.cols()) = U;
    set.P.middleCols(c0, P.cols()) = P;
    for (double t : times) set.columns.push_back({k_s, t, run});
  }
  set.validate();
  return set;
}

void save_trajectory(const fs::path& dir, const Trajectory& traj) {
  ensure_dir(dir);
  if (traj.states.empty()) throw IoError("refusing to save an empty trajectory");
  const Index n = static_cast<Index>(traj.states.size());
  Eigen::MatrixXd U(traj.states.front().U.size(), n), P(traj.states.front().P.size(), n);
  for (Index j = 0; j < n; ++j) {
    U.col(j) = traj.states[static_cast<std::size_t>(j)].U;
    P.col(j) = traj.states[static_cast<std::size_t>(j)].P;
  }
  write_matrix(dir / "U.bin", U);
  write_matrix(dir / "P.bin", P);
  json meta{{"format", "damrom-trajectory"},
            {"version", 1},
            {"times", traj.times},
            {"iterations", traj.iterations},
            {"wall_seconds", traj.wall_seconds},
            {"reached_steady", traj.reached_steady}};
  meta["failure"] = traj.failure ? json(*traj.failure) : json(nullptr);
  write_json(dir / "trajectory.json", meta);
}

Trajectory load_trajectory(const fs::path& dir) {
  const fs::path path = dir / "trajectory.json";
  if (!fs::exists(path)) throw IoError("trajectory not found: " + path.string() + " does not exist");
  const json meta = read_json(path);
  if (field<std::string>(meta, "format", path) != "damrom-trajectory") throw IoError(path.string() + ": not a trajectory");
  Trajectory t;
  t.times = field<std::vector<double>>(meta, "times", path);
  t.iterations = field<std::vector<int>>(meta, "iterations", path);
  t.wall_seconds = field<std::vector<double>>(meta, "wall_seconds", path);
  t.reached_steady = field<bool>(meta, "reached_steady", path);
  if (meta.contains("failure") && !meta.at("failure").is_null()) t.failure = meta.at("failure").get<std::string>();
  const Eigen::MatrixXd U = read_matrix(dir / "U.bin");
  const Eigen::MatrixXd P = read_matrix(dir / "P.bin");
  const auto n = t.times.size();
  if (static_cast<std::size_t>(U.cols()) != n || static_cast<std::size_t>(P.cols()) != n ||
      t.iterations.size() != n || t.wall_seconds.size() != n)
    throw IoError(path.string() + ": time level counts disagree");
  for (std::size_t j = 0; j < n; ++j)
    t.states.push_back({U.col(static_cast<Index>(j)), P.col(static_cast<Index>(j)), t.times[j]});
  return t;
}

}  // namespace damrom
