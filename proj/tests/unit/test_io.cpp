#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "damrom/config.hpp"
#include "damrom/error.hpp"
#include "damrom/matrix_io.hpp"
#include "damrom/output.hpp"
#include "test_problems.hpp"

using namespace damrom;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("damrom_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string default_config_text() {
  std::ifstream in(fs::path(DAMROM_FIXTURES) / ".." / ".." / "configs" / "dam.toml");
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Trajectory small_trajectory() {
  Trajectory t;
  for (int i = 0; i < 4; ++i) {
    FieldState s;
    s.U = Eigen::VectorXd::LinSpaced(6, 0.0, 0.1 * i);
    s.P = Eigen::VectorXd::LinSpaced(3, -1.0, 2.0 * i);
    s.time = 8640.0 * i;
    t.states.push_back(s);
    t.times.push_back(s.time);
    t.iterations.push_back(i == 0 ? 0 : 2 + i);
    t.wall_seconds.push_back(0.01 * i);
  }
  t.reached_steady = true;
  return t;
}

}  // namespace

TEST(MatrixFile, RoundTripIsExact) {
  const fs::path dir = scratch_dir("matrix");
  Eigen::MatrixXd M(3, 4);
  M << 1, -2, 3.5, 1e-300, 0, 7, -8, 9, 1e300, 0.1, 0.2, std::nextafter(1.0, 2.0);
  write_matrix(dir / "m.bin", M);
  EXPECT_EQ((read_matrix(dir / "m.bin") - M).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(fs::file_size(dir / "m.bin"), 8u + 16u + 8u * 12u);
  std::ofstream(dir / "junk.bin") << "not a matrix";
  EXPECT_THROW(read_matrix(dir / "junk.bin"), IoError);
  EXPECT_THROW(read_matrix(dir / "missing.bin"), IoError);
  fs::resize_file(dir / "m.bin", 40);
  EXPECT_THROW(read_matrix(dir / "m.bin"), IoError);
  fs::remove_all(dir);
}

TEST(BasisArchive, RoundTripAndIdentityCheck) {
  const fs::path dir = scratch_dir("basis");
  ReducedBasis b;
  b.u.vectors = Eigen::MatrixXd::Identity(6, 2);
  b.p.vectors = Eigen::MatrixXd::Identity(3, 1);
  b.u.retained = Eigen::Vector2d(3.0, 1.0);
  b.u.spectrum = Eigen::Vector3d(3.0, 1.0, 1e-9);
  b.p.retained = Eigen::VectorXd::Constant(1, 2.0);
  b.p.spectrum = Eigen::Vector2d(2.0, 1e-8);
  b.u.threshold = b.p.threshold = 1e-4;
  b.lift_u = Eigen::VectorXd::Zero(6);
  b.lift_p = Eigen::Vector3d(70e3, 0.0, 0.0);
  const DiscretisationId id{0x1234, 0xabcd};
  save_basis(dir / "basis", b, id);
  const ReducedBasis back = load_basis(dir / "basis", id);
  EXPECT_EQ(back.u.vectors, b.u.vectors);
  EXPECT_EQ(back.p.vectors, b.p.vectors);
  EXPECT_EQ(back.lift_p, b.lift_p);
  EXPECT_EQ(back.u.spectrum, b.u.spectrum);
  EXPECT_EQ(back.p.retained, b.p.retained);
  EXPECT_EQ(back.u.threshold, 1e-4);
  EXPECT_THROW(load_basis(dir / "basis", DiscretisationId{0x1235, 0xabcd}), ConfigError);
  try {
    load_basis(dir / "nowhere", id);
    FAIL() << "no error";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("basis not found"), std::string::npos);
  }
  fs::remove_all(dir);
}

TEST(SnapshotArchive, RoundTrip) {
  const fs::path dir = scratch_dir("snap");
  SnapshotSet s;
  s.append(small_trajectory(), 1e-9, 0);
  s.append(small_trajectory(), 3e-9, 1);
  const DiscretisationId id{7, 8};
  save_snapshots(dir, s, id);
  const SnapshotSet back = load_snapshots(dir, id);
  EXPECT_EQ(back.U, s.U);
  EXPECT_EQ(back.P, s.P);
  ASSERT_EQ(back.columns.size(), s.columns.size());
  for (std::size_t j = 0; j < s.columns.size(); ++j) {
    EXPECT_EQ(back.columns[j].k_s, s.columns[j].k_s);
    EXPECT_EQ(back.columns[j].time, s.columns[j].time);
    EXPECT_EQ(back.columns[j].run, s.columns[j].run);
  }
  EXPECT_THROW(load_snapshots(dir, DiscretisationId{7, 9}), ConfigError);
  fs::remove_all(dir);
}

TEST(TrajectoryArchive, RoundTrip) {
  const fs::path dir = scratch_dir("traj");
  const Trajectory t = small_trajectory();
  save_trajectory(dir, t);
  const Trajectory back = load_trajectory(dir);
  ASSERT_EQ(back.steps(), t.steps());
  for (std::size_t i = 0; i < t.states.size(); ++i) {
    EXPECT_EQ(back.states[i].U, t.states[i].U);
    EXPECT_EQ(back.states[i].P, t.states[i].P);
    EXPECT_EQ(back.times[i], t.times[i]);
    EXPECT_EQ(back.iterations[i], t.iterations[i]);
  }
  EXPECT_TRUE(back.reached_steady);
  EXPECT_THROW(load_trajectory(dir / "absent"), IoError);
  fs::remove_all(dir);
}

TEST(Config, DefaultFileHoldsTableValues) {
  const RunConfig c = parse_config(default_config_text());
  EXPECT_EQ(c, RunConfig{});
  EXPECT_EQ(c.scenario.material.elastic.E, 40e6);
  EXPECT_EQ(c.scenario.material.fluid.K_w, 2.2e9);
  EXPECT_EQ(c.scenario.tailings.gamma_t, 21e3);
  EXPECT_NEAR(c.scenario.schedule.ramp_duration, 10 * 86400.0, 1e-9);
  EXPECT_NEAR(c.scheme.dt, 8640.0, 1e-9);
  EXPECT_EQ(c.scheme.theta, 0.75);
  EXPECT_EQ(c.rom.sweep.size(), 9u);
  EXPECT_EQ(c.rom.threshold_ratio, 1e-4);
}

TEST(Config, SerializeParseIsIdentity) {
  RunConfig c = parse_config(default_config_text());
  c.scenario.material.vg.k_s = 3e-9;
  c.scheme.theta = 2.0 / 3.0;
  c.rom.sweep = {1e-9, 2.5e-9};
  c.output.formats = {"json"};
  c.mesh_file = "a/b.msh";
  const std::string text = serialize_config(c);
  const RunConfig back = parse_config(text);
  EXPECT_EQ(back, c);
  EXPECT_EQ(serialize_config(back), text);
  EXPECT_EQ(config_fingerprint(back), config_fingerprint(c));
  RunConfig other = c;
  other.scheme.dt *= 2.0;
  EXPECT_NE(config_fingerprint(other), config_fingerprint(c));
  EXPECT_NE(scenario_fingerprint(c, 1e-8), scenario_fingerprint(c, 2e-8));
  EXPECT_EQ(scenario_fingerprint(c, 1e-8), scenario_fingerprint(back, 1e-8));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  const std::string base = default_config_text();
  EXPECT_THROW(parse_config(base + "\n[extra]\nx = 1\n"), ConfigError);
  auto replaced = [&](const std::string& from, const std::string& to) {
    std::string s = base;
    const auto at = s.find(from);
    EXPECT_NE(at, std::string::npos) << from;
    return s.replace(at, from.size(), to);
  };
  EXPECT_THROW(parse_config(replaced("nu = 0.3", "nu = 0.5")), ConfigError);
  EXPECT_THROW(parse_config(replaced("water_level_m = 7.0", "water_level_m = 12.0")), ConfigError);
  EXPECT_THROW(parse_config(replaced("theta = 0.75", "theta = 1.5")), ConfigError);
  EXPECT_THROW(parse_config(replaced("vg_m = 0.184", "vg_m = 'x'")), ConfigError);
  EXPECT_THROW(parse_config(replaced("picard_max_iters = 50", "picard_max_iters = 0")), ConfigError);
  EXPECT_THROW(parse_config(replaced("E_MPa = 40.0", "E_MPa = 40.0\nE_GPa = 1.0")), ConfigError);
  EXPECT_THROW(parse_config("[geometry\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/dam.toml"), IoError);
}

TEST(Config, RelativeMeshFileFollowsTheConfig) {
  const RunConfig c = load_config(damrom::testing::fixture("small_mesh.toml"));
  EXPECT_EQ(fs::path(c.mesh_file), fs::path(damrom::testing::fixture("dam_small_v41.msh")).lexically_normal());
}

TEST(Vtk, FieldFileStructure) {
  const fs::path dir = scratch_dir("vtk");
  const Mesh m = generate_dam_mesh(DamGeometry{}, 3);
  const DofMap d(m);
  FieldState s;
  s.U = Eigen::VectorXd::Zero(d.num_u());
  s.P = Eigen::VectorXd::Constant(d.num_p(), 5e3);
  write_fields(dir / "f.vtk", m, s);
  const std::string text = slurp(dir / "f.vtk");
  EXPECT_EQ(text.rfind("# vtk DataFile Version", 0), 0u);
  EXPECT_NE(text.find("DATASET UNSTRUCTURED_GRID"), std::string::npos);
  EXPECT_NE(text.find("POINTS " + std::to_string(m.num_nodes()) + " "), std::string::npos);
  EXPECT_NE(text.find("CELL_TYPES " + std::to_string(m.num_triangles())), std::string::npos);
  EXPECT_NE(text.find("POINT_DATA " + std::to_string(m.num_nodes())), std::string::npos);
  EXPECT_NE(text.find("VECTORS displacement"), std::string::npos);
  EXPECT_NE(text.find("SCALARS pressure"), std::string::npos);
  std::istringstream in(text.substr(text.find("CELL_TYPES")));
  std::string word;
  std::size_t n = 0;
  in >> word >> n;
  for (std::size_t i = 0; i < n; ++i) {
    int type = 0;
    in >> type;
    EXPECT_EQ(type, 5);
  }
  fs::remove_all(dir);
}

TEST(Vtk, PhreaticLine) {
  const Mesh m = generate_dam_mesh(DamGeometry{}, 6);
  EXPECT_TRUE(phreatic_lines(m, Eigen::VectorXd::Constant(static_cast<Index>(m.num_nodes()), 1.0)).empty());
  Eigen::VectorXd P(static_cast<Index>(m.num_nodes()));
  for (Index v = 0; v < P.size(); ++v) {
    const Point2 x = m.node(static_cast<int>(v));
    P[v] = 10e3 * (7.0 - 0.1 * x.x - x.y);
  }
  const auto lines = phreatic_lines(m, P);
  ASSERT_EQ(lines.size(), 1u);
  for (std::size_t i = 1; i < lines[0].size(); ++i) {
    EXPECT_GT(lines[0][i].x, lines[0][i - 1].x);
    EXPECT_LT(lines[0][i].y, lines[0][i - 1].y);
  }
  for (const Point2& x : lines[0]) EXPECT_NEAR(x.y, 7.0 - 0.1 * x.x, 1e-9);

  const fs::path dir = scratch_dir("phreatic");
  write_phreatic_line(dir / "p.vtk", m, FieldState{Eigen::VectorXd(), P, 0.0});
  const std::string text = slurp(dir / "p.vtk");
  EXPECT_NE(text.find("DATASET POLYDATA"), std::string::npos);
  EXPECT_NE(text.find("LINES 1 "), std::string::npos);
  fs::remove_all(dir);
}

TEST(Report, CsvRowsAndDeterministicJson) {
  const fs::path dir = scratch_dir("report");
  RunReport r;
  r.k_s = 2e-8;
  for (int i = 1; i <= 5; ++i) {
    r.errors.times.push_back(8640.0 * i);
    r.errors.e_p.push_back(1e-3 * i);
    r.errors.e_u.push_back(2e-3 * i);
  }
  r.errors.max_e_p = 5e-3;
  r.errors.max_e_u = 1e-2;
  r.fom_seconds = 3.0;
  r.rom_seconds = 1.0;
  r.steps = 5;
  r.basis_u = 9;
  r.basis_p = 25;
  emit_report(r, dir / "a");
  emit_report(r, dir / "b");
  EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "b.json"));
  const std::string csv = slurp(dir / "a.csv");
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,e_p,e_u");
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  EXPECT_EQ(rows, 5);
  EXPECT_NE(csv.find("0.100000,"), std::string::npos);
  EXPECT_NE(slurp(dir / "a.json").find("\"speedup\""), std::string::npos);
  EXPECT_DOUBLE_EQ(r.speedup(), 3.0);
  fs::remove_all(dir);
}
