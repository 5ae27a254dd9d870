// damrom: full-order runs, snapshot sweeps, basis construction and reduced
// runs of the tailings dam level raise.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>

#include "damrom/msh_io.hpp"
#include "damrom/pipeline.hpp"

namespace fs = std::filesystem;
using namespace damrom;

namespace {

enum ExitCode : int { kOk = 0, kConfig = 1, kNumerical = 2, kIo = 3 };

struct Options {
  std::string config = "configs/dam.toml";
  double k_s = 0.0;
  std::string out;
  std::string basis;
  std::string snapshots;
  std::string fom_dir;
  std::string rom_dir;
  std::string report;
};

std::string ks_label(double k_s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", k_s);
  return buf;
}

fs::path out_dir(const Options& o, const RunConfig& c) { return o.out.empty() ? fs::path(c.output.directory) : fs::path(o.out); }
fs::path basis_dir(const Options& o, const RunConfig& c) { return o.basis.empty() ? out_dir(o, c) / "basis" : fs::path(o.basis); }
fs::path snapshot_dir(const Options& o, const RunConfig& c) {
  return o.snapshots.empty() ? out_dir(o, c) / "snapshots" : fs::path(o.snapshots);
}

double k_s_or_default(const Options& o, const RunConfig& c) { return o.k_s > 0.0 ? o.k_s : c.scenario.material.vg.k_s; }

void print_run(const char* what, double k_s, const Trajectory& t) {
  std::printf("%s k_s=%s steps=%zu t_end=%.2f d wall=%.2f s steady=%s\n", what, ks_label(k_s).c_str(), t.steps(),
              t.times.back() / kSecondsPerDay, t.total_wall(), t.reached_steady ? "yes" : "no");
}

void write_report(const RunConfig& c, const RunReport& r, const fs::path& stem) {
  if (c.output.wants("json") || c.output.wants("csv")) emit_report(r, stem);
  std::printf("k_s=%s steps=%zu basis=%ld/%ld max_e_u=%.3e max_e_p=%.3e fom=%.2f s rom=%.2f s speedup=%.2f\n",
              ks_label(r.k_s).c_str(), r.steps, static_cast<long>(r.basis_u), static_cast<long>(r.basis_p),
              r.errors.max_e_u, r.errors.max_e_p, r.fom_seconds, r.rom_seconds, r.speedup());
}

int cmd_fom(const Options& o) {
  DamStudy study(load_config(o.config));
  const double k_s = k_s_or_default(o, study.config());
  FomResult res = study.run_fom(k_s);
  const fs::path dir = out_dir(o, study.config()) / ("fom_ks" + ks_label(k_s));
  save_trajectory(dir, res.trajectory);
  if (study.config().output.wants("vtk")) study.write_field_series(dir, res.trajectory);
  print_run("fom", k_s, res.trajectory);
  if (res.trajectory.failure) {
    std::cerr << "error: " << *res.trajectory.failure << '\n';
    return kNumerical;
  }
  return kOk;
}

int cmd_snapshots(const Options& o) {
  DamStudy study(load_config(o.config));
  const auto t0 = std::chrono::steady_clock::now();
  const SnapshotSet snaps = study.collect(snapshot_threads_from_env());
  save_snapshots(snapshot_dir(o, study.config()), snaps, study.id());
  std::printf("snapshots: %zu runs, %ld columns, %.1f s\n", study.config().rom.sweep.size(),
              static_cast<long>(snaps.cols()),
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return kOk;
}

int cmd_build_rom(const Options& o) {
  DamStudy study(load_config(o.config));
  const SnapshotSet snaps = load_snapshots(snapshot_dir(o, study.config()), study.id());
  const ReducedBasis basis = study.reduce(snaps);
  save_basis(basis_dir(o, study.config()), basis, study.id());
  std::printf("basis: %ld displacement, %ld pressure vectors (threshold %g)\n", static_cast<long>(basis.size_u()),
              static_cast<long>(basis.size_p()), study.config().rom.threshold_ratio);
  return kOk;
}

int cmd_rom(const Options& o) {
  DamStudy study(load_config(o.config));
  const double k_s = k_s_or_default(o, study.config());
  auto basis = std::make_shared<const ReducedBasis>(load_basis(basis_dir(o, study.config()), study.id()));
  RomResult res = study.run_rom(basis, k_s);
  const fs::path dir = out_dir(o, study.config()) / ("rom_ks" + ks_label(k_s));
  save_trajectory(dir, res.run.trajectory);
  if (study.config().output.wants("vtk")) study.write_field_series(dir, res.run.trajectory);
  print_run("rom", k_s, res.run.trajectory);
  if (res.run.trajectory.failure) {
    std::cerr << "error: " << *res.run.trajectory.failure << '\n';
    return kNumerical;
  }
  return kOk;
}

int cmd_compare(const Options& o) {
  const RunConfig config = load_config(o.config);
  const Trajectory fom = load_trajectory(o.fom_dir);
  const Trajectory rom = load_trajectory(o.rom_dir);
  RunReport r;
  r.k_s = k_s_or_default(o, config);
  r.errors = compare_fom_rom(fom, rom);
  r.fom_seconds = fom.total_wall();
  r.rom_seconds = rom.total_wall();
  r.dofs_u = fom.states.front().U.size();
  r.dofs_p = fom.states.front().P.size();
  r.steps = fom.steps();
  r.fom_steady = fom.reached_steady;
  r.config_fingerprint = config_fingerprint(config);
  r.scenario_fingerprint = scenario_fingerprint(config, r.k_s);
  const fs::path stem = o.report.empty() ? out_dir(o, config) / ("compare_ks" + ks_label(r.k_s)) : fs::path(o.report);
  write_report(config, r, stem);
  return kOk;
}

int cmd_bench(const Options& o) {
  DamStudy study(load_config(o.config));
  const double k_s = k_s_or_default(o, study.config());
  auto basis = std::make_shared<const ReducedBasis>(load_basis(basis_dir(o, study.config()), study.id()));
  const RunReport r = study.bench(basis, k_s);
  const fs::path stem =
      o.report.empty() ? out_dir(o, study.config()) / ("bench_ks" + ks_label(k_s)) : fs::path(o.report);
  write_report(study.config(), r, stem);
  return kOk;
}

int cmd_mesh_info(const Options& o) {
  const RunConfig config = load_config(o.config);
  const auto mesh = build_mesh(config);
  const DofMap dofs(*mesh);
  std::map<BoundaryTag, int> edges;
  for (const auto& e : mesh->boundary_edges()) ++edges[e.tag];
  std::printf("vertices    %zu\n", mesh->num_nodes());
  std::printf("triangles   %zu\n", mesh->num_triangles());
  std::printf("p2 nodes    %d\n", dofs.num_p2_nodes());
  std::printf("dofs u      %ld\n", static_cast<long>(dofs.num_u()));
  std::printf("dofs p      %ld\n", static_cast<long>(dofs.num_p()));
  std::printf("dofs total  %ld\n", static_cast<long>(dofs.total()));
  for (BoundaryTag tag : kAllTags)
    std::printf("edges %-5s %d\n", std::string(tag_name(tag)).c_str(), edges[tag]);
  std::printf("mesh hash   %016llx\n", static_cast<unsigned long long>(mesh->fingerprint()));
  return kOk;
}

template <class F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const MeshError& e) {
    std::cerr << "mesh error: " << e.what() << '\n';
    return kConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const ParseError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reduced-order model of a tailings dam level raise"};
  app.require_subcommand(1);
  Options o;

  auto with_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", o.config, "TOML run configuration")->check(CLI::ExistingFile);
    sub->add_option("-o,--out", o.out, "output directory (default: [output] directory)");
    return sub;
  };
  auto with_ks = [&](CLI::App* sub) {
    sub->add_option("--ks", o.k_s, "saturated conductivity in m/s (default: [material] k_s_m_s)")
        ->check(CLI::PositiveNumber);
    return sub;
  };

  std::map<std::string, int (*)(const Options&)> handlers = {
      {"fom", cmd_fom},         {"snapshots", cmd_snapshots}, {"build-rom", cmd_build_rom}, {"rom", cmd_rom},
      {"compare", cmd_compare}, {"bench", cmd_bench},         {"mesh-info", cmd_mesh_info}};

  with_ks(with_config(app.add_subcommand("fom", "run the full-order model at one k_s")));
  with_config(app.add_subcommand("snapshots", "run the k_s sweep and store the snapshots (DAMROM_THREADS workers)"))
      ->add_option("--snapshots", o.snapshots, "snapshot directory (default: <out>/snapshots)");
  auto* build = with_config(app.add_subcommand("build-rom", "build the reduced basis from stored snapshots"));
  build->add_option("--snapshots", o.snapshots, "snapshot directory (default: <out>/snapshots)");
  build->add_option("--basis", o.basis, "basis archive directory (default: <out>/basis)");
  with_ks(with_config(app.add_subcommand("rom", "run the reduced model at one k_s")))
      ->add_option("--basis", o.basis, "basis archive directory (default: <out>/basis)");
  auto* compare = with_ks(with_config(app.add_subcommand("compare", "error report of two stored trajectories")));
  compare->add_option("--fom", o.fom_dir, "full-order trajectory directory")->required();
  compare->add_option("--rom", o.rom_dir, "reduced trajectory directory")->required();
  compare->add_option("--report", o.report, "report path without extension");
  auto* bench = with_ks(with_config(app.add_subcommand("bench", "full-order and reduced runs at the same k_s")));
  bench->add_option("--basis", o.basis, "basis archive directory (default: <out>/basis)");
  bench->add_option("--report", o.report, "report path without extension");
  with_config(app.add_subcommand("mesh-info", "mesh and dof counts"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  const std::string name = app.get_subcommands().front()->get_name();
  return guarded([&] { return handlers.at(name)(o); });
}
