#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "damrom/scenario.hpp"
#include "damrom/solver.hpp"

namespace damrom {

struct RomOptions {
  double threshold_ratio = 1e-4;
  /// Saturated conductivities of the snapshot runs (m/s).
  std::vector<double> sweep = {1e-9, 3e-9, 5e-9, 7e-9, 1e-8, 3e-8, 5e-8, 7e-8, 1e-7};

  void validate() const;
  bool operator==(const RomOptions&) const = default;
};

struct OutputOptions {
  std::string directory = "out";
  /// Any of "vtk", "json", "csv".
  std::vector<std::string> formats = {"vtk", "json", "csv"};
  /// Field files are written every this many steps (and at the last step).
  int field_every = 10;

  bool wants(std::string_view format) const;
  void validate() const;
  bool operator==(const OutputOptions&) const = default;
};

/// Everything a run needs, in SI units.
struct RunConfig {
  DamScenario scenario;
  int mesh_levels = 19;
  /// Gmsh file to use instead of the generated mesh (empty: generate).
  std::string mesh_file;
  ThetaScheme scheme;
  PicardControl picard;
  /// Initial steady-state march; its tol_kpa is also the stop-rule tolerance.
  SteadyStateOptions steady;
  RomOptions rom;
  OutputOptions output;

  void validate() const;
  StopRule stop_rule() const;
  bool operator==(const RunConfig&) const = default;
};

/// Parses TOML in engineering units (MPa, kN/m^3, degrees, days, m/s).
/// Unknown sections or keys and out-of-range values raise ConfigError.
RunConfig parse_config(std::string_view text, std::string_view origin = "<config>");
/// A relative mesh_file is taken relative to the config file's directory.
RunConfig load_config(const std::filesystem::path& path);

/// Inverse of parse_config.
std::string serialize_config(const RunConfig& config);

/// FNV-1a over the serialized form.
std::uint64_t config_fingerprint(const RunConfig& config);
/// FNV-1a over the parts that define the physical problem at one k_s.
std::uint64_t scenario_fingerprint(const RunConfig& config, double k_s);

}  // namespace damrom
