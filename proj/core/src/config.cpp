#include "damrom/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#define TOML_FLOAT_CHARCONV 1
#define TOML_ENABLE_FORMATTERS 1
#include <toml.hpp>

namespace damrom {

namespace {
constexpr double kMPa = 1e6;
constexpr double kKN = 1e3;
constexpr double kDegree = 3.14159265358979323846 / 180.0;

// Reads keys of one table and remembers which were used, so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

  void number(const char* key, double& out, double factor = 1.0) {
    const toml::node* n = find(key);
    if (!n) return;
    if (auto v = n->value<double>()) {
      out = *v * factor;
      return;
    }
    fail(key, "expected a number");
  }
  void integer(const char* key, int& out) {
    const toml::node* n = find(key);
    if (!n) return;
    if (auto v = n->as_integer()) {
      const std::int64_t x = v->get();
      if (x < INT32_MIN || x > INT32_MAX) fail(key, "integer out of range");
      out = static_cast<int>(x);
      return;
    }
    fail(key, "expected an integer");
  }
  void boolean(const char* key, bool& out) {
    const toml::node* n = find(key);
    if (!n) return;
    if (auto v = n->value<bool>()) {
      out = *v;
      return;
    }
    fail(key, "expected true or false");
  }
  void string(const char* key, std::string& out) {
    const toml::node* n = find(key);
    if (!n) return;
    if (auto v = n->value<std::string>()) {
      out = *v;
      return;
    }
    fail(key, "expected a string");
  }
  void numbers(const char* key, std::vector<double>& out) {
    const toml::node* n = find(key);
    if (!n) return;
    const toml::array* arr = n->as_array();
    if (!arr) fail(key, "expected an array of numbers");
    std::vector<double> v;
    for (const toml::node& e : *arr) {
      auto x = e.value<double>();
      if (!x) fail(key, "expected an array of numbers");
      v.push_back(*x);
    }
    out = std::move(v);
  }
  void strings(const char* key, std::vector<std::string>& out) {
    const toml::node* n = find(key);
    if (!n) return;
    const toml::array* arr = n->as_array();
    if (!arr) fail(key, "expected an array of strings");
    std::vector<std::string> v;
    for (const toml::node& e : *arr) {
      auto x = e.value<std::string>();
      if (!x) fail(key, "expected an array of strings");
      v.push_back(*x);
    }
    out = std::move(v);
  }
  void finish() const {
    if (!table_) return;
    for (const auto& [key, node] : *table_) {
      if (!used_.count(std::string(key.str())))
        throw ConfigError("unknown key '" + std::string(key.str()) + "' in [" + name_ + "]");
    }
  }

 private:
  const toml::node* find(const char* key) {
    if (!table_) return nullptr;
    used_.insert(key);
    return table_->get(key);
  }
  [[noreturn]] void fail(const char* key, const char* what) const {
    throw ConfigError("[" + name_ + "] " + key + ": " + what);
  }

  const toml::table* table_;
  std::string name_;
  std::set<std::string> used_;
};

// Shortest decimal whose product with factor reproduces si exactly, so that
// serialize followed by parse returns the same SI value.
double to_engineering(double si, double factor) {
  if (factor == 1.0) return si;
  const double guess = si / factor;
  char buf[40];
  for (int digits = 1; digits <= 17; ++digits) {
    std::snprintf(buf, sizeof buf, "%.*g", digits, guess);
    const double d = std::strtod(buf, nullptr);
    if (d * factor == si) return d;
  }
  return guess;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

toml::array to_array(const std::vector<double>& v) {
  toml::array a;
  for (double x : v) a.push_back(x);
  return a;
}

toml::array to_array(const std::vector<std::string>& v) {
  toml::array a;
  for (const auto& x : v) a.push_back(x);
  return a;
}

toml::table scenario_table(const RunConfig& c) {
  const DamScenario& s = c.scenario;
  const MaterialParams& m = s.material;
  const double d = kSecondsPerDay;
  toml::table geometry{{"height_m", s.geometry.height},
                       {"water_level_m", s.geometry.water_level},
                       {"crest_width_m", s.geometry.crest_width},
                       {"upstream_slope", s.geometry.upstream_slope},
                       {"downstream_slope", s.geometry.downstream_slope},
                       {"mesh_levels", c.mesh_levels},
                       {"mesh_file", c.mesh_file}};
  toml::table material{{"E_MPa", to_engineering(m.elastic.E, kMPa)},
                       {"nu", m.elastic.nu},
                       {"porosity", m.fluid.porosity},
                       {"rho_s_kg_m3", m.fluid.rho_s},
                       {"rho_w_kg_m3", m.fluid.rho_w},
                       {"gamma_w_kN_m3", to_engineering(m.fluid.gamma_w, kKN)},
                       {"K_w_MPa", to_engineering(m.fluid.K_w, kMPa)},
                       {"g_m_s2", m.fluid.g},
                       {"vg_alpha_1_m", m.vg.alpha},
                       {"vg_m", m.vg.m},
                       {"theta_s", m.vg.theta_s},
                       {"theta_r", m.vg.theta_r},
                       {"k_s_m_s", m.vg.k_s},
                       {"k_min_ratio", m.k_min_ratio}};
  toml::table loads{{"gamma_t_kN_m3", to_engineering(s.tailings.gamma_t, kKN)},
                    {"gamma_f_kN_m3", to_engineering(s.tailings.gamma_f, kKN)},
                    {"phi_deg", to_engineering(s.tailings.phi, kDegree)},
                    {"raise_height_m", s.schedule.raise_height},
                    {"ramp_days", to_engineering(s.schedule.ramp_duration, d)},
                    {"hold_until_steady", s.schedule.hold_until_steady},
                    {"t_max_days", to_engineering(s.schedule.t_max, d)},
                    {"seepage_multiplier", s.seepage_multiplier}};
  return toml::table{{"geometry", geometry}, {"material", material}, {"loads", loads}};
}
}  // namespace

void RomOptions::validate() const {
  if (!(threshold_ratio > 0.0 && threshold_ratio < 1.0)) throw ConfigError("rom.threshold_ratio must lie in (0, 1)");
  if (sweep.empty()) throw ConfigError("rom.sweep_k_s must not be empty");
  for (double k : sweep)
    if (!(k > 0.0) || !std::isfinite(k)) throw ConfigError("rom.sweep_k_s entries must be positive");
}

bool OutputOptions::wants(std::string_view format) const {
  for (const auto& f : formats)
    if (f == format) return true;
  return false;
}

void OutputOptions::validate() const {
  if (directory.empty()) throw ConfigError("output.directory must not be empty");
  for (const auto& f : formats)
    if (f != "vtk" && f != "json" && f != "csv") throw ConfigError("output.formats: unknown format '" + f + "'");
  if (field_every < 1) throw ConfigError("output.field_every must be at least 1");
}

void RunConfig::validate() const {
  scenario.validate();
  if (mesh_file.empty() && mesh_levels < 2) throw ConfigError("geometry.mesh_levels must be at least 2");
  scheme.validate();
  picard.validate();
  if (!(steady.dt0 > 0.0) || !(steady.growth >= 1.0) || !(steady.dt_max >= steady.dt0) || steady.max_steps < 1)
    throw ConfigError("invalid initial steady-state march settings");
  if (!(steady.tol_kpa > 0.0)) throw ConfigError("numerics.steady_tol_kPa must be positive");
  rom.validate();
  output.validate();
}

StopRule RunConfig::stop_rule() const {
  StopRule r;
  r.plateau_time = scenario.schedule.ramp_duration;
  r.tol_kpa = steady.tol_kpa;
  r.t_max = scenario.schedule.t_max;
  return r;
}

RunConfig parse_config(std::string_view text, std::string_view origin) {
  toml::table root;
  try {
    root = toml::parse(text, origin);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << origin << ":" << e.source().begin.line << ": " << e.description();
    throw ConfigError(msg.str());
  }
  static const std::set<std::string> sections = {"geometry", "material", "loads", "numerics", "rom", "output"};
  for (const auto& [key, node] : root) {
    if (!sections.count(std::string(key.str()))) throw ConfigError("unknown section [" + std::string(key.str()) + "]");
    if (!node.is_table()) throw ConfigError("'" + std::string(key.str()) + "' must be a table");
  }

  RunConfig c;
  DamScenario& s = c.scenario;
  MaterialParams& m = s.material;
  const double d = kSecondsPerDay;

  Section geo(root["geometry"].as_table(), "geometry");
  geo.number("height_m", s.geometry.height);
  geo.number("water_level_m", s.geometry.water_level);
  geo.number("crest_width_m", s.geometry.crest_width);
  geo.number("upstream_slope", s.geometry.upstream_slope);
  geo.number("downstream_slope", s.geometry.downstream_slope);
  geo.integer("mesh_levels", c.mesh_levels);
  geo.string("mesh_file", c.mesh_file);
  geo.finish();

  Section mat(root["material"].as_table(), "material");
  double E = m.elastic.E, nu = m.elastic.nu;
  mat.number("E_MPa", E, kMPa);
  mat.number("nu", nu);
  mat.number("porosity", m.fluid.porosity);
  mat.number("rho_s_kg_m3", m.fluid.rho_s);
  mat.number("rho_w_kg_m3", m.fluid.rho_w);
  mat.number("gamma_w_kN_m3", m.fluid.gamma_w, kKN);
  mat.number("K_w_MPa", m.fluid.K_w, kMPa);
  mat.number("g_m_s2", m.fluid.g);
  mat.number("vg_alpha_1_m", m.vg.alpha);
  mat.number("vg_m", m.vg.m);
  mat.number("theta_s", m.vg.theta_s);
  mat.number("theta_r", m.vg.theta_r);
  mat.number("k_s_m_s", m.vg.k_s);
  mat.number("k_min_ratio", m.k_min_ratio);
  mat.finish();
  m.elastic = ElasticParams::from_engineering(E, nu);

  Section loads(root["loads"].as_table(), "loads");
  loads.number("gamma_t_kN_m3", s.tailings.gamma_t, kKN);
  loads.number("gamma_f_kN_m3", s.tailings.gamma_f, kKN);
  loads.number("phi_deg", s.tailings.phi, kDegree);
  loads.number("raise_height_m", s.schedule.raise_height);
  loads.number("ramp_days", s.schedule.ramp_duration, d);
  loads.boolean("hold_until_steady", s.schedule.hold_until_steady);
  loads.number("t_max_days", s.schedule.t_max, d);
  loads.number("seepage_multiplier", s.seepage_multiplier);
  loads.finish();

  Section num(root["numerics"].as_table(), "numerics");
  num.number("theta", c.scheme.theta);
  num.number("dt_days", c.scheme.dt, d);
  num.number("picard_tol", c.picard.tol_rel);
  num.integer("picard_max_iters", c.picard.max_iters);
  num.number("picard_relaxation", c.picard.relaxation);
  num.number("picard_min_relaxation", c.picard.min_relaxation);
  num.number("picard_stall_ratio", c.picard.stall_ratio);
  num.number("picard_norm_floor", c.picard.norm_floor);
  num.integer("seepage_lock_after", c.picard.seepage_lock_after);
  num.integer("factor_reuse_sweeps", c.picard.factor_reuse_sweeps);
  num.number("steady_tol_kPa", c.steady.tol_kpa);
  num.number("initial_dt_days", c.steady.dt0, d);
  num.number("initial_growth", c.steady.growth);
  num.number("initial_dt_max_days", c.steady.dt_max, d);
  num.integer("initial_max_steps", c.steady.max_steps);
  num.finish();

  Section rom(root["rom"].as_table(), "rom");
  rom.number("threshold_ratio", c.rom.threshold_ratio);
  rom.numbers("sweep_k_s", c.rom.sweep);
  rom.finish();

  Section out(root["output"].as_table(), "output");
  out.string("directory", c.output.directory);
  out.strings("formats", c.output.formats);
  out.integer("field_every", c.output.field_every);
  out.finish();

  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  RunConfig c = parse_config(buf.str(), path.string());
  if (!c.mesh_file.empty() && std::filesystem::path(c.mesh_file).is_relative())
    c.mesh_file = (path.parent_path() / c.mesh_file).lexically_normal().string();
  return c;
}

std::string serialize_config(const RunConfig& c) {
  const double d = kSecondsPerDay;
  toml::table root = scenario_table(c);
  root.insert("numerics", toml::table{{"theta", c.scheme.theta},
                                      {"dt_days", to_engineering(c.scheme.dt, d)},
                                      {"picard_tol", c.picard.tol_rel},
                                      {"picard_max_iters", c.picard.max_iters},
                                      {"picard_relaxation", c.picard.relaxation},
                                      {"picard_min_relaxation", c.picard.min_relaxation},
                                      {"picard_stall_ratio", c.picard.stall_ratio},
                                      {"picard_norm_floor", c.picard.norm_floor},
                                      {"seepage_lock_after", c.picard.seepage_lock_after},
                                      {"factor_reuse_sweeps", c.picard.factor_reuse_sweeps},
                                      {"steady_tol_kPa", c.steady.tol_kpa},
                                      {"initial_dt_days", to_engineering(c.steady.dt0, d)},
                                      {"initial_growth", c.steady.growth},
                                      {"initial_dt_max_days", to_engineering(c.steady.dt_max, d)},
                                      {"initial_max_steps", c.steady.max_steps}});
  root.insert("rom", toml::table{{"threshold_ratio", c.rom.threshold_ratio}, {"sweep_k_s", to_array(c.rom.sweep)}});
  root.insert("output", toml::table{{"directory", c.output.directory},
                                    {"formats", to_array(c.output.formats)},
                                    {"field_every", c.output.field_every}});
  std::ostringstream out;
  out << toml::toml_formatter(root) << '\n';
  return out.str();
}

std::uint64_t config_fingerprint(const RunConfig& config) { return fnv1a(serialize_config(config)); }

std::uint64_t scenario_fingerprint(const RunConfig& config, double k_s) {
  std::ostringstream out;
  out << toml::toml_formatter(scenario_table(config)) << '\n';
  char buf[128];
  std::snprintf(buf, sizeof buf, "k_s=%.17g theta=%.17g dt=%.17g", k_s, config.scheme.theta, config.scheme.dt);
  return fnv1a(out.str() + buf);
}

}  // namespace damrom
