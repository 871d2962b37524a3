#pragma once

// Run configuration: flat "dotted.key = value" text (# comments) or JSON with
// nested objects flattened to dotted keys.

#include <cstddef>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "agdiff/domain.hpp"
#include "agdiff/dynamics.hpp"
#include "agdiff/error.hpp"
#include "agdiff/initial_data.hpp"
#include "agdiff/kernels.hpp"
#include "agdiff/nonlinearity.hpp"

namespace agdiff {

struct RunConfig {
  TorusDomain domain{1.0, 1.0};
  KernelSpec kernel;
  NonlinearitySpec phi;
  InitialSpec initial;
  std::size_t n_particles = 0;
  IntegratorConfig integrator;
  double min_time = 0.0;          // collapse before this time is a failed run
  std::string outputs_dir = "outputs";
  std::size_t grid_cells = 1024;  // resolution of written densities
  std::size_t oracle_cells = 4096;
  double oracle_cfl = 0.4;
  std::size_t check_points = 2;   // inequality sample points per cell; 0 disables
};

using FlatConfig = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline void flatten_json(const nlohmann::json& j, const std::string& prefix, FlatConfig& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it)
      flatten_json(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    return;
  }
  if (prefix.empty()) throw Error("JSON config must be an object");
  if (j.is_string()) out[prefix] = j.get<std::string>();
  else if (j.is_number_integer() || j.is_number_unsigned()) out[prefix] = j.dump();
  else if (j.is_number()) out[prefix] = format_double(j.get<double>());
  else if (j.is_boolean()) out[prefix] = j.get<bool>() ? "true" : "false";
  else throw Error("config key `" + prefix + "` must be a string, number or boolean");
}

} // namespace detail

inline FlatConfig parse_flat(const std::string& text) {
  FlatConfig out;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error("config line " + std::to_string(lineno) + ": expected `key = value`");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw Error("config line " + std::to_string(lineno) + ": empty key");
    if (out.count(key)) throw Error("config key `" + key + "` given twice");
    out[key] = value;
  }
  return out;
}

inline FlatConfig parse_json(const std::string& text) {
  FlatConfig out;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("invalid JSON config: ") + e.what());
  }
  detail::flatten_json(j, "", out);
  return out;
}

namespace detail {

class KeyReader {
public:
  explicit KeyReader(const FlatConfig& flat) : flat_(flat) {}

  bool has(const std::string& key) const { return flat_.count(key) > 0; }

  std::string text(const std::string& key, const std::string& expected) const {
    const auto it = flat_.find(key);
    if (it == flat_.end()) throw Error("missing config key `" + key + "` (expected " + expected + ")");
    return it->second;
  }

  double real(const std::string& key, const std::string& expected) const {
    const std::string v = text(key, expected);
    try {
      std::size_t pos = 0;
      const double d = std::stod(v, &pos);
      if (pos == v.size() && std::isfinite(d)) return d;
    } catch (const std::exception&) {
    }
    throw Error("config key `" + key + "` = `" + v + "` is not " + expected);
  }

  double real_or(const std::string& key, double fallback, const std::string& expected) const {
    return has(key) ? real(key, expected) : fallback;
  }

  double positive(const std::string& key, const std::string& expected = "a positive real") const {
    const double d = real(key, expected);
    if (!(d > 0.0)) throw Error("config key `" + key + "` must be " + expected);
    return d;
  }

  std::size_t count(const std::string& key, std::size_t min_value) const {
    const std::string expected = "an integer >= " + std::to_string(min_value);
    const std::string v = text(key, expected);
    try {
      std::size_t pos = 0;
      const long long n = std::stoll(v, &pos);
      if (pos == v.size() && n >= static_cast<long long>(min_value)) return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
    }
    throw Error("config key `" + key + "` = `" + v + "` is not " + expected);
  }

  std::string choice(const std::string& key, const std::vector<std::string>& options) const {
    std::string expected = "one of";
    for (const auto& o : options) expected += " " + o;
    const std::string v = text(key, expected);
    for (const auto& o : options)
      if (v == o) return v;
    throw Error("config key `" + key + "` = `" + v + "` is not " + expected);
  }

private:
  const FlatConfig& flat_;
};

/// Whitespace/comma separated numeric columns; lines starting with '#' or a
/// non-numeric header are skipped.
inline std::vector<std::vector<double>> read_table(const std::string& path, std::size_t columns) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open table file " + path);
  std::vector<std::vector<double>> cols(columns);
  std::string line;
  while (std::getline(is, line)) {
    for (char& ch : line)
      if (ch == ',') ch = ' ';
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> row;
    double v = 0.0;
    while (ls >> v) row.push_back(v);
    if (row.empty() && cols[0].empty()) continue; // header
    if (row.size() != columns || !ls.eof())
      throw Error("table file " + path + ": expected " + std::to_string(columns) + " numeric columns");
    for (std::size_t c = 0; c < columns; ++c) cols[c].push_back(row[c]);
  }
  return cols;
}

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "domain.L", "domain.c_L",
      "kernel.kind", "kernel.beta", "kernel.attr_amp", "kernel.attr_range", "kernel.rep_amp",
      "kernel.rep_range", "kernel.table",
      "phi.kind", "phi.m", "phi.table",
      "initial.kind", "initial.center", "initial.width", "initial.height", "initial.sigma", "initial.m",
      "initial.t0", "initial.path", "initial.vacuum_floor",
      "n_particles",
      "integrator.method", "integrator.dt_init", "integrator.safety", "integrator.t_end",
      "integrator.sample_every", "integrator.rho_cap", "integrator.min_gap_floor", "integrator.min_time",
      "outputs.dir", "outputs.sample_every", "outputs.grid_cells",
      "oracle.cells", "oracle.cfl",
      "diagnostics.check_points"};
  return keys;
}

} // namespace detail

/// Validates a flattened configuration. Unknown keys are errors; every error
/// names the offending key.
inline RunConfig build_config(const FlatConfig& flat) {
  for (const auto& [k, v] : flat)
    if (!detail::known_keys().count(k)) throw Error("unknown config key `" + k + "`");
  const detail::KeyReader r(flat);
  RunConfig cfg;

  const double L = r.positive("domain.L");
  const double c = r.real_or("domain.c_L", 1.0, "a real in (0, 1]");
  if (!(c > 0.0 && c <= 1.0)) throw Error("config key `domain.c_L` must lie in (0, 1]");
  cfg.domain = TorusDomain(L, c);

  const std::string kk = r.choice("kernel.kind", {"double_yukawa", "morse", "zero", "tabulated"});
  if (kk == "double_yukawa") {
    cfg.kernel = KernelSpec::double_yukawa(r.positive("kernel.beta"));
  } else if (kk == "morse") {
    cfg.kernel = KernelSpec::morse(r.real("kernel.attr_amp", "a nonnegative real"), r.positive("kernel.attr_range"),
                                   r.real("kernel.rep_amp", "a nonnegative real"), r.positive("kernel.rep_range"));
    if (cfg.kernel.attr_amp < 0.0) throw Error("config key `kernel.attr_amp` must be nonnegative");
    if (cfg.kernel.rep_amp < 0.0) throw Error("config key `kernel.rep_amp` must be nonnegative");
  } else if (kk == "zero") {
    cfg.kernel = KernelSpec::zero();
  } else {
    const auto t = detail::read_table(r.text("kernel.table", "a path to a z,K table"), 2);
    cfg.kernel = KernelSpec::tabulated(t[0], t[1]);
  }

  const std::string pk = r.has("phi.kind") ? r.choice("phi.kind", {"power_law", "custom"}) : "power_law";
  if (pk == "power_law") {
    const double m = r.real("phi.m", "a real m >= 1");
    if (!(m >= 1.0)) throw Error("config key `phi.m` = " + format_double(m) + ": phi.m must satisfy m >= 1");
    cfg.phi = NonlinearitySpec::power_law(m);
  } else {
    const auto t = detail::read_table(r.text("phi.table", "a path to a rho,phi,W table"), 3);
    cfg.phi = NonlinearitySpec::custom(t[0], t[1], t[2]);
  }

  InitialSpec& in = cfg.initial;
  const std::string ik = r.choice("initial.kind", {"uniform", "hat", "gaussian_like", "barenblatt", "from_file"});
  using IK = InitialSpec::Kind;
  in.center = r.real_or("initial.center", 0.0, "a real");
  if (ik == "uniform") {
    in.kind = IK::uniform;
  } else if (ik == "hat") {
    in.kind = IK::hat;
    in.width = r.positive("initial.width");
    in.height = r.has("initial.height") ? r.positive("initial.height") : 1.0;
  } else if (ik == "gaussian_like") {
    in.kind = IK::gaussian_like;
    in.sigma = r.positive("initial.sigma");
  } else if (ik == "barenblatt") {
    in.kind = IK::barenblatt;
    in.m = r.real("initial.m", "a real m > 1");
    if (!(in.m > 1.0)) throw Error("config key `initial.m` must be > 1");
    in.t0 = r.positive("initial.t0");
  } else {
    in.kind = IK::from_file;
    in.path = r.text("initial.path", "a path to a grid density CSV");
  }
  in.vacuum_floor = r.real_or("initial.vacuum_floor", 0.0, "a real >= 0");
  if (!(in.vacuum_floor >= 0.0)) throw Error("config key `initial.vacuum_floor` must be >= 0");

  cfg.n_particles = r.count("n_particles", 2);

  IntegratorConfig& ic = cfg.integrator;
  const std::string method = r.has("integrator.method")
                                 ? r.choice("integrator.method", {"rk4", "heun", "euler", "imex"})
                                 : "rk4";
  using M = IntegratorConfig::Method;
  ic.method = method == "rk4" ? M::rk4 : method == "heun" ? M::heun : method == "euler" ? M::euler : M::imex;
  ic.t_end = r.positive("integrator.t_end");
  if (r.has("integrator.sample_every") && r.has("outputs.sample_every"))
    throw Error("config keys `integrator.sample_every` and `outputs.sample_every` are aliases; give one");
  const std::string se_key = r.has("outputs.sample_every") ? "outputs.sample_every" : "integrator.sample_every";
  ic.sample_every = r.has(se_key) ? r.positive(se_key) : ic.t_end / 100.0;
  ic.dt_init = r.has("integrator.dt_init") ? r.positive("integrator.dt_init") : ic.sample_every;
  ic.safety = r.real_or("integrator.safety", 0.2, "a real in (0, 1]");
  if (!(ic.safety > 0.0 && ic.safety <= 1.0)) throw Error("config key `integrator.safety` must lie in (0, 1]");
  ic.rho_cap = r.has("integrator.rho_cap") ? r.positive("integrator.rho_cap") : 100.0;
  ic.min_gap_floor = r.has("integrator.min_gap_floor") ? r.positive("integrator.min_gap_floor") : 0.0;
  cfg.min_time = r.real_or("integrator.min_time", ic.t_end, "a real >= 0");
  if (!(cfg.min_time >= 0.0)) throw Error("config key `integrator.min_time` must be >= 0");

  if (r.has("outputs.dir")) cfg.outputs_dir = r.text("outputs.dir", "a directory path");
  if (r.has("outputs.grid_cells")) cfg.grid_cells = r.count("outputs.grid_cells", 16);
  if (r.has("oracle.cells")) cfg.oracle_cells = r.count("oracle.cells", 16);
  cfg.oracle_cfl = r.real_or("oracle.cfl", 0.4, "a real in (0, 1]");
  if (!(cfg.oracle_cfl > 0.0 && cfg.oracle_cfl <= 1.0)) throw Error("config key `oracle.cfl` must lie in (0, 1]");
  if (r.has("diagnostics.check_points")) cfg.check_points = r.count("diagnostics.check_points", 0);
  return cfg;
}

inline RunConfig parse_config_text(const std::string& text, bool json) {
  return build_config(json ? parse_json(text) : parse_flat(text));
}

/// Reads a config file; `.json` files (or text starting with '{') are JSON.
inline RunConfig parse_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  const std::string text = ss.str();
  const std::string t = detail::trim(text);
  const bool json = (path.size() >= 5 && path.substr(path.size() - 5) == ".json") || (!t.empty() && t[0] == '{');
  return parse_config_text(text, json);
}

} // namespace agdiff
