#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wentropy/dynamics.hpp"
#include "wentropy/error.hpp"
#include "wentropy/lattice.hpp"
#include "wentropy/trace.hpp"
#include "wentropy/wannier.hpp"

namespace wentropy {

struct ConfigKey {
  const char* key;  // section.name
  const char* default_value;
  const char* doc;
};

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys{
      {"lattice.shape", "chain", "chain | ring | grid | custom"},
      {"lattice.n", "5", "number of sites (chain, ring, custom)"},
      {"lattice.rows", "4", "grid rows"},
      {"lattice.cols", "4", "grid columns"},
      {"lattice.edges", "", "custom bonds, e.g. 0-1;1-2;2-0"},
      {"physics.N", "1", "particle number"},
      {"physics.sites", "0", "initially occupied sites, separated by ';'"},
      {"physics.J", "1", "hopping amplitude"},
      {"physics.U", "0", "nearest-neighbour interaction"},
      {"physics.dt", "0.1", "sampling interval (1/J)"},
      {"physics.t_max", "20", "trace length (1/J)"},
      {"physics.propagator", "auto", "auto | spectral | krylov"},
      {"physics.krylov_dim", "30", "Lanczos subspace dimension"},
      {"physics.krylov_tol", "1e-9", "Krylov error per unit time"},
      {"frame.x0", "2.5066282746310002", "cell width in position, x0*k0 = 2*pi"},
      {"frame.k0", "2.5066282746310002", "cell width in wavenumber"},
      {"frame.zeta", "0.9", "Gaussian packet width"},
      {"frame.window", "2", "cells run over j in [-window, window] in both directions"},
      {"frame.dx", "0.02", "real-space grid spacing"},
      {"frame.L", "24", "grid half extent"},
      {"frame.oscillator_length", "2.5", "length scale of the local levels"},
      {"frame.leakage_tolerance", "0.001", "maximum level norm outside the window"},
      {"frame.file", "", "load level projections from an exported frame instead of building one"},
      {"entropy.enable_w", "true", "compute W entropy"},
      {"entropy.method", "factorized", "factorized | exact"},
      {"entropy.theta", "1e-14", "branch pruning threshold"},
      {"entropy.cost_budget", "2e9", "maximum projected leaf count"},
      {"entropy.max_w_sites", "8", "W entropy is skipped above this many sites"},
      {"analysis.eps", "0.2", "return threshold for the regression period"},
      {"analysis.horizon", "20000", "period search horizon (1/J)"},
      {"analysis.period_column", "auto", "auto | s_f | s_w"},
      {"analysis.plateau_fraction", "0.1", "plateau averaging block, fraction of samples"},
      {"analysis.plateau_tolerance", "0.01", "relative agreement that marks the plateau"},
      {"output.dir", "out", "output directory (overridden by WENTROPY_OUTPUT_DIR)"},
      {"output.prefix", "trace", "file name prefix"},
      {"output.workers", "0", "worker threads, 0 = available cores"},
  };
  return keys;
}

/// Ordered key/value store restricted to the known keys.
class ConfigMap {
 public:
  ConfigMap() {
    for (const auto& k : config_keys()) values_[k.key] = k.default_value;
  }

  void set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) throw Error(ErrorKind::config, "cli", "unknown config key '" + key + "'");
    values_[key] = value;
  }
  /// Applies "section.key=value".
  void apply(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::config, "cli", "override '" + assignment + "' must look like section.key=value");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  }
  const std::string& get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw Error(ErrorKind::config, "cli", "unknown config key '" + key + "'");
    return it->second;
  }
  double number(const std::string& key) const {
    try {
      return parse_number(get(key), key);
    } catch (const Error&) {
      throw Error(ErrorKind::config, "cli", key + ": '" + get(key) + "' is not a number");
    }
  }
  int integer(const std::string& key) const {
    const double v = number(key);
    if (v != std::floor(v) || std::abs(v) > 1e9)
      throw Error(ErrorKind::config, "cli", key + ": '" + get(key) + "' is not an integer");
    return static_cast<int>(v);
  }
  bool boolean(const std::string& key) const {
    const auto& v = get(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw Error(ErrorKind::config, "cli", key + ": '" + v + "' is not a boolean");
  }

  /// Resolved config as INI text, in key order.
  std::string to_ini() const {
    std::ostringstream os;
    std::string section;
    for (const auto& k : config_keys()) {
      const std::string key = k.key;
      const auto dot = key.find('.');
      if (key.substr(0, dot) != section) {
        if (!section.empty()) os << '\n';
        section = key.substr(0, dot);
        os << '[' << section << "]\n";
      }
      os << key.substr(dot + 1) << " = " << values_.at(key) << '\n';
    }
    return os.str();
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& k : config_keys()) {
      const std::string key = k.key;
      const auto dot = key.find('.');
      j[key.substr(0, dot)][key.substr(dot + 1)] = values_.at(key);
    }
    return j;
  }

  static ConfigMap from_json(const nlohmann::json& j) {
    ConfigMap c;
    if (!j.is_object()) throw Error(ErrorKind::config, "cli", "config JSON must be an object");
    for (const auto& [section, body] : j.items()) {
      if (!body.is_object()) throw Error(ErrorKind::config, "cli", "config section '" + section + "' must be an object");
      for (const auto& [name, value] : body.items())
        c.set(section + "." + name, value.is_string() ? value.get<std::string>() : value.dump());
    }
    return c;
  }

  static ConfigMap from_ini(std::istream& in) {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw Error(ErrorKind::config, "cli", std::string("config file: ") + e.what());
    }
    ConfigMap c;
    for (const auto& [section, body] : tree) {
      if (body.empty() && !body.data().empty())
        throw Error(ErrorKind::config, "cli", "config key '" + section + "' must be inside a [section]");
      for (const auto& [name, value] : body) c.set(section + "." + name, trim(value.data()));
    }
    return c;
  }

  /// Loads an INI file, or the "config" object of a JSON sidecar.
  static ConfigMap load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::config, "cli", "cannot open config '" + path + "'");
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::config, "cli", "config '" + path + "': " + e.what());
      }
      return from_json(j.contains("config") ? j["config"] : j);
    }
    return from_ini(in);
  }

  bool operator==(const ConfigMap&) const = default;

 private:
  static std::string trim(std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }
  std::map<std::string, std::string> values_;
};

/// Commented template listing every key with its default.
inline std::string config_template() {
  std::ostringstream os;
  std::string section;
  for (const auto& k : config_keys()) {
    const std::string key = k.key;
    const auto dot = key.find('.');
    if (key.substr(0, dot) != section) {
      if (!section.empty()) os << '\n';
      section = key.substr(0, dot);
      os << '[' << section << "]\n";
    }
    os << "; " << k.doc << '\n' << key.substr(dot + 1) << " = " << k.default_value << '\n';
  }
  return os.str();
}

enum class WMethod { factorized, exact };
enum class PeriodColumn { automatic, s_f, s_w };

/// Typed view of a ConfigMap, validated.
struct RunConfig {
  Shape shape = Shape::chain;
  int n = 5;
  int rows = 4, cols = 4;
  std::vector<Edge> edges;
  int N = 1;
  std::vector<int> sites{0};
  double J = 1.0, U = 0.0;
  double dt = 0.1, t_max = 20.0;
  PropagatorPolicy propagator = PropagatorPolicy::automatic;
  int krylov_dim = 30;
  double krylov_tol = 1e-9;
  PhaseGrid grid;
  double oscillator_length = 2.5;
  double leakage_tolerance = 1e-3;
  std::string frame_file;
  bool enable_w = true;
  WMethod method = WMethod::factorized;
  double theta = 1e-14;
  double cost_budget = 2e9;
  int max_w_sites = 8;
  double eps = 0.2;
  double horizon = 2e4;
  PeriodColumn period_column = PeriodColumn::automatic;
  double plateau_fraction = 0.1;
  double plateau_tolerance = 0.01;
  std::string output_dir = "out";
  std::string prefix = "trace";
  int workers = 0;
  ConfigMap source;

  int n_sites() const { return shape == Shape::grid ? rows * cols : n; }
  bool w_enabled() const { return enable_w && n_sites() <= max_w_sites; }
  std::size_t n_steps() const { return static_cast<std::size_t>(std::llround(t_max / dt)); }

  LatticeGraph lattice() const {
    switch (shape) {
      case Shape::chain: return build_chain(n);
      case Shape::ring: return build_ring(n);
      case Shape::grid: return build_grid(rows, cols);
      case Shape::custom: return build_custom(n, edges);
    }
    throw Error(ErrorKind::config, "cli", "unknown lattice shape");
  }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline int parse_int(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::config, "cli", key + ": '" + s + "' is not an integer");
  }
}

}  // namespace detail

inline RunConfig resolve(const ConfigMap& c) {
  RunConfig r;
  r.source = c;
  auto fail = [](const std::string& what) { throw Error(ErrorKind::config, "cli", what); };

  const auto& shape = c.get("lattice.shape");
  if (shape == "chain") r.shape = Shape::chain;
  else if (shape == "ring") r.shape = Shape::ring;
  else if (shape == "grid") r.shape = Shape::grid;
  else if (shape == "custom") r.shape = Shape::custom;
  else fail("lattice.shape: unknown shape '" + shape + "'");
  r.n = c.integer("lattice.n");
  r.rows = c.integer("lattice.rows");
  r.cols = c.integer("lattice.cols");
  for (const auto& e : detail::split_list(c.get("lattice.edges"), ';')) {
    const auto dash = e.find('-');
    if (dash == std::string::npos) fail("lattice.edges: bond '" + e + "' must look like i-j");
    r.edges.emplace_back(detail::parse_int(e.substr(0, dash), "lattice.edges"),
                         detail::parse_int(e.substr(dash + 1), "lattice.edges"));
  }
  if (r.shape == Shape::custom && r.edges.empty()) fail("lattice.edges: custom lattice needs bonds");

  r.N = c.integer("physics.N");
  r.sites.clear();
  for (const auto& s : detail::split_list(c.get("physics.sites"), ';'))
    r.sites.push_back(detail::parse_int(s, "physics.sites"));
  const int ns = r.n_sites();
  if (r.N < 0 || r.N > ns) fail("physics.N: " + std::to_string(r.N) + " outside [0, " + std::to_string(ns) + "]");
  if (static_cast<int>(r.sites.size()) != r.N)
    fail("physics.sites: " + std::to_string(r.sites.size()) + " sites given for N=" + std::to_string(r.N));
  {
    auto sorted = r.sites;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) fail("physics.sites: sites must be distinct");
    for (int s : sorted)
      if (s < 0 || s >= ns) fail("physics.sites: site " + std::to_string(s) + " outside the lattice");
  }
  r.J = c.number("physics.J");
  r.U = c.number("physics.U");
  r.dt = c.number("physics.dt");
  r.t_max = c.number("physics.t_max");
  if (!(r.dt > 0.0)) fail("physics.dt must be positive");
  if (!(r.t_max >= r.dt)) fail("physics.t_max must be at least dt");
  const auto& prop = c.get("physics.propagator");
  if (prop == "auto") r.propagator = PropagatorPolicy::automatic;
  else if (prop == "spectral") r.propagator = PropagatorPolicy::spectral;
  else if (prop == "krylov") r.propagator = PropagatorPolicy::krylov;
  else fail("physics.propagator: unknown value '" + prop + "'");
  r.krylov_dim = c.integer("physics.krylov_dim");
  r.krylov_tol = c.number("physics.krylov_tol");

  r.grid.x0 = c.number("frame.x0");
  r.grid.k0 = c.number("frame.k0");
  r.grid.zeta = c.number("frame.zeta");
  r.grid.window_x = r.grid.window_k = c.integer("frame.window");
  r.grid.dx = c.number("frame.dx");
  r.grid.half_extent = c.number("frame.L");
  r.oscillator_length = c.number("frame.oscillator_length");
  r.leakage_tolerance = c.number("frame.leakage_tolerance");
  r.frame_file = c.get("frame.file");
  try {
    r.grid.validate();
  } catch (const Error& e) {
    fail(std::string("frame: ") + e.what());
  }

  r.enable_w = c.boolean("entropy.enable_w");
  const auto& method = c.get("entropy.method");
  if (method == "factorized") r.method = WMethod::factorized;
  else if (method == "exact") r.method = WMethod::exact;
  else fail("entropy.method: unknown method '" + method + "'");
  r.theta = c.number("entropy.theta");
  r.cost_budget = c.number("entropy.cost_budget");
  r.max_w_sites = c.integer("entropy.max_w_sites");
  if (!(r.theta >= 0.0)) fail("entropy.theta must be non-negative");

  r.eps = c.number("analysis.eps");
  r.horizon = c.number("analysis.horizon");
  if (!(r.eps > 0.0)) fail("analysis.eps must be positive");
  if (!(r.horizon > 0.0)) fail("analysis.horizon must be positive");
  const auto& pc = c.get("analysis.period_column");
  if (pc == "auto") r.period_column = PeriodColumn::automatic;
  else if (pc == "s_f") r.period_column = PeriodColumn::s_f;
  else if (pc == "s_w") r.period_column = PeriodColumn::s_w;
  else fail("analysis.period_column: unknown column '" + pc + "'");
  r.plateau_fraction = c.number("analysis.plateau_fraction");
  r.plateau_tolerance = c.number("analysis.plateau_tolerance");

  r.output_dir = c.get("output.dir");
  r.prefix = c.get("output.prefix");
  r.workers = c.integer("output.workers");
  if (r.workers < 0) fail("output.workers must be non-negative");
  return r;
}

}  // namespace wentropy
