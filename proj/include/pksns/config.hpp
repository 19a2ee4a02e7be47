/// Scenario configuration: a deliberately small TOML-subset reader, the
/// validated scenario description, and the structured initial-data builder.
///
/// Supported config syntax: '#' comments, [section] headers, and
/// `key = value` lines where value is a quoted string, boolean, number, or a
/// single-line array of such scalars.  Keys flatten to "section.key".
/// Anything outside the subset (multi-line values, nested tables,
/// datetimes, inline tables) is rejected with a line-numbered error.
#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pksns/field.hpp"
#include "pksns/grid.hpp"
#include "pksns/dynamics.hpp"

namespace pksns {

// ---------------------------------------------------------------------------
// Config table
// ---------------------------------------------------------------------------

class ConfigTable {
 public:
  struct Value {
    enum class Kind { boolean, integer, real, string, array_real, array_string };
    Kind kind = Kind::string;
    bool b = false;
    long long i = 0;
    Real r = 0.0;
    std::string s;
    std::vector<Real> ar;
    std::vector<std::string> as;
  };

  static ConfigTable parse_string(const std::string& text,
                                  const std::string& origin = "<config>") {
    ConfigTable t;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      strip_comment(line);
      const std::string s = trim(line);
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']' || s.size() < 3)
          fail(origin, lineno, "malformed section header");
        section = trim(s.substr(1, s.size() - 2));
        if (section.empty() || section.front() == '[')
          fail(origin, lineno, "unsupported section header (nested tables "
                               "are outside the accepted subset)");
        continue;
      }
      const std::size_t eq = find_unquoted(s, '=');
      if (eq == std::string::npos)
        fail(origin, lineno, "expected key = value");
      std::string key = trim(s.substr(0, eq));
      const std::string raw = trim(s.substr(eq + 1));
      if (key.empty() || raw.empty())
        fail(origin, lineno, "expected key = value");
      if (!section.empty()) key = section + "." + key;
      t.values_[key] = parse_value(raw, origin, lineno);
    }
    return t;
  }

  static ConfigTable parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SolverError("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
  }

  /// CLI override "section.key=value"; the value uses the same grammar as in
  /// a file.  Overrides win over file contents.
  void set_override(const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
      throw SolverError("config: override must look like section.key=value, got '" +
                        assignment + "'");
    const std::string key = trim(assignment.substr(0, eq));
    const std::string raw = trim(assignment.substr(eq + 1));
    values_[key] = parse_value(raw, "<override>", 0);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    out.reserve(values_.size());
    for (const auto& kv : values_) out.push_back(kv.first);
    return out;
  }

  bool get_bool(const std::string& key, bool dflt) const {
    const Value* v = find(key);
    if (v == nullptr) return dflt;
    if (v->kind != Value::Kind::boolean)
      throw SolverError("config: " + key + " must be a boolean");
    return v->b;
  }

  long long get_int(const std::string& key, long long dflt) const {
    const Value* v = find(key);
    if (v == nullptr) return dflt;
    if (v->kind != Value::Kind::integer)
      throw SolverError("config: " + key + " must be an integer");
    return v->i;
  }

  Real get_real(const std::string& key, Real dflt) const {
    const Value* v = find(key);
    if (v == nullptr) return dflt;
    if (v->kind == Value::Kind::integer) return static_cast<Real>(v->i);
    if (v->kind != Value::Kind::real)
      throw SolverError("config: " + key + " must be a number");
    return v->r;
  }

  std::string get_string(const std::string& key, const std::string& dflt) const {
    const Value* v = find(key);
    if (v == nullptr) return dflt;
    if (v->kind != Value::Kind::string)
      throw SolverError("config: " + key + " must be a quoted string");
    return v->s;
  }

  std::vector<Real> get_reals(const std::string& key) const {
    const Value* v = find(key);
    if (v == nullptr) return {};
    if (v->kind == Value::Kind::array_real) return v->ar;
    if (v->kind == Value::Kind::integer)
      return {static_cast<Real>(v->i)};
    if (v->kind == Value::Kind::real) return {v->r};
    throw SolverError("config: " + key + " must be a numeric array");
  }

  std::vector<std::string> get_strings(const std::string& key) const {
    const Value* v = find(key);
    if (v == nullptr) return {};
    if (v->kind == Value::Kind::array_string) return v->as;
    if (v->kind == Value::Kind::string) return {v->s};
    throw SolverError("config: " + key + " must be a string array");
  }

 private:
  std::map<std::string, Value> values_;

  const Value* find(const std::string& key) const {
    const auto it = values_.find(key);
    return it == values_.end() ? nullptr : &it->second;
  }

  [[noreturn]] static void fail(const std::string& origin, int lineno,
                                const std::string& what) {
    throw SolverError("config: " + origin + ":" + std::to_string(lineno) +
                      ": " + what);
  }

  static std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }

  static void strip_comment(std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.erase(i);
        return;
      }
    }
  }

  static std::size_t find_unquoted(const std::string& s, char c) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') quoted = !quoted;
      if (s[i] == c && !quoted) return i;
    }
    return std::string::npos;
  }

  static Value parse_scalar(const std::string& raw, const std::string& origin,
                            int lineno) {
    Value v;
    if (raw == "true" || raw == "false") {
      v.kind = Value::Kind::boolean;
      v.b = raw == "true";
      return v;
    }
    if (raw.front() == '"') {
      if (raw.size() < 2 || raw.back() != '"')
        fail(origin, lineno, "unterminated string");
      v.kind = Value::Kind::string;
      v.s = raw.substr(1, raw.size() - 2);
      if (v.s.find('"') != std::string::npos)
        fail(origin, lineno, "embedded quotes are outside the accepted subset");
      return v;
    }
    const bool looks_int =
        raw.find_first_of(".eE") == std::string::npos &&
        raw.find_first_not_of("+-0123456789_") == std::string::npos;
    std::string digits = raw;
    digits.erase(std::remove(digits.begin(), digits.end(), '_'), digits.end());
    std::size_t used = 0;
    try {
      if (looks_int) {
        v.kind = Value::Kind::integer;
        v.i = std::stoll(digits, &used);
      } else {
        v.kind = Value::Kind::real;
        v.r = std::stod(digits, &used);
      }
    } catch (const std::exception&) {
      fail(origin, lineno, "cannot parse value '" + raw + "'");
    }
    if (used != digits.size())
      fail(origin, lineno, "trailing characters after value '" + raw + "'");
    return v;
  }

  static Value parse_value(const std::string& raw, const std::string& origin,
                           int lineno) {
    if (raw.front() != '[') return parse_scalar(raw, origin, lineno);
    if (raw.back() != ']')
      fail(origin, lineno, "arrays must open and close on one line");
    const std::string body = trim(raw.substr(1, raw.size() - 2));
    Value v;
    v.kind = Value::Kind::array_real;
    if (body.empty()) return v;  // empty array: treated as empty numeric array
    std::vector<std::string> parts;
    bool quoted = false;
    std::string cur;
    for (char c : body) {
      if (c == '"') quoted = !quoted;
      if (c == ',' && !quoted) {
        parts.push_back(trim(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    parts.push_back(trim(cur));
    bool strings = false, numbers = false;
    for (const std::string& p : parts) {
      if (p.empty()) fail(origin, lineno, "empty array element");
      const Value e = parse_scalar(p, origin, lineno);
      switch (e.kind) {
        case Value::Kind::string:
          strings = true;
          v.as.push_back(e.s);
          break;
        case Value::Kind::integer:
          numbers = true;
          v.ar.push_back(static_cast<Real>(e.i));
          break;
        case Value::Kind::real:
          numbers = true;
          v.ar.push_back(e.r);
          break;
        default:
          fail(origin, lineno, "array elements must be scalars");
      }
    }
    if (strings && numbers)
      fail(origin, lineno, "arrays must be homogeneous");
    v.kind = strings ? Value::Kind::array_string : Value::Kind::array_real;
    return v;
  }
};

// ---------------------------------------------------------------------------
// Scenario description
// ---------------------------------------------------------------------------

/// One separable density term: amplitude * profile(y) * cos(k1 x + k3 z + phase).
struct ModeTerm {
  Real amplitude = 0.0;
  int k1 = 0;
  int k3 = 0;
  std::string profile = "one";
  Real phase = 0.0;
};

enum class InitialKind { modes, preset, checkpoint };

struct InitialData {
  InitialKind kind = InitialKind::modes;
  std::string preset;              ///< for InitialKind::preset
  std::string checkpoint;          ///< path, for InitialKind::checkpoint
  std::vector<ModeTerm> modes;     ///< for InitialKind::modes
  Real mass = -1.0;                ///< > 0: rescale the density to this mass
  Real width = 8.0;                ///< concentration parameter for presets
  Real amplitude = 1.0;            ///< overall preset amplitude
};

struct ScenarioConfig {
  std::string name = "scenario";
  Index nx = 16, ny = 17, nz = 16;
  Params params{};
  InitialData initial{};
  std::string output_dir;          ///< empty: resolved from env root + name
  long long sample_every = 1;      ///< diagnostic cadence in steps
  long long max_steps = 200000;    ///< hard safety cap
  std::uint64_t seed = 0;          ///< reserved for randomized construction

  void validate() const;
  static ScenarioConfig from_table(const ConfigTable& t);
  static ScenarioConfig from_file(const std::string& path) {
    return from_table(ConfigTable::parse_file(path));
  }
};

namespace detail {

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "name", "seed", "max_steps",
      "grid.nx", "grid.ny", "grid.nz",
      "params.A", "params.mu", "params.a", "params.eps1", "params.c0",
      "params.dt_init", "params.dt_min", "params.dt_max", "params.cfl",
      "params.t_end", "params.tol_div", "params.clip_negative_n",
      "terms.shear", "terms.diffusion", "terms.advection", "terms.chemotaxis",
      "terms.logistic", "terms.coupling", "terms.density_force",
      "initial.type", "initial.preset", "initial.checkpoint", "initial.mass",
      "initial.width", "initial.amplitude", "initial.modes_amplitude",
      "initial.modes_k1", "initial.modes_k3", "initial.modes_profile",
      "initial.modes_phase",
      "output.directory", "output.sample_every",
  };
  return keys;
}

/// Named wall-normal profiles available to mode terms.
inline Real named_profile(const std::string& name, Real y) {
  if (name == "one") return 1.0;
  if (name == "wall") return 1.0 - y * y;
  if (name == "wall_sq") return (1.0 - y * y) * (1.0 - y * y);
  if (name == "y_wall") return y * (1.0 - y * y);
  if (name == "sine_half") return std::sin(pi * (y + 1.0) / 2.0);
  if (name == "gauss") return std::exp(-9.0 * y * y);
  throw SolverError("config: unknown wall-normal profile '" + name + "'");
}

inline bool known_profile(const std::string& name) {
  try {
    named_profile(name, 0.0);
    return true;
  } catch (const SolverError&) {
    return false;
  }
}

inline const std::set<std::string>& known_presets() {
  static const std::set<std::string> names = {"zero", "case1", "case2",
                                              "concentrated", "linear"};
  return names;
}

}  // namespace detail

inline void ScenarioConfig::validate() const {
  if (name.empty()) throw SolverError("config: name must not be empty");
  // Mirror the grid constructor's requirements so invalid configs are
  // rejected before any allocation happens.
  if (!detail::is_pow2(nx) || nx < 8)
    throw SolverError("config: grid.nx must be a power of two >= 8");
  if (!detail::is_pow2(nz) || nz < 8)
    throw SolverError("config: grid.nz must be a power of two >= 8");
  if (ny < 9) throw SolverError("config: grid.ny must be >= 9");
  params.validate();
  if (sample_every < 1)
    throw SolverError("config: output.sample_every must be >= 1");
  if (max_steps < 1) throw SolverError("config: max_steps must be >= 1");
  switch (initial.kind) {
    case InitialKind::preset:
      if (detail::known_presets().count(initial.preset) == 0)
        throw SolverError("config: unknown preset '" + initial.preset + "'");
      break;
    case InitialKind::checkpoint:
      if (initial.checkpoint.empty())
        throw SolverError("config: initial.checkpoint path must not be empty");
      break;
    case InitialKind::modes:
      for (const ModeTerm& m : initial.modes) {
        if (!detail::known_profile(m.profile))
          throw SolverError("config: unknown wall-normal profile '" +
                            m.profile + "'");
        if (std::abs(m.k1) > nx / 2 || std::abs(m.k3) > nz / 2)
          throw SolverError("config: mode wavenumber exceeds the grid band");
      }
      break;
  }
  if (initial.mass == 0.0 || (initial.mass < 0.0 && initial.mass != -1.0))
    throw SolverError("config: initial.mass must be positive (or omitted)");
  if (!(initial.width > 0.0))
    throw SolverError("config: initial.width must be positive");
}

inline ScenarioConfig ScenarioConfig::from_table(const ConfigTable& t) {
  for (const std::string& key : t.keys())
    if (detail::known_config_keys().count(key) == 0)
      throw SolverError("config: unknown key '" + key + "'");

  ScenarioConfig cfg;
  cfg.name = t.get_string("name", cfg.name);
  cfg.seed = static_cast<std::uint64_t>(t.get_int("seed", 0));
  cfg.max_steps = t.get_int("max_steps", cfg.max_steps);
  cfg.nx = static_cast<Index>(t.get_int("grid.nx", cfg.nx));
  cfg.ny = static_cast<Index>(t.get_int("grid.ny", cfg.ny));
  cfg.nz = static_cast<Index>(t.get_int("grid.nz", cfg.nz));

  Params& p = cfg.params;
  p.A = t.get_real("params.A", p.A);
  p.mu = t.get_real("params.mu", p.mu);
  p.a = t.get_real("params.a", p.a);
  p.eps1 = t.get_real("params.eps1", p.eps1);
  p.c0 = t.get_real("params.c0", p.c0);
  p.dt_init = t.get_real("params.dt_init", p.dt_init);
  p.dt_min = t.get_real("params.dt_min", p.dt_min);
  p.dt_max = t.get_real("params.dt_max", p.dt_max);
  p.cfl = t.get_real("params.cfl", p.cfl);
  p.t_end = t.get_real("params.t_end", p.t_end);
  p.tol_div = t.get_real("params.tol_div", p.tol_div);
  p.clip_negative_n = t.get_bool("params.clip_negative_n", p.clip_negative_n);
  p.terms.shear = t.get_bool("terms.shear", p.terms.shear);
  p.terms.diffusion = t.get_bool("terms.diffusion", p.terms.diffusion);
  p.terms.advection = t.get_bool("terms.advection", p.terms.advection);
  p.terms.chemotaxis = t.get_bool("terms.chemotaxis", p.terms.chemotaxis);
  p.terms.logistic = t.get_bool("terms.logistic", p.terms.logistic);
  p.terms.coupling = t.get_bool("terms.coupling", p.terms.coupling);
  p.terms.density_force = t.get_bool("terms.density_force", p.terms.density_force);

  const std::string type = t.get_string("initial.type", "modes");
  if (type == "modes") {
    cfg.initial.kind = InitialKind::modes;
  } else if (type == "preset") {
    cfg.initial.kind = InitialKind::preset;
  } else if (type == "checkpoint") {
    cfg.initial.kind = InitialKind::checkpoint;
  } else {
    throw SolverError("config: initial.type must be modes, preset, or checkpoint");
  }
  cfg.initial.preset = t.get_string("initial.preset", "");
  cfg.initial.checkpoint = t.get_string("initial.checkpoint", "");
  cfg.initial.mass = t.get_real("initial.mass", cfg.initial.mass);
  cfg.initial.width = t.get_real("initial.width", cfg.initial.width);
  cfg.initial.amplitude = t.get_real("initial.amplitude", cfg.initial.amplitude);

  const std::vector<Real> amps = t.get_reals("initial.modes_amplitude");
  const std::vector<Real> k1s = t.get_reals("initial.modes_k1");
  const std::vector<Real> k3s = t.get_reals("initial.modes_k3");
  const std::vector<Real> phases = t.get_reals("initial.modes_phase");
  std::vector<std::string> profiles = t.get_strings("initial.modes_profile");
  const std::size_t nmodes = amps.size();
  if (k1s.size() != nmodes || k3s.size() != nmodes ||
      (!phases.empty() && phases.size() != nmodes) ||
      (!profiles.empty() && profiles.size() != nmodes))
    throw SolverError(
        "config: initial.modes_* arrays must all have the same length");
  for (std::size_t i = 0; i < nmodes; ++i) {
    ModeTerm m;
    m.amplitude = amps[i];
    m.k1 = static_cast<int>(k1s[i]);
    m.k3 = static_cast<int>(k3s[i]);
    m.profile = profiles.empty() ? std::string("one") : profiles[i];
    m.phase = phases.empty() ? 0.0 : phases[i];
    cfg.initial.modes.push_back(m);
  }

  cfg.output_dir = t.get_string("output.directory", "");
  cfg.sample_every = t.get_int("output.sample_every", cfg.sample_every);

  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Initial density construction
// ---------------------------------------------------------------------------

/// Density field from a structured mode description.
inline PhysicalField density_from_modes(const GridPtr& grid,
                                        const std::vector<ModeTerm>& modes) {
  return sample_field(grid, [&modes](Real x, Real y, Real z) {
    Real v = 0.0;
    for (const ModeTerm& m : modes)
      v += m.amplitude * detail::named_profile(m.profile, y) *
           std::cos(m.k1 * x + m.k3 * z + m.phase);
    return v;
  });
}

/// Density field for a named preset.  Shapes:
///   zero          identically zero
///   case1/case2   broad positive density with x and z structure (the logistic
///                 and small-mass scenarios differ only in the mass target)
///   concentrated  x-independent bump, localized in y and z
///   linear        small single-wavenumber perturbation for decay studies
inline PhysicalField density_from_preset(const GridPtr& grid,
                                         const InitialData& init) {
  const Real amp = init.amplitude;
  const Real kappa = init.width;
  if (init.preset == "zero") return PhysicalField(grid);
  if (init.preset == "case1" || init.preset == "case2") {
    return sample_field(grid, [amp](Real x, Real y, Real z) {
      const Real w = 1.0 - y * y;
      return amp * (1.0 + 0.5 * w * std::cos(x) + 0.4 * w * std::cos(z) +
                    0.2 * w * std::cos(x + z));
    });
  }
  if (init.preset == "concentrated") {
    return sample_field(grid, [amp, kappa](Real, Real y, Real z) {
      return amp * std::exp(kappa * (std::cos(z - pi) - 1.0)) *
             std::exp(-kappa * y * y);
    });
  }
  if (init.preset == "linear") {
    return sample_field(grid, [amp](Real x, Real y, Real z) {
      const Real w = 1.0 - y * y;
      return amp * w * std::cos(x) * (1.0 + 0.3 * std::cos(z));
    });
  }
  throw SolverError("config: unknown preset '" + init.preset + "'");
}

/// Initial density per the scenario description (checkpoint inputs are
/// resolved by the runner, not here).  Applies the optional mass rescale.
inline PhysicalField build_initial_density(const GridPtr& grid,
                                           const InitialData& init) {
  if (init.kind == InitialKind::checkpoint)
    throw SolverError("config: checkpoint initial data is resolved by the runner");
  PhysicalField n =
      init.kind == InitialKind::preset
          ? density_from_preset(grid, init)
          : density_from_modes(grid, init.modes);
  if (init.mass > 0.0) {
    const Real m = integral(n);
    if (!(m > 0.0))
      throw SolverError("config: cannot rescale a density with nonpositive mass");
    n *= init.mass / m;
  }
  return n;
}

}  // namespace pksns
