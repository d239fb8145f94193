#pragma once

// Scenario configuration: a flat key = value text document (dots group
// related keys, '#' starts a comment).  Parsing is strict — unknown keys and
// malformed values are configuration errors — and a parsed config can be
// re-serialized canonically so reports can embed exactly what they ran.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ricciflow/errors.hpp"
#include "ricciflow/parabolic.hpp"

namespace ricci {

struct ScenarioConfig {
  // geometry
  std::string domain = "torus_doubled";  // torus_doubled | rotsym_sphere | rotsym_hemisphere_doubled
  int n = 3;                             // manifold dimension
  int resolution = 32;                   // nodes per axis (half-domain axis included)
  double length = 6.283185307179586;     // torus circumference L
  double radius = 1.0;                   // sphere radius r0 (rotsym domains)

  // time mesh: dt > 0 selects a uniform mesh with ceil(horizon/dt) steps,
  // otherwise `steps` graded steps with ratio `grading`.
  double horizon = 0.01;
  double grading = 2.0;
  double dt = 0.0;
  int steps = 64;

  // initial data
  std::string preset = "flat";  // flat | kinked_warp | conformal_bump | round | cap_corner
  double preset_amplitude = 0.4;  // kinked_warp kink / conformal_bump size
  int preset_mode = 1;            // conformal_bump wavenumber
  double preset_slope = 0.8;      // cap_corner cone slope

  // numerics and diagnostics
  std::string background = "flat";
  int fd_order = 2;
  bool diag_pic = false;       // emit pic/pic1/pic2 margin columns
  bool diag_boundary = true;   // emit interface second-form columns
  bool diag_gauge = false;     // run the gauge stage, emit ricci_residual
  std::string outdir = "out";
  std::uint64_t seed = 2026;

  bool rotsym() const { return domain != "torus_doubled"; }
  bool hemisphere() const { return domain == "rotsym_hemisphere_doubled"; }

  int step_count() const {
    if (dt > 0.0) return static_cast<int>(std::ceil(horizon / dt - 1e-12));
    return steps;
  }

  TimeMesh time_mesh() const {
    if (dt > 0.0) return TimeMesh::uniform(step_count() * dt, step_count());
    return TimeMesh::graded(horizon, steps, grading);
  }

  void validate() const {
    if (domain != "torus_doubled" && domain != "rotsym_sphere" &&
        domain != "rotsym_hemisphere_doubled")
      throw ConfigError("config: unknown domain '" + domain + "'");
    if (n < 2) throw ConfigError("config: n must be at least 2");
    if (!rotsym() && n > kMaxDim)
      throw ConfigError("config: torus domains support n <= " + std::to_string(kMaxDim));
    if (resolution < 8) throw ConfigError("config: resolution must be at least 8");
    if (rotsym() && hemisphere() && resolution % 2 == 0)
      throw ConfigError("config: hemisphere domains need an odd node count");
    if (length <= 0.0 || radius <= 0.0)
      throw ConfigError("config: length and radius must be positive");
    if (horizon <= 0.0) throw ConfigError("config: horizon must be positive");
    if (grading < 1.0) throw ConfigError("config: grading ratio must be >= 1");
    if (dt < 0.0) throw ConfigError("config: dt must be nonnegative");
    // Dyadic checkpoints at horizon/2^k require at least two resolvable levels.
    if (step_count() < 4)
      throw ConfigError("config: time mesh must resolve dyadics >= 2 (need >= 4 steps)");
    if (preset != "flat" && preset != "kinked_warp" && preset != "conformal_bump" &&
        preset != "round" && preset != "cap_corner")
      throw ConfigError("config: unknown preset '" + preset + "'");
    const bool torus_preset = preset == "flat" || preset == "kinked_warp" ||
                              preset == "conformal_bump";
    if (torus_preset && rotsym())
      throw ConfigError("config: preset '" + preset + "' needs a torus domain");
    if (!torus_preset && !rotsym())
      throw ConfigError("config: preset '" + preset + "' needs a rotsym domain");
    if (preset == "cap_corner" && (preset_slope <= 0.0 || preset_slope > 1.0))
      throw ConfigError("config: cap_corner slope must lie in (0, 1]");
    if (preset == "conformal_bump" && preset_mode < 1)
      throw ConfigError("config: conformal_bump mode must be >= 1");
    if (background != "flat" && background != "round")
      throw ConfigError("config: unknown background '" + background + "'");
    if (background == "round" && !rotsym())
      throw ConfigError("config: round background needs a rotsym domain");
    if (rotsym() && background != "round")
      throw ConfigError("config: rotsym domains use the round background");
    if (fd_order != 2) throw ConfigError("config: fd_order must be 2");
    if (diag_pic && n < 4)
      throw ConfigError("config: pic diagnostics need dimension >= 4");
    if (diag_gauge && rotsym())
      throw ConfigError("config: the gauge stage runs on torus domains only");
    if (outdir.empty()) throw ConfigError("config: outdir must not be empty");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' needs a number, got '" + v + "'");
  }
}

inline long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' needs an integer, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw ConfigError("config: key '" + key + "' needs true/false, got '" + v + "'");
}

}  // namespace detail

// key = value lines -> ordered map; later lines override earlier ones.
inline std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) +
                        " is not 'key = value': '" + line + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ConfigError("config: line " + std::to_string(lineno) +
                        " has an empty key or value");
    kv[key] = val;
  }
  return kv;
}

inline ScenarioConfig config_from_text(const std::string& text) {
  ScenarioConfig c;
  bool saw_dt = false, saw_steps = false, saw_background = false;
  for (const auto& [key, v] : parse_key_values(text)) {
    if (key == "domain") c.domain = v;
    else if (key == "n") c.n = static_cast<int>(detail::parse_int(key, v));
    else if (key == "resolution") c.resolution = static_cast<int>(detail::parse_int(key, v));
    else if (key == "length") c.length = detail::parse_double(key, v);
    else if (key == "radius") c.radius = detail::parse_double(key, v);
    else if (key == "horizon") c.horizon = detail::parse_double(key, v);
    else if (key == "grading") c.grading = detail::parse_double(key, v);
    else if (key == "dt") { c.dt = detail::parse_double(key, v); saw_dt = true; }
    else if (key == "steps") { c.steps = static_cast<int>(detail::parse_int(key, v)); saw_steps = true; }
    else if (key == "preset") c.preset = v;
    else if (key == "preset.amplitude") c.preset_amplitude = detail::parse_double(key, v);
    else if (key == "preset.mode") c.preset_mode = static_cast<int>(detail::parse_int(key, v));
    else if (key == "preset.slope") c.preset_slope = detail::parse_double(key, v);
    else if (key == "background") { c.background = v; saw_background = true; }
    else if (key == "fd_order") c.fd_order = static_cast<int>(detail::parse_int(key, v));
    else if (key == "diagnostics.pic") c.diag_pic = detail::parse_bool(key, v);
    else if (key == "diagnostics.boundary") c.diag_boundary = detail::parse_bool(key, v);
    else if (key == "diagnostics.gauge") c.diag_gauge = detail::parse_bool(key, v);
    else if (key == "outdir") c.outdir = v;
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(detail::parse_int(key, v));
    else throw ConfigError("config: unknown key '" + key + "'");
  }
  if (saw_dt && saw_steps)
    throw ConfigError("config: give dt or steps, not both");
  if (saw_dt) c.steps = 0;
  // Rotsym domains default to the round background when none is named.
  if (c.rotsym() && !saw_background) c.background = "round";
  c.validate();
  return c;
}

inline ScenarioConfig config_from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return config_from_text(ss.str());
}

// Canonical key = value serialization; config_from_text of the result
// reproduces the config, and reports embed it verbatim.
inline std::string config_to_text(const ScenarioConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "domain = " << c.domain << "\n"
     << "n = " << c.n << "\n"
     << "resolution = " << c.resolution << "\n"
     << "length = " << c.length << "\n"
     << "radius = " << c.radius << "\n"
     << "horizon = " << c.horizon << "\n";
  if (c.dt > 0.0)
    os << "dt = " << c.dt << "\n";
  else
    os << "grading = " << c.grading << "\n"
       << "steps = " << c.steps << "\n";
  os << "preset = " << c.preset << "\n";
  if (c.preset == "kinked_warp" || c.preset == "conformal_bump")
    os << "preset.amplitude = " << c.preset_amplitude << "\n";
  if (c.preset == "conformal_bump") os << "preset.mode = " << c.preset_mode << "\n";
  if (c.preset == "cap_corner") os << "preset.slope = " << c.preset_slope << "\n";
  os << "background = " << c.background << "\n"
     << "fd_order = " << c.fd_order << "\n"
     << "diagnostics.pic = " << (c.diag_pic ? "true" : "false") << "\n"
     << "diagnostics.boundary = " << (c.diag_boundary ? "true" : "false") << "\n"
     << "diagnostics.gauge = " << (c.diag_gauge ? "true" : "false") << "\n"
     << "outdir = " << c.outdir << "\n"
     << "seed = " << c.seed << "\n";
  return os.str();
}

}  // namespace ricci
