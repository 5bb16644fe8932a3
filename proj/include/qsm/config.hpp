#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "qsm/common.hpp"
#include "qsm/forward.hpp"
#include "qsm/geometry.hpp"
#include "qsm/indicators.hpp"
#include "qsm/sources.hpp"

namespace qsm {

namespace text {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  require(end && *end == '\0' && !v.empty(), "'" + key + "': expected a number, got '" + v + "'", ErrorKind::config);
  return d;
}

inline long long to_integer(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long long i = std::strtoll(v.c_str(), &end, 10);
  require(end && *end == '\0' && !v.empty(), "'" + key + "': expected an integer, got '" + v + "'",
          ErrorKind::config);
  return i;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorKind::config, "'" + key + "': expected true/false, got '" + v + "'");
}

}  // namespace text

/// Flat key = value configuration with dotted section names
/// (physics.lambda = 1). '#' starts a comment. Later assignments win.
class KeyValues {
 public:
  static KeyValues parse(std::istream& in, const std::string& origin = "<config>") {
    KeyValues kv;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
      ++number;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = text::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      require(eq != std::string::npos, origin + ":" + std::to_string(number) + ": expected 'key = value'",
              ErrorKind::config);
      kv.set(text::trim(line.substr(0, eq)), text::trim(line.substr(eq + 1)));
    }
    return kv;
  }

  static KeyValues load(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), "cannot read config '" + path + "'", ErrorKind::io);
    return parse(in, path);
  }

  /// Applies a "key=value" override.
  void apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    require(eq != std::string::npos, "override '" + assignment + "' is not key=value", ErrorKind::config);
    set(text::trim(assignment.substr(0, eq)), text::trim(assignment.substr(eq + 1)));
  }

  void set(const std::string& key, const std::string& value) {
    require(!key.empty(), "empty config key", ErrorKind::config);
    entries_[key] = value;
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  std::optional<std::string> get(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

/// Validated run configuration with per-problem defaults.
struct RunConfig {
  std::string problem = "elastic2d";  // elastic2d | elastic3d | em3d
  std::string source = "example_two";
  double lambda = 1.0, mu = 1.0, epsilon = 1.0;
  int L = 51;
  int Lambda = 80;
  double delta = 0.5;  // frequency (elastic) or wavenumber (em) step
  double noise = 0.3;
  std::uint64_t seed = 0;
  std::vector<double> grid_lo, grid_hi;
  double grid_h = 0.01;
  std::vector<Slice> slices;
  std::vector<IndicatorKind> indicators;
  std::string output_dir = "out";
  bool real_part_only = false;
  double exclude_band = 0.0;
  double threshold = 0.0;  // 0 disables the threshold mask
  std::string reference = "auto";
  int seeds = 10;
  std::string sweep_axis;
  std::vector<double> sweep_values;
  std::string sweep_secondary_axis;
  std::vector<double> sweep_secondary_values;

  int dimension() const { return problem == "elastic2d" ? 2 : 3; }
  bool is_em() const { return problem == "em3d"; }

  PhysicsParams physics() const {
    return is_em() ? PhysicsParams::em(epsilon, mu) : PhysicsParams::elastic(lambda, mu);
  }

  FrequencyGrid frequencies() const { return frequency_grid(delta, Lambda); }

  /// Flat snapshot, reparsable by from_keys.
  std::map<std::string, std::string> snapshot() const;

  static RunConfig from_keys(const KeyValues& kv);
};

namespace detail {

inline std::string format_double(double v) { return format_number(v); }

inline std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

inline std::vector<double> parse_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : text::split(v, ',')) {
    // Fractions such as 1/8 are accepted for frequency steps.
    if (const auto slash = item.find('/'); slash != std::string::npos) {
      out.push_back(text::to_double(key, text::trim(item.substr(0, slash))) /
                    text::to_double(key, text::trim(item.substr(slash + 1))));
    } else {
      out.push_back(text::to_double(key, item));
    }
  }
  return out;
}

inline int axis_index(const std::string& name) {
  if (name == "x" || name == "z1" || name == "0") return 0;
  if (name == "y" || name == "z2" || name == "1") return 1;
  if (name == "z" || name == "z3" || name == "2") return 2;
  throw Error(ErrorKind::config, "unknown slice axis '" + name + "'");
}

}  // namespace detail

inline std::map<std::string, std::string> RunConfig::snapshot() const {
  using detail::format_double;
  std::map<std::string, std::string> m;
  m["problem"] = problem;
  m["source.name"] = source;
  m["physics.lambda"] = format_double(lambda);
  m["physics.mu"] = format_double(mu);
  m["physics.epsilon"] = format_double(epsilon);
  m["data.L"] = std::to_string(L);
  m["data.Lambda"] = std::to_string(Lambda);
  m["data.delta"] = format_double(delta);
  m["data.noise"] = format_double(noise);
  m["data.seed"] = std::to_string(seed);
  m["grid.lo"] = detail::join_doubles(grid_lo);
  m["grid.hi"] = detail::join_doubles(grid_hi);
  m["grid.h"] = format_double(grid_h);
  std::string sl;
  for (const auto& s : slices) sl += (sl.empty() ? "" : ",") + std::to_string(s.axis) + ":" + format_double(s.offset);
  m["grid.slices"] = sl;
  std::string ind;
  for (auto k : indicators) ind += (ind.empty() ? "" : ",") + std::string(to_string(k));
  m["indicators"] = ind;
  m["output.dir"] = output_dir;
  m["metrics.real_part_only"] = real_part_only ? "true" : "false";
  m["metrics.exclude_band"] = format_double(exclude_band);
  m["metrics.threshold"] = format_double(threshold);
  m["metrics.reference"] = reference;
  m["sweep.seeds"] = std::to_string(seeds);
  m["sweep.axis"] = sweep_axis;
  m["sweep.values"] = detail::join_doubles(sweep_values);
  m["sweep.secondary_axis"] = sweep_secondary_axis;
  m["sweep.secondary_values"] = detail::join_doubles(sweep_secondary_values);
  return m;
}

inline SourceSpec2 source_2d(const std::string& name);
inline SourceSpec3 source_3d(const std::string& name);

inline RunConfig RunConfig::from_keys(const KeyValues& kv) {
  static const std::vector<std::string> known = {
      "problem",       "source.name",    "physics.lambda",        "physics.mu",           "physics.epsilon",
      "data.L",        "data.Lambda",    "data.omega_max",        "data.delta",           "data.noise",
      "data.seed",     "grid.lo",        "grid.hi",               "grid.h",               "grid.slices",
      "indicators",    "output.dir",     "metrics.real_part_only", "metrics.exclude_band", "metrics.threshold",
      "metrics.reference", "sweep.seeds", "sweep.axis",           "sweep.values",         "sweep.secondary_axis",
      "sweep.secondary_values"};
  for (const auto& [key, value] : kv.entries()) {
    bool ok = false;
    for (const auto& k : known) ok = ok || k == key;
    require(ok, "unknown config key '" + key + "'", ErrorKind::config);
  }

  RunConfig c;
  auto str = [&](const char* key, std::string& out) {
    if (auto v = kv.get(key)) out = *v;
  };
  auto num = [&](const char* key, double& out) {
    if (auto v = kv.get(key)) out = text::to_double(key, *v);
  };
  auto integer = [&](const char* key, auto& out) {
    if (auto v = kv.get(key)) out = static_cast<std::remove_reference_t<decltype(out)>>(text::to_integer(key, *v));
  };

  str("problem", c.problem);
  require(c.problem == "elastic2d" || c.problem == "elastic3d" || c.problem == "em3d",
          "problem must be elastic2d, elastic3d or em3d", ErrorKind::config);
  const int dim = c.dimension();

  // Problem-specific defaults.
  if (c.is_em()) {
    c.source = "example_four";
    c.noise = 0.1;
    c.L = 151;
    c.Lambda = 80;
  } else if (dim == 3) {
    c.source = "bump";
  }
  const double extent = dim == 2 ? 3.0 : 1.0;
  c.grid_lo.assign(dim, -extent);
  c.grid_hi.assign(dim, extent);
  if (dim == 3) c.slices = {Slice{2, 0.0}};

  str("source.name", c.source);
  num("physics.lambda", c.lambda);
  num("physics.mu", c.mu);
  num("physics.epsilon", c.epsilon);
  integer("data.L", c.L);
  if (auto v = kv.get("data.delta")) c.delta = detail::parse_doubles("data.delta", *v).at(0);
  integer("data.Lambda", c.Lambda);
  if (auto v = kv.get("data.omega_max")) {
    require(!kv.has("data.Lambda"), "give data.Lambda or data.omega_max, not both", ErrorKind::config);
    c.Lambda = static_cast<int>(std::lround(text::to_double("data.omega_max", *v) / c.delta));
  }
  num("data.noise", c.noise);
  integer("data.seed", c.seed);
  if (auto v = kv.get("grid.lo")) c.grid_lo = detail::parse_doubles("grid.lo", *v);
  if (auto v = kv.get("grid.hi")) c.grid_hi = detail::parse_doubles("grid.hi", *v);
  num("grid.h", c.grid_h);
  if (auto v = kv.get("grid.slices")) {
    c.slices.clear();
    for (const auto& item : text::split(*v, ',')) {
      const auto sep = item.find_first_of(":=");
      require(sep != std::string::npos, "grid.slices: expected axis:offset, got '" + item + "'", ErrorKind::config);
      c.slices.push_back({detail::axis_index(text::trim(item.substr(0, sep))),
                          text::to_double("grid.slices", text::trim(item.substr(sep + 1)))});
    }
  }
  if (auto v = kv.get("indicators")) {
    for (const auto& item : text::split(*v, ',')) c.indicators.push_back(indicator_kind_from_string(item));
  } else {
    c.indicators = {dim == 2 ? IndicatorKind::f2d : c.is_em() ? IndicatorKind::E : IndicatorKind::f3d};
  }
  str("output.dir", c.output_dir);
  if (const char* env = std::getenv("QSM_OUTPUT_DIR"); env && *env) c.output_dir = env;
  if (auto v = kv.get("metrics.real_part_only")) c.real_part_only = text::to_bool("metrics.real_part_only", *v);
  num("metrics.exclude_band", c.exclude_band);
  num("metrics.threshold", c.threshold);
  str("metrics.reference", c.reference);
  integer("sweep.seeds", c.seeds);
  str("sweep.axis", c.sweep_axis);
  if (auto v = kv.get("sweep.values")) c.sweep_values = detail::parse_doubles("sweep.values", *v);
  str("sweep.secondary_axis", c.sweep_secondary_axis);
  if (auto v = kv.get("sweep.secondary_values"))
    c.sweep_secondary_values = detail::parse_doubles("sweep.secondary_values", *v);

  // Consistency.
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::config, msg); };
  if (c.L < 1 || c.Lambda < 1) fail("data.L and data.Lambda must be >= 1");
  if (!(c.delta > 0.0)) fail("data.delta must be > 0");
  if (!(c.noise >= 0.0)) fail("data.noise must be >= 0");
  if (!(c.grid_h > 0.0)) fail("grid.h must be > 0");
  if (static_cast<int>(c.grid_lo.size()) != dim || static_cast<int>(c.grid_hi.size()) != dim)
    fail("grid.lo and grid.hi need " + std::to_string(dim) + " coordinates");
  if (c.seeds < 1) fail("sweep.seeds must be >= 1");
  for (auto k : c.indicators) {
    if (indicator_dimension(k) != dim) fail(std::string("indicator ") + to_string(k) + " does not match " + c.problem);
    if (indicator_needs_em(k) != c.is_em())
      throw Error(ErrorKind::dimension_mismatch,
                  std::string("indicator ") + to_string(k) + " does not apply to " + c.problem + " data");
  }
  try {
    (void)c.physics();
  } catch (const Error& e) {
    fail(e.what());
  }
  if (dim == 2) {
    (void)source_2d(c.source);
  } else {
    (void)source_3d(c.source);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Named sources

/// Builtin 2D sources: example_one, example_two, zero, constant_disk, bump,
/// gradient_bump, curl_bump.
inline SourceSpec2 source_2d(const std::string& name) {
  if (name == "example_one") return sources::example_one();
  if (name == "example_two") return sources::example_two();
  if (name == "zero") {
    auto s = sources::constant_on(SupportShape<2>::disk(Vec2::Zero(), 1.0), CVec2(CVec2::Zero()));
    s.label = "zero";
    return s;
  }
  if (name == "constant_disk")
    return sources::constant_on(SupportShape<2>::disk(Vec2::Zero(), 1.0), CVec2(complex(1.0), complex(1.0)));
  if (name == "bump") return sources::bump_source<2>(Vec2(0.2, -0.1), 1.0, Vec2(1.0, 0.5));
  if (name == "gradient_bump") return sources::gradient_bump<2>(Vec2(0.2, -0.1), 1.0);
  if (name == "curl_bump") return sources::curl_bump<2>(Vec2(0.2, -0.1), 1.0);
  throw Error(ErrorKind::config, "unknown 2D source '" + name + "'");
}

/// Builtin 3D sources: example_three, example_four, zero, constant_ball,
/// bump, gradient_bump, curl_bump.
inline SourceSpec3 source_3d(const std::string& name) {
  if (name == "example_three") return sources::example_three();
  if (name == "example_four") return sources::example_four();
  if (name == "zero") {
    auto s = sources::constant_on(SupportShape<3>::ball(Vec3::Zero(), 0.5), CVec3(CVec3::Zero()));
    s.label = "zero";
    return s;
  }
  if (name == "constant_ball")
    return sources::constant_on(SupportShape<3>::ball(Vec3::Zero(), 0.5), CVec3(complex(1.0), complex(1.0), complex(1.0)));
  if (name == "bump") return sources::bump_source<3>(Vec3(0.1, -0.1, 0.05), 0.6, Vec3(1.0, 0.5, -0.5));
  if (name == "gradient_bump") return sources::gradient_bump<3>(Vec3(0.1, -0.1, 0.05), 0.6);
  if (name == "curl_bump") return sources::curl_bump<3>(Vec3(0.1, -0.1, 0.05), 0.6, Vec3(0.3, 0.4, 1.0).normalized());
  throw Error(ErrorKind::config, "unknown 3D source '" + name + "'");
}

}  // namespace qsm
