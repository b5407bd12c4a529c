#pragma once

// JSON scenario documents. Every field is optional; defaults describe the
// circular-trajectory run. See docs/config.md for the schema.

#include "sflc/simulation.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sflc::config {

using nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ControllerKind { Unified, NaivePair };

struct ReferenceConfig {
  std::string type = "circle";  // circle | line | polynomial
  double r = 8.0;
  double omega = 0.15;
  double heading_offset = std::numbers::pi / 2;
  std::vector<double> x, y, theta;  // polynomial coefficients, increasing powers
  friend bool operator==(const ReferenceConfig&, const ReferenceConfig&) = default;
};

struct NoiseConfig {
  bool enabled = false;
  double k = 0.1;
  double q = 0.4;
  std::uint64_t seed = 42;
  friend bool operator==(const NoiseConfig&, const NoiseConfig&) = default;
};

struct ScheduleEntry {
  double t = 0.0;
  int sigma = 1;
  friend bool operator==(const ScheduleEntry&, const ScheduleEntry&) = default;
};

using MatrixRows = std::vector<std::vector<double>>;

struct ScenarioConfig {
  std::string name = "scenario";
  std::string plant = "mecanum";
  ControllerKind controller = ControllerKind::Unified;
  ReferenceConfig reference;
  std::array<std::vector<MatrixRows>, 3> gains = {
      std::vector<MatrixRows>{{{1.0, 0.0}, {0.0, 1.0}}, {{1.0, 0.0}, {0.0, 1.0}}},
      std::vector<MatrixRows>{{{0.75}}},
      std::vector<MatrixRows>{{{0.65}}},
  };
  baseline::BaselineGains baseline_gains;
  double singularity_tol = kDefaultSingularityTol;
  std::vector<ScheduleEntry> schedule = {{0.0, 0}, {8.0, 1}, {12.0, 0}, {29.0, 1}, {33.0, 0}};
  NoiseConfig noise;
  mecanum::ExtendedState s0{0.0, -4.0, 0.0, 0.5, 0.0};
  double dt = 1e-3;
  double duration = 42.0;
  std::string output = "out";

  friend bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) {
    auto bg = [](const baseline::BaselineGains& g) { return std::tie(g.kp1, g.kp2, g.kp3, g.kd1, g.kd2); };
    return a.name == b.name && a.plant == b.plant && a.controller == b.controller && a.reference == b.reference &&
           a.gains == b.gains && bg(a.baseline_gains) == bg(b.baseline_gains) &&
           a.singularity_tol == b.singularity_tol && a.schedule == b.schedule && a.noise == b.noise && a.s0 == b.s0 &&
           a.dt == b.dt && a.duration == b.duration && a.output == b.output;
  }
};

namespace detail {

inline void reject_unknown(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, _] : j.items()) {
    if (!allowed.contains(k)) throw ConfigError((path.empty() ? k : path + "." + k) + ": unknown field");
  }
}

template <typename T>
void read(const json& j, const char* key, const std::string& path, T& out) {
  if (!j.contains(key)) return;
  const std::string field = path.empty() ? key : path + "." + key;
  try {
    const json& v = j.at(key);
    if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(field + ": expected a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(field + ": expected true or false");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(field + ": expected an integer");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(field + ": expected a string");
    }
    out = v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(field + ": " + e.what());
  }
}

inline MatrixRows read_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path + ": expected a non-empty array of rows");
  MatrixRows m;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& row = j[i];
    if (!row.is_array() || row.size() != j.size()) throw ConfigError(path + ": expected a square matrix");
    std::vector<double> r;
    for (const auto& v : row) {
      if (!v.is_number()) throw ConfigError(path + "[" + std::to_string(i) + "]: expected numbers");
      r.push_back(v.get<double>());
    }
    m.push_back(std::move(r));
  }
  return m;
}

inline Matrix to_matrix(const MatrixRows& rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < rows[i].size(); ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  return m;
}

/// Byte offset to "line L, column C" for parse diagnostics.
inline std::string locate(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

inline constexpr const char* kBlockKeys[3] = {"main", "auxiliary", "energy_intense"};

inline ScenarioConfig from_json(const json& j) {
  using detail::read;
  detail::reject_unknown(j, "", {"name", "plant", "controller", "reference", "gains", "baseline_gains",
                                 "singularity_tol", "schedule", "noise", "s0", "dt", "duration", "output"});
  ScenarioConfig c;
  read(j, "name", "", c.name);
  read(j, "plant", "", c.plant);
  if (j.contains("controller")) {
    std::string kind;
    read(j, "controller", "", kind);
    if (kind == "unified") c.controller = ControllerKind::Unified;
    else if (kind == "naive-pair") c.controller = ControllerKind::NaivePair;
    else throw ConfigError("controller: expected \"unified\" or \"naive-pair\", got \"" + kind + "\"");
  }
  if (j.contains("reference")) {
    const json& r = j["reference"];
    detail::reject_unknown(r, "reference", {"type", "r", "omega", "heading_offset", "x", "y", "theta"});
    read(r, "type", "reference", c.reference.type);
    read(r, "r", "reference", c.reference.r);
    read(r, "omega", "reference", c.reference.omega);
    read(r, "heading_offset", "reference", c.reference.heading_offset);
    read(r, "x", "reference", c.reference.x);
    read(r, "y", "reference", c.reference.y);
    read(r, "theta", "reference", c.reference.theta);
  }
  if (j.contains("gains")) {
    const json& g = j["gains"];
    detail::reject_unknown(g, "gains", {"main", "auxiliary", "energy_intense"});
    for (std::size_t b = 0; b < 3; ++b) {
      if (!g.contains(kBlockKeys[b])) continue;
      const json& list = g[kBlockKeys[b]];
      const std::string path = std::string("gains.") + kBlockKeys[b];
      if (!list.is_array() || list.empty()) throw ConfigError(path + ": expected a non-empty list of matrices");
      c.gains[b].clear();
      for (std::size_t i = 0; i < list.size(); ++i) {
        c.gains[b].push_back(detail::read_matrix(list[i], path + "[" + std::to_string(i) + "]"));
      }
    }
  }
  if (j.contains("baseline_gains")) {
    const json& g = j["baseline_gains"];
    detail::reject_unknown(g, "baseline_gains", {"kp", "kd"});
    std::vector<double> kp{c.baseline_gains.kp1, c.baseline_gains.kp2, c.baseline_gains.kp3};
    std::vector<double> kd{c.baseline_gains.kd1, c.baseline_gains.kd2};
    read(g, "kp", "baseline_gains", kp);
    read(g, "kd", "baseline_gains", kd);
    if (kp.size() != 3) throw ConfigError("baseline_gains.kp: expected 3 values");
    if (kd.size() != 2) throw ConfigError("baseline_gains.kd: expected 2 values");
    c.baseline_gains = {kp[0], kp[1], kp[2], kd[0], kd[1]};
  }
  read(j, "singularity_tol", "", c.singularity_tol);
  if (j.contains("schedule")) {
    const json& s = j["schedule"];
    if (!s.is_array() || s.empty()) throw ConfigError("schedule: expected a non-empty array");
    c.schedule.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::string path = "schedule[" + std::to_string(i) + "]";
      detail::reject_unknown(s[i], path, {"t", "sigma"});
      if (!s[i].contains("t") || !s[i].contains("sigma")) throw ConfigError(path + ": needs both t and sigma");
      ScheduleEntry e;
      read(s[i], "t", path, e.t);
      read(s[i], "sigma", path, e.sigma);
      c.schedule.push_back(e);
    }
  }
  if (j.contains("noise")) {
    const json& n = j["noise"];
    detail::reject_unknown(n, "noise", {"enabled", "k", "q", "seed"});
    read(n, "enabled", "noise", c.noise.enabled);
    read(n, "k", "noise", c.noise.k);
    read(n, "q", "noise", c.noise.q);
    read(n, "seed", "noise", c.noise.seed);
  }
  if (j.contains("s0")) {
    const json& s = j["s0"];
    detail::reject_unknown(s, "s0", {"x", "y", "theta", "v1", "v2"});
    read(s, "x", "s0", c.s0.x);
    read(s, "y", "s0", c.s0.y);
    read(s, "theta", "s0", c.s0.theta);
    read(s, "v1", "s0", c.s0.v1);
    read(s, "v2", "s0", c.s0.v2);
  }
  read(j, "dt", "", c.dt);
  read(j, "duration", "", c.duration);
  read(j, "output", "", c.output);
  return c;
}

inline json to_json(const ScenarioConfig& c) {
  json gains = json::object();
  for (std::size_t b = 0; b < 3; ++b) gains[kBlockKeys[b]] = c.gains[b];
  json schedule = json::array();
  for (const auto& e : c.schedule) schedule.push_back({{"t", e.t}, {"sigma", e.sigma}});
  json ref = {{"type", c.reference.type}};
  if (c.reference.type == "circle") {
    ref["r"] = c.reference.r;
    ref["omega"] = c.reference.omega;
    ref["heading_offset"] = c.reference.heading_offset;
  } else if (c.reference.type == "polynomial") {
    ref["x"] = c.reference.x;
    ref["y"] = c.reference.y;
    ref["theta"] = c.reference.theta;
  }
  const auto& bg = c.baseline_gains;
  return {
      {"name", c.name},
      {"plant", c.plant},
      {"controller", c.controller == ControllerKind::Unified ? "unified" : "naive-pair"},
      {"reference", ref},
      {"gains", gains},
      {"baseline_gains", {{"kp", {bg.kp1, bg.kp2, bg.kp3}}, {"kd", {bg.kd1, bg.kd2}}}},
      {"singularity_tol", c.singularity_tol},
      {"schedule", schedule},
      {"noise", {{"enabled", c.noise.enabled}, {"k", c.noise.k}, {"q", c.noise.q}, {"seed", c.noise.seed}}},
      {"s0", {{"x", c.s0.x}, {"y", c.s0.y}, {"theta", c.s0.theta}, {"v1", c.s0.v1}, {"v2", c.s0.v2}}},
      {"dt", c.dt},
      {"duration", c.duration},
      {"output", c.output},
  };
}

inline ScenarioConfig parse(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("parse error at " + detail::locate(text, e.byte > 0 ? e.byte - 1 : 0) + ": " + e.what());
  }
  return from_json(j);
}

inline ScenarioConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline std::string serialize(const ScenarioConfig& c) { return to_json(c).dump(2) + "\n"; }

inline GainSet build_gains(const ScenarioConfig& c, bool checked = true) {
  std::array<GainSet::BlockGains, 3> blocks;
  for (std::size_t b = 0; b < 3; ++b)
    for (const auto& m : c.gains[b]) blocks[b].push_back(detail::to_matrix(m));
  return checked ? GainSet::make(std::move(blocks)) : GainSet::unchecked(std::move(blocks));
}

inline ReferenceTrajectory build_reference(const ReferenceConfig& r) {
  if (r.type == "circle") return circle_reference(r.r, r.omega, r.heading_offset);
  if (r.type == "line") return line_reference();
  if (r.type == "polynomial") return polynomial_reference(r.x, r.y, r.theta);
  throw ConfigError("reference.type: expected circle, line or polynomial, got \"" + r.type + "\"");
}

inline SwitchSchedule build_schedule(const ScenarioConfig& c) {
  std::vector<SwitchSchedule::Breakpoint> bp;
  for (std::size_t i = 0; i < c.schedule.size(); ++i) {
    try {
      bp.push_back({c.schedule[i].t, SwitchSignal::from_int(c.schedule[i].sigma)});
    } catch (const std::invalid_argument& e) {
      throw ConfigError("schedule[" + std::to_string(i) + "].sigma: " + e.what());
    }
  }
  return SwitchSchedule(std::move(bp));
}

/// Builds the runnable scenario and checks every run_scenario precondition,
/// including the singularity guard at s0. Throws ConfigError with the field.
inline Scenario to_scenario(const ScenarioConfig& c, bool checked_gains = true) {
  auto wrap = [](const char* field, auto&& fn) {
    try {
      return fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(std::string(field) + ": " + e.what());
    }
  };
  if (!(c.dt > 0.0) || !std::isfinite(c.dt)) throw ConfigError("dt: must be positive");
  if (!(c.duration > 0.0) || !std::isfinite(c.duration)) throw ConfigError("duration: must be positive");
  if (c.plant != "mecanum") throw ConfigError("plant: only \"mecanum\" is supported, got \"" + c.plant + "\"");
  Scenario sc;
  sc.reference = wrap("reference", [&] { return build_reference(c.reference); });
  sc.schedule = wrap("schedule", [&] { return build_schedule(c); });
  if (c.controller == ControllerKind::Unified) {
    UnifiedControllerSpec u{wrap("gains", [&] { return build_gains(c, checked_gains); }), c.singularity_tol};
    wrap("gains", [&] {
      u.gains.check_against(mecanum::Plant::relative_degree());
      return 0;
    });
    sc.controller = std::move(u);
  } else {
    wrap("baseline_gains", [&] {
      c.baseline_gains.validate();
      return 0;
    });
    sc.controller = NaivePairSpec{c.baseline_gains, c.singularity_tol};
  }
  if (!(c.singularity_tol > 0.0)) throw ConfigError("singularity_tol: must be positive");
  if (c.noise.enabled) sc.noise = NoiseParams{c.noise.k, c.noise.q, c.noise.seed};
  sc.s0 = c.s0;
  sc.dt = c.dt;
  sc.duration = c.duration;
  wrap("scenario", [&] {
    sc.validate();
    return 0;
  });
  if (!sc.schedule.at(0.0).is_dexterous() && !(std::abs(c.s0.v1) > c.singularity_tol)) {
    throw ConfigError("s0.v1: must be nonzero when the schedule starts in energy-saving mode");
  }
  return sc;
}

}  // namespace sflc::config
