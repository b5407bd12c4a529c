#pragma once

#include "sflc/simulation.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>

namespace sflc {

struct ScenarioMetrics {
  std::size_t steps = 0;
  double duration = 0.0;
  double terminal_e1 = 0.0;
  double terminal_e2 = 0.0;
  double terminal_e3 = 0.0;
  std::optional<double> rate_e1;
  std::optional<double> rate_e2;
  std::optional<double> rate_e3;
  double rms_e1 = 0.0;
  double rms_e1_after_transient = 0.0;
  double total_energy = 0.0;
  double max_step_dv2 = 0.0;
  double max_switch_dv2 = 0.0;
  double max_abs_u2 = 0.0;
  double min_abs_det = 0.0;
  int switch_count = 0;
};

inline constexpr double kTransientSeconds = 10.0;

/// Longest run of rows with the given sigma, as (t_begin, t_end).
inline std::optional<std::pair<double, double>> longest_interval(const SimLog& log, SwitchSignal sigma) {
  std::optional<std::pair<double, double>> best;
  std::optional<double> start;
  for (std::size_t i = 0; i < log.rows.size(); ++i) {
    const auto& r = log.rows[i];
    if (r.sigma == sigma && !start) start = r.t;
    const bool closes = start && (r.sigma != sigma || i + 1 == log.rows.size());
    if (closes) {
      const double end = r.sigma == sigma ? r.t : log.rows[i - 1].t;
      if (!best || end - *start > best->second - best->first) best = std::make_pair(*start, end);
      start.reset();
    }
  }
  return best;
}

inline std::optional<double> try_rate(const SimLog& log, ErrorChannel c, double a, double b) {
  if (!(b > a)) return std::nullopt;
  try {
    return decay_rate_estimate(log, c, a, b);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

inline ScenarioMetrics compute_metrics(const SimLog& log) {
  ScenarioMetrics m;
  if (log.rows.empty()) return m;
  const auto& last = log.rows.back();
  m.steps = log.steps();
  m.duration = last.t;
  m.terminal_e1 = last.e1.norm();
  m.terminal_e2 = last.e2;
  m.terminal_e3 = last.e3;
  m.total_energy = last.energy;
  m.min_abs_det = std::numeric_limits<double>::infinity();

  double sq = 0.0, sq_late = 0.0;
  std::size_t late = 0;
  for (std::size_t i = 0; i < log.rows.size(); ++i) {
    const auto& r = log.rows[i];
    sq += r.e1.squaredNorm();
    if (r.t >= kTransientSeconds) {
      sq_late += r.e1.squaredNorm();
      ++late;
    }
    m.max_abs_u2 = std::max(m.max_abs_u2, std::abs(r.u_applied.u2));
    m.min_abs_det = std::min(m.min_abs_det, std::abs(r.det_a));
    if (i > 0) {
      const double dv2 = std::abs(r.state.v2 - log.rows[i - 1].state.v2);
      m.max_step_dv2 = std::max(m.max_step_dv2, dv2);
      if (r.sigma != log.rows[i - 1].sigma) {
        ++m.switch_count;
        m.max_switch_dv2 = std::max(m.max_switch_dv2, dv2);
      }
    }
  }
  m.rms_e1 = std::sqrt(sq / static_cast<double>(log.rows.size()));
  m.rms_e1_after_transient = late ? std::sqrt(sq_late / static_cast<double>(late)) : 0.0;

  m.rate_e1 = try_rate(log, ErrorChannel::E1, std::min(2.0, m.duration / 4), std::min(m.duration, 30.0));
  if (auto w = longest_interval(log, SwitchSignal::dexterous())) {
    m.rate_e2 = try_rate(log, ErrorChannel::E2, w->first + 0.5, w->second);
  }
  if (auto w = longest_interval(log, SwitchSignal::energy_saving())) {
    m.rate_e3 = try_rate(log, ErrorChannel::E3, w->first + 0.5, w->second);
  }
  return m;
}

inline nlohmann::json to_json(const ScenarioMetrics& m) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {
      {"steps", m.steps},
      {"duration", m.duration},
      {"terminal_error", {{"e1_norm", m.terminal_e1}, {"e2", m.terminal_e2}, {"e3", m.terminal_e3}}},
      {"decay_rate", {{"e1", opt(m.rate_e1)}, {"e2", opt(m.rate_e2)}, {"e3", opt(m.rate_e3)}}},
      {"rms_e1", m.rms_e1},
      {"rms_e1_after_transient", m.rms_e1_after_transient},
      {"total_energy", m.total_energy},
      {"max_step_dv2", m.max_step_dv2},
      {"max_switch_dv2", m.max_switch_dv2},
      {"max_abs_u2", m.max_abs_u2},
      {"min_abs_det", m.min_abs_det},
      {"switch_count", m.switch_count},
  };
}

}  // namespace sflc
