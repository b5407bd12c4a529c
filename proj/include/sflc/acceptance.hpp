#pragma once

// The acceptance criteria, shared by `sflc verify` and the acceptance test
// binary. Each criterion builds its own scenarios so they can run in parallel.

#include "sflc/live_session.hpp"
#include "sflc/metrics.hpp"
#include "sflc/scenario_config.hpp"
#include "sflc/simulation.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <future>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace sflc::acceptance {

struct VerifyOptions {
  GainSet gains = mecanum::reference_gains();  // may be unstable on purpose
  double dt = 1e-3;
  std::filesystem::path scenario_dir;  // holds sim1_circle.json and sim2_line.json
  bool parallel = true;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

inline bool log_finite(const SimLog& log) {
  for (const auto& r : log.rows) {
    if (!r.state.finite() || !r.u_applied.finite() || !std::isfinite(r.det_a) || !std::isfinite(r.energy) ||
        !r.e1.allFinite() || !std::isfinite(r.e2) || !std::isfinite(r.e3))
      return false;
  }
  return true;
}

inline Scenario circle_run(const VerifyOptions& o, SwitchSchedule schedule, double duration,
                           mecanum::ExtendedState s0 = {0.0, -4.0, 0.0, 0.5, 0.0}) {
  Scenario sc;
  sc.controller = UnifiedControllerSpec{o.gains};
  sc.reference = circle_reference(8.0, 0.15);
  sc.schedule = std::move(schedule);
  sc.s0 = s0;
  sc.dt = o.dt;
  sc.duration = duration;
  return sc;
}

inline SwitchSchedule four_switch_wave() {
  using S = SwitchSignal;
  return SwitchSchedule({{0.0, S::energy_saving()},
                         {10.0, S::dexterous()},
                         {14.0, S::energy_saving()},
                         {24.0, S::dexterous()},
                         {28.0, S::energy_saving()}});
}

}  // namespace detail

/// Determinant of the switched matrix against the convex form and the closed form.
inline CriterionResult determinant_identity(const VerifyOptions&) {
  CriterionResult r{1, "determinant identity", false, {}, 0.0};
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> pos(-10.0, 10.0), ang(-std::numbers::pi, std::numbers::pi),
      vel(-3.0, 3.0);
  double worst_convex = 0.0, worst_closed = 0.0;
  const int samples = 10000;
  for (int i = 0; i < samples; ++i) {
    const mecanum::ExtendedState s{pos(rng), pos(rng), ang(rng), vel(rng), vel(rng)};
    const auto blocks = mecanum::interaction_blocks(s);
    Matrix full(3, 3), bar(3, 3);
    full << blocks.a11, blocks.a12, blocks.a21, blocks.a22;
    bar << blocks.a11, blocks.a12, blocks.abar21, blocks.abar22;
    const double det_full = full.determinant();
    const double det_bar = bar.determinant();
    for (const SwitchSignal sigma : {SwitchSignal::energy_saving(), SwitchSignal::dexterous()}) {
      const double det_switched = compose_interaction_matrix(blocks, sigma).determinant();
      const double w = sigma.value();
      worst_convex = std::max(worst_convex, std::abs(det_switched - (w * det_full + (1.0 - w) * det_bar)));
      worst_closed = std::max(worst_closed, std::abs(det_switched - mecanum::det_sigma(s, sigma)));
    }
  }
  r.pass = worst_convex < 1e-10 && worst_closed < 1e-12;
  r.detail = std::to_string(samples) + " states x 2 modes; max convex residual " + detail::fmt(worst_convex) +
             " (<1e-10), max closed-form residual " + detail::fmt(worst_closed) + " (<1e-12)";
  return r;
}

/// 1e-6 at the default step; RK4 global error grows as dt^4 for coarser steps.
inline double sigma_independence_tolerance(double dt) { return 1e-6 * std::max(1.0, std::pow(dt / 1e-3, 4)); }

/// The main-task error must not depend on the switching signal.
inline CriterionResult sigma_independence(const VerifyOptions& o) {
  CriterionResult r{2, "sigma-independence of main task", false, {}, 0.0};
  try {
    const SimLog a = run_scenario(detail::circle_run(o, SwitchSchedule::constant(SwitchSignal::dexterous()), 40.0));
    const SimLog b = run_scenario(detail::circle_run(o, detail::four_switch_wave(), 40.0));
    double sup = 0.0;
    for (std::size_t i = 0; i < a.rows.size(); ++i) sup = std::max(sup, (a.rows[i].e1 - b.rows[i].e1).lpNorm<Eigen::Infinity>());
    const double tol = sigma_independence_tolerance(o.dt);
    r.pass = sup < tol;
    r.detail = "sup |e1(sigma=1) - e1(square wave)| = " + detail::fmt(sup) + " (<" + detail::fmt(tol) + ")";
  } catch (const std::exception& e) {
    r.detail = std::string("run failed: ") + e.what();
  }
  return r;
}

/// Decay rates of the three error channels, plus the pointwise first-order oracle.
inline CriterionResult exponential_rates(const VerifyOptions& o) {
  CriterionResult r{3, "exponential decay rates", false, {}, 0.0};
  try {
    const SimLog dex = run_scenario(detail::circle_run(o, SwitchSchedule::constant(SwitchSignal::dexterous()), 40.0));
    const SimLog eco = run_scenario(
        detail::circle_run(o, SwitchSchedule::constant(SwitchSignal::energy_saving()), 20.0, {0.0, -4.0, 0.0, 0.5, 1.0}));

    auto rate = [](const SimLog& log, ErrorChannel c, double a, double b) -> std::optional<double> {
      try {
        return decay_rate_estimate(log, c, a, b);
      } catch (const std::exception&) {
        return std::nullopt;
      }
    };
    const auto r2 = rate(dex, ErrorChannel::E2, 2.0, 20.0);
    const auto r3 = rate(eco, ErrorChannel::E3, 1.0, 15.0);
    const auto r1 = rate(dex, ErrorChannel::E1, 2.0, 40.0);
    auto within = [](const std::optional<double>& v, double target, double rel) {
      return v && std::abs(*v - target) <= rel * std::abs(target);
    };

    double oracle2 = 0.0, oracle3 = 0.0;
    const double e2_0 = dex.rows.front().e2, e3_0 = eco.rows.front().e3;
    for (const auto& row : dex.rows) oracle2 = std::max(oracle2, std::abs(row.e2 - e2_0 * std::exp(-0.75 * row.t)));
    for (const auto& row : eco.rows) oracle3 = std::max(oracle3, std::abs(row.e3 - e3_0 * std::exp(-0.65 * row.t)));

    r.pass = within(r2, -0.75, 0.02) && within(r3, -0.65, 0.02) && within(r1, -0.5, 0.05) && oracle2 < 1e-6 &&
             oracle3 < 1e-6;
    auto show = [](const std::optional<double>& v) { return v ? detail::fmt(*v) : std::string("n/a"); };
    r.detail = "e2 rate " + show(r2) + " (-0.75+-2%), e3 rate " + show(r3) + " (-0.65+-2%), |e1| rate " + show(r1) +
               " (-0.5+-5%); max |e2 - e2(0)exp(-0.75t)| " + detail::fmt(oracle2) +
               ", max |e3 - e3(0)exp(-0.65t)| " + detail::fmt(oracle3) + " (<1e-6)";
  } catch (const std::exception& e) {
    r.detail = std::string("run failed: ") + e.what();
  }
  return r;
}

/// Scenario for the continuity comparison: lateral speed near 0.4 m/s when
/// the switch to energy-saving mode happens at t = 10.
inline Scenario continuity_scenario(ControllerSpec controller, double dt) {
  Scenario sc;
  sc.controller = std::move(controller);
  sc.reference = circle_reference(8.0, 0.15, std::asin(1.0 / 3.0));
  sc.schedule = SwitchSchedule({{0.0, SwitchSignal::dexterous()}, {10.0, SwitchSignal::energy_saving()}});
  sc.dt = dt;
  sc.duration = 20.0;
  return sc;
}

inline CriterionResult continuity_vs_naive(const VerifyOptions& o) {
  CriterionResult r{4, "continuity vs naive pair", false, {}, 0.0};
  try {
    const SimLog unified = run_scenario(continuity_scenario(UnifiedControllerSpec{o.gains}, o.dt));
    const SimLog naive = run_scenario(continuity_scenario(NaivePairSpec{}, o.dt));
    const ScenarioMetrics mu = compute_metrics(unified), mn = compute_metrics(naive);
    const std::size_t k_switch = static_cast<std::size_t>(std::llround(10.0 / o.dt));
    const double v2_at_switch = unified.rows[k_switch].state.v2;
    const double bound = 10.0 * o.dt * mu.max_abs_u2;
    r.pass = mu.max_step_dv2 < bound && mn.max_switch_dv2 >= 0.39;
    r.detail = "unified v2(10) = " + detail::fmt(v2_at_switch) + ", max |dv2| " + detail::fmt(mu.max_step_dv2) +
               " (< " + detail::fmt(bound) + "); naive jump at switch " + detail::fmt(mn.max_switch_dv2) + " (>=0.39)";
  } catch (const std::exception& e) {
    r.detail = std::string("run failed: ") + e.what();
  }
  return r;
}

/// Session whose forward speed is exactly zero on a straight reference.
inline live::SessionConfig zero_speed_session(const VerifyOptions& o) {
  live::SessionConfig cfg;
  cfg.controller = UnifiedControllerSpec{o.gains};
  cfg.reference.type = "line";
  cfg.s0 = {5.0, 5.0, 3.0 * std::numbers::pi / 4.0, 0.0, -0.25 * std::numbers::sqrt2};
  cfg.dt = o.dt;
  return cfg;
}

inline CriterionResult singularity_guard(const VerifyOptions& o) {
  CriterionResult r{5, "singularity guard", false, {}, 0.0};
  std::vector<std::string> notes;
  bool ok = true;

  // batch: energy-saving mode from a standing start
  {
    Scenario sc = detail::circle_run(o, SwitchSchedule::constant(SwitchSignal::energy_saving()), 1.0,
                                     {0.0, -4.0, 0.0, 0.0, 0.0});
    try {
      (void)run_scenario(sc);
      ok = false;
      notes.push_back("batch start: no exception");
    } catch (const SingularInteractionMatrix& e) {
      const bool at_start = e.time() && *e.time() == 0.0;
      ok = ok && at_start;
      notes.push_back(std::string("batch start: raised at t=") + (e.time() ? detail::fmt(*e.time()) : "?"));
    }
  }
  // batch: switch mid-run while v1 stays at zero
  {
    const auto cfg = zero_speed_session(o);
    Scenario sc;
    sc.controller = cfg.controller;
    sc.reference = line_reference();
    sc.schedule = SwitchSchedule({{0.0, SwitchSignal::dexterous()}, {2.0, SwitchSignal::energy_saving()}});
    sc.s0 = cfg.s0;
    sc.dt = o.dt;
    sc.duration = 4.0;
    try {
      (void)run_scenario(sc);
      ok = false;
      notes.push_back("batch mid-run: no exception");
    } catch (const SingularInteractionMatrix& e) {
      const bool at_switch = e.time() && std::abs(*e.time() - 2.0) < 0.5 * o.dt;
      ok = ok && at_switch;
      notes.push_back(std::string("batch mid-run: raised at t=") + (e.time() ? detail::fmt(*e.time()) : "?"));
    }
  }
  // live: the transition is refused, the session pauses, replay reproduces it
  {
    live::LiveSession session(zero_speed_session(o));
    (void)session.step(1.0);
    session.enqueue(live::OperatorCommand::set_sigma(SwitchSignal::energy_saving()));
    const auto out = session.step(0.5);
    const bool refused = !out.notices.empty() && !out.notices.front().accepted;
    const bool paused = session.run_state() == live::RunState::SingularPaused && session.sigma().is_dexterous();
    const SimLog live_log = session.log_snapshot();

    live::LiveSession replay(zero_speed_session(o));
    for (const auto& c : session.command_log()) {
      const double lead = static_cast<double>(c.step) * o.dt - replay.time();
      (void)replay.step(lead);
      replay.enqueue(c.command);
    }
    (void)replay.step(0.5);
    const bool replay_same = replay.run_state() == session.run_state() &&
                             replay.command_log().size() == session.command_log().size() &&
                             !replay.command_log().front().accepted && replay.log_snapshot() == live_log;
    const bool finite = detail::log_finite(live_log) && detail::log_finite(replay.log_snapshot());
    ok = ok && refused && paused && replay_same && finite;
    notes.push_back(std::string("live: ") + (refused ? "refused" : "ACCEPTED") + ", " +
                    live::to_string(session.run_state()) + ", replay " + (replay_same ? "identical" : "DIFFERS") +
                    ", log " + (finite ? "finite" : "HAS NaN"));
  }
  r.pass = ok;
  for (std::size_t i = 0; i < notes.size(); ++i) r.detail += (i ? "; " : "") + notes[i];
  return r;
}

/// In energy-saving mode the body heading follows the velocity direction.
inline CriterionResult unicycle_heading(const VerifyOptions& o) {
  CriterionResult r{6, "unicycle heading in energy-saving mode", false, {}, 0.0};
  try {
    const SimLog log = run_scenario(
        detail::circle_run(o, SwitchSchedule::constant(SwitchSignal::energy_saving()), 40.0, {0.0, -4.0, 0.0, 0.5, 0.5}));
    std::size_t eligible = 0, late = 0;
    double worst = 0.0;
    for (const auto& row : log.rows) {
      if (row.t < 10.0) continue;
      ++late;
      if (!(row.e1.norm() < 1e-3)) continue;
      ++eligible;
      const Eigen::Vector2d p = mecanum::world_velocity(row.state);
      worst = std::max(worst, std::abs(mecanum::wrap_angle(row.state.theta - std::atan2(p.y(), p.x()))));
    }
    r.pass = eligible * 2 >= late && worst < 1e-3;
    r.detail = "max |theta - atan2(ydot, xdot)| " + detail::fmt(worst) + " rad (<1e-3) over " +
               std::to_string(eligible) + " of " + std::to_string(late) + " post-transient rows with |e1| < 1e-3";
  } catch (const std::exception& e) {
    r.detail = std::string("run failed: ") + e.what();
  }
  return r;
}

inline CriterionResult scenario_regressions(const VerifyOptions& o) {
  CriterionResult r{7, "bundled scenario regressions", false, {}, 0.0};
  bool ok = true;
  for (const char* name : {"sim1_circle", "sim2_line"}) {
    try {
      config::ScenarioConfig cfg = config::load((o.scenario_dir / (std::string(name) + ".json")).string());
      cfg.dt = o.dt;
      Scenario noisy = config::to_scenario(cfg, false);
      if (const auto* u = std::get_if<UnifiedControllerSpec>(&noisy.controller)) {
        noisy.controller = UnifiedControllerSpec{o.gains, u->singularity_tol};
      }
      Scenario clean = noisy;
      clean.noise.reset();
      const ScenarioMetrics mc = compute_metrics(run_scenario(clean));
      const ScenarioMetrics mn = compute_metrics(run_scenario(noisy));
      const bool pass = mc.terminal_e1 < 1e-3 && noisy.noise && mn.rms_e1 < 0.2;
      ok = ok && pass;
      r.detail += std::string(r.detail.empty() ? "" : "; ") + name + ": terminal |e1| " + detail::fmt(mc.terminal_e1) +
                  " (<1e-3), noisy RMS |e1| " + detail::fmt(mn.rms_e1) + " (<0.2), after 10 s " +
                  detail::fmt(mn.rms_e1_after_transient);
    } catch (const std::exception& e) {
      ok = false;
      r.detail += std::string(r.detail.empty() ? "" : "; ") + name + ": " + e.what();
    }
  }
  r.pass = ok;
  return r;
}

/// Error ratio of successive dt halvings on a smooth run.
inline CriterionResult rk4_convergence(const VerifyOptions& o) {
  CriterionResult r{8, "RK4 convergence order", false, {}, 0.0};
  try {
    auto final_state = [&](double dt) {
      Scenario sc = detail::circle_run(o, SwitchSchedule::constant(SwitchSignal::dexterous()), 10.0);
      sc.dt = dt;
      return run_scenario(sc).rows.back().state.to_array();
    };
    const double h = 0.04;
    const mecanum::ExtendedState::Array a = final_state(h), b = final_state(h / 2), c = final_state(h / 4);
    const double ratio = (a - b).norm() / (b - c).norm();
    r.pass = ratio >= 12.0 && ratio <= 20.0;
    r.detail = "error ratio " + detail::fmt(ratio) + " for dt " + detail::fmt(h) + " -> " + detail::fmt(h / 2) +
               " -> " + detail::fmt(h / 4) + " (in [12, 20])";
  } catch (const std::exception& e) {
    r.detail = std::string("run failed: ") + e.what();
  }
  return r;
}

inline std::vector<CriterionResult> run_all(const VerifyOptions& o) {
  using Fn = CriterionResult (*)(const VerifyOptions&);
  const std::vector<Fn> fns = {determinant_identity, sigma_independence, exponential_rates, continuity_vs_naive,
                               singularity_guard,    unicycle_heading,   scenario_regressions, rk4_convergence};
  auto timed = [&o](Fn f) {
    const auto t0 = std::chrono::steady_clock::now();
    CriterionResult r = f(o);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double budget = r.id == 1 ? 1.0 : r.id == 2 ? 10.0 : 0.0;
    if (budget > 0.0 && r.seconds >= budget) {
      r.pass = false;
      r.detail += "; over the " + detail::fmt(budget) + " s runtime budget";
    }
    return r;
  };
  std::vector<CriterionResult> out;
  if (o.parallel) {
    std::vector<std::future<CriterionResult>> jobs;
    for (Fn f : fns) jobs.push_back(std::async(std::launch::async, timed, f));
    for (auto& j : jobs) out.push_back(j.get());
  } else {
    for (Fn f : fns) out.push_back(timed(f));
  }
  return out;
}

inline bool all_pass(const std::vector<CriterionResult>& rs) {
  return std::all_of(rs.begin(), rs.end(), [](const CriterionResult& r) { return r.pass; });
}

inline std::string format_line(const CriterionResult& r) {
  std::ostringstream os;
  os << (r.pass ? "PASS" : "FAIL") << "  [" << r.id << "] " << r.name << " (" << detail::fmt(r.seconds) << " s): "
     << r.detail;
  return os.str();
}

}  // namespace sflc::acceptance
