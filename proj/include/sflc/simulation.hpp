#pragma once

// Deterministic closed-loop simulation of the Mecanum vehicle.
//
// Each step holds sigma and the actuation noise constant over [t_k, t_k + dt]
// and integrates the closed loop with RK4, re-evaluating the control law at
// every stage. Row k of the log is the state at t_k = k dt together with the
// control evaluated there.

#include "sflc/baselines.hpp"
#include "sflc/integrator.hpp"
#include "sflc/mecanum.hpp"
#include "sflc/noise.hpp"
#include "sflc/reference.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace sflc {

class InvalidScenario : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ChannelUnderflow : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Right-continuous piecewise-constant sigma(t).
class SwitchSchedule {
 public:
  struct Breakpoint {
    double time = 0.0;
    SwitchSignal sigma;
    friend bool operator==(const Breakpoint&, const Breakpoint&) = default;
  };

  SwitchSchedule() : SwitchSchedule({{0.0, SwitchSignal::dexterous()}}) {}

  explicit SwitchSchedule(std::vector<Breakpoint> breakpoints) : bp_(std::move(breakpoints)) {
    if (bp_.empty() || bp_.front().time != 0.0) throw InvalidScenario("switch schedule must start at t=0");
    for (std::size_t i = 1; i < bp_.size(); ++i) {
      if (!(bp_[i].time > bp_[i - 1].time)) throw InvalidScenario("switch times must be strictly increasing");
    }
  }

  static SwitchSchedule constant(SwitchSignal sigma) { return SwitchSchedule({{0.0, sigma}}); }

  /// Alternates between two values every `period` seconds, starting with `first`.
  static SwitchSchedule square_wave(SwitchSignal first, double period, int switches) {
    std::vector<Breakpoint> bp{{0.0, first}};
    SwitchSignal cur = first;
    for (int i = 1; i <= switches; ++i) {
      cur = cur.is_dexterous() ? SwitchSignal::energy_saving() : SwitchSignal::dexterous();
      bp.push_back({i * period, cur});
    }
    return SwitchSchedule(std::move(bp));
  }

  SwitchSignal at(double t) const {
    SwitchSignal s = bp_.front().sigma;
    for (const auto& b : bp_) {
      if (b.time <= t) s = b.sigma;
      else break;
    }
    return s;
  }

  /// Value at grid step k, comparing on the integer grid to avoid round-off.
  SwitchSignal at_step(long long k, double dt) const {
    SwitchSignal s = bp_.front().sigma;
    for (const auto& b : bp_) {
      if (std::llround(b.time / dt) <= k) s = b.sigma;
      else break;
    }
    return s;
  }

  void check_grid(double dt) const {
    for (const auto& b : bp_) {
      const double steps = b.time / dt;
      if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps)) {
        throw InvalidScenario("switch time " + std::to_string(b.time) + " is not a multiple of dt");
      }
    }
  }

  bool contains(SwitchSignal s) const {
    for (const auto& b : bp_)
      if (b.sigma == s) return true;
    return false;
  }

  const std::vector<Breakpoint>& breakpoints() const { return bp_; }
  friend bool operator==(const SwitchSchedule&, const SwitchSchedule&) = default;

 private:
  std::vector<Breakpoint> bp_;
};

struct UnifiedControllerSpec {
  GainSet gains = mecanum::reference_gains();
  double singularity_tol = kDefaultSingularityTol;
};

/// Naive pair: the full-pose velocity tracker while sigma = 1 and the
/// extended unicycle tracker (v2 forced to zero) while sigma = 0.
struct NaivePairSpec {
  baseline::BaselineGains gains;
  double singularity_tol = kDefaultSingularityTol;
};

using ControllerSpec = std::variant<UnifiedControllerSpec, NaivePairSpec>;

struct NoiseParams {
  double k = 0.1;
  double q = 0.4;
  std::uint64_t seed = 1;
  friend bool operator==(const NoiseParams&, const NoiseParams&) = default;
};

struct ErrorState {
  Eigen::Vector2d e1 = Eigen::Vector2d::Zero();
  double e2 = 0.0;
  double e3 = 0.0;
};

inline ErrorState tracking_error(const mecanum::ExtendedState& s, const ReferenceSample& ref) {
  return {ref.position - Eigen::Vector2d(s.x, s.y), ref.heading - s.theta, -s.v2};
}

struct SimRecord {
  double t = 0.0;
  mecanum::ExtendedState state;
  mecanum::ControlInput u_nominal;  // control law output
  mecanum::ControlInput u_applied;  // after actuation noise
  SwitchSignal sigma;
  Eigen::Vector2d e1 = Eigen::Vector2d::Zero();
  double e2 = 0.0;
  double e3 = 0.0;
  Eigen::Vector3d noise = Eigen::Vector3d::Zero();
  double power = 0.0;
  double energy = 0.0;
  double det_a = 0.0;

  friend bool operator==(const SimRecord&, const SimRecord&) = default;
};

struct SimLog {
  double dt = 0.0;
  std::vector<SimRecord> rows;

  std::size_t steps() const { return rows.empty() ? 0 : rows.size() - 1; }
  friend bool operator==(const SimLog&, const SimLog&) = default;
};

struct Scenario {
  ControllerSpec controller = UnifiedControllerSpec{};
  ReferenceTrajectory reference = circle_reference(8.0, 0.15);
  SwitchSchedule schedule;
  std::optional<NoiseParams> noise;
  mecanum::ExtendedState s0{0.0, -4.0, 0.0, 0.5, 0.0};
  double dt = 1e-3;
  double duration = 40.0;

  long long step_count() const { return std::llround(duration / dt); }

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidScenario("dt must be positive");
    if (!(duration > 0.0) || !std::isfinite(duration)) throw InvalidScenario("duration must be positive");
    if (step_count() < 1) throw InvalidScenario("duration shorter than one step");
    if (!s0.finite()) throw InvalidScenario("initial state must be finite");
    schedule.check_grid(dt);
    if (noise) (void)NoiseState::make(noise->k, noise->q, noise->seed);
    if (const auto* n = std::get_if<NaivePairSpec>(&controller)) n->gains.validate();
  }
};

/// Advances the closed loop one grid step at a time. Shared by the batch
/// runner and the live session so both produce identical trajectories.
class ClosedLoopStepper {
 public:
  ClosedLoopStepper(const ControllerSpec& controller, ReferenceTrajectory reference,
                    const std::optional<NoiseParams>& noise, const mecanum::ExtendedState& s0, double dt)
      : spec_(controller), reference_(std::move(reference)), state_(s0), dt_(dt) {
    if (const auto* u = std::get_if<UnifiedControllerSpec>(&spec_)) {
      unified_.emplace(mecanum::Plant{}, u->gains, u->singularity_tol);
    }
    if (noise) noise_ = NoiseState::make(noise->k, noise->q, noise->seed);
    energy_.reset(mecanum::power(state_));
  }

  long long step_index() const { return k_; }
  double time() const { return static_cast<double>(k_) * dt_; }
  double dt() const { return dt_; }
  const mecanum::ExtendedState& state() const { return state_; }
  const ReferenceTrajectory& reference() const { return reference_; }
  Eigen::Vector3d noise() const { return noise_ ? noise_->n : Eigen::Vector3d::Zero(); }

  void set_reference(ReferenceTrajectory r) { reference_ = std::move(r); }

  /// Row for the current grid point under sigma. May adjust the algebraic
  /// velocities of the naive pair. Throws SingularInteractionMatrix.
  SimRecord record(SwitchSignal sigma) {
    const double t = time();
    const ReferenceSample ref = reference_(t);
    SimRecord r;
    r.t = t;
    r.sigma = sigma;
    r.noise = noise();

    if (unified_) {
      const auto eval = evaluate_unified(state_, ref, sigma, t);
      r.u_nominal = mecanum::ControlInput::from_array(eval.u);
      r.det_a = eval.det;
    } else if (sigma.is_dexterous()) {
      const auto cmd = naive_velocity(state_, ref);
      state_.v1 = cmd.v1 + r.noise[0];
      state_.v2 = cmd.v2 + r.noise[1];
      r.u_nominal = {0.0, 0.0, cmd.v3};
      r.det_a = 1.0;
    } else {
      state_.v2 = 0.0;
      const auto cmd = naive_extended(state_, ref, t);
      r.u_nominal = {cmd.v1_dot, 0.0, cmd.v3};
      r.det_a = state_.v1;
    }
    r.u_applied = apply_noise(r.u_nominal, sigma);
    r.state = state_;
    const ErrorState e = tracking_error(state_, ref);
    r.e1 = e.e1;
    r.e2 = e.e2;
    r.e3 = e.e3;
    r.power = mecanum::power(state_);
    if (k_ == 0) energy_.reset(r.power);
    r.energy = energy_.accumulated_energy();
    return r;
  }

  /// Integrates from t_k to t_{k+1} under sigma.
  void advance(SwitchSignal sigma) {
    const double t = time();
    const Eigen::Vector3d n = noise();
    const double p_before = mecanum::power(state_);
    mecanum::ExtendedState next;
    try {
      if (unified_) {
        next = mecanum::rk4_closed_loop_step(
            state_,
            [&](const mecanum::ExtendedState& xs, double tau) {
              const auto eval = evaluate_unified(xs, reference_(t + tau), sigma, t);
              return apply_noise(mecanum::ControlInput::from_array(eval.u), sigma, n);
            },
            dt_);
      } else if (sigma.is_dexterous()) {
        const auto f = [&](const mecanum::ExtendedState::Array& x, double tau) {
          mecanum::ExtendedState xs = mecanum::ExtendedState::from_array(x);
          const auto cmd = naive_velocity(xs, reference_(t + tau));
          xs.v1 = cmd.v1 + n[0];
          xs.v2 = cmd.v2 + n[1];
          const Eigen::Vector2d p = mecanum::world_velocity(xs);
          return (mecanum::ExtendedState::Array() << p.x(), p.y(), cmd.v3 + n[2], 0.0, 0.0).finished();
        };
        next = mecanum::ExtendedState::from_array(rk4(state_.to_array(), f, dt_));
        if (!next.finite()) throw NonFiniteState("naive step produced a non-finite state");
      } else {
        next = mecanum::rk4_closed_loop_step(
            state_,
            [&](const mecanum::ExtendedState& xs, double tau) {
              const auto cmd = naive_extended(xs, reference_(t + tau), t);
              return mecanum::ControlInput{cmd.v1_dot + n[0], 0.0, cmd.v3 + n[2]};
            },
            dt_);
      }
    } catch (const NonFiniteState&) {
      throw NonFiniteState("non-finite state at t=" + std::to_string(t));
    }
    state_ = next;
    if (noise_) *noise_ = noise_step(std::move(*noise_), dt_);
    energy_.advance(p_before, mecanum::power(state_), dt_);
    ++k_;
  }

  /// Restarts from s0 at t = 0 with a freshly seeded noise process.
  void reset(const mecanum::ExtendedState& s0, const std::optional<NoiseParams>& noise) {
    state_ = s0;
    k_ = 0;
    noise_.reset();
    if (noise) noise_ = NoiseState::make(noise->k, noise->q, noise->seed);
    energy_.reset(mecanum::power(state_));
  }

  double accumulated_energy() const { return energy_.accumulated_energy(); }

 private:
  ControlEvaluation evaluate_unified(const mecanum::ExtendedState& xs, const ReferenceSample& ref, SwitchSignal sigma,
                                     double t) const {
    try {
      return unified_->evaluate(xs, ref.block_derivatives(), sigma);
    } catch (const SingularInteractionMatrix& e) {
      throw e.with_context(t, xs.to_vector());
    }
  }

  baseline::VelocityCommand naive_velocity(const mecanum::ExtendedState& xs, const ReferenceSample& ref) const {
    return baseline::naive_dexterous({xs.x, xs.y, xs.theta}, ref, std::get<NaivePairSpec>(spec_).gains);
  }

  baseline::ExtendedCommand naive_extended(const mecanum::ExtendedState& xs, const ReferenceSample& ref,
                                           double t) const {
    const auto& spec = std::get<NaivePairSpec>(spec_);
    try {
      return baseline::naive_energy_saving({xs.x, xs.y, xs.theta, xs.v1}, ref, spec.gains, spec.singularity_tol);
    } catch (const SingularInteractionMatrix& e) {
      throw e.with_context(t, xs.to_vector());
    }
  }

  mecanum::ControlInput apply_noise(const mecanum::ControlInput& u, SwitchSignal sigma) const {
    return apply_noise(u, sigma, noise());
  }

  mecanum::ControlInput apply_noise(const mecanum::ControlInput& u, SwitchSignal sigma,
                                    const Eigen::Vector3d& n) const {
    if (!unified_) {
      // naive velocity phase carries the noise inside the velocities themselves
      if (sigma.is_dexterous()) return {u.u1, u.u2, u.u3 + n[2]};
      return {u.u1 + n[0], u.u2, u.u3 + n[2]};
    }
    return {u.u1 + n[0], u.u2 + n[1], u.u3 + n[2]};
  }

  ControllerSpec spec_;
  std::optional<mecanum::UnifiedController> unified_;
  ReferenceTrajectory reference_;
  std::optional<NoiseState> noise_;
  mecanum::ExtendedState state_;
  mecanum::EnergyMeter energy_;
  double dt_;
  long long k_ = 0;
};

/// Runs the scenario to completion. Propagates SingularInteractionMatrix and
/// NonFiniteState with the time of failure.
inline SimLog run_scenario(const Scenario& sc) {
  sc.validate();
  ClosedLoopStepper stepper(sc.controller, sc.reference, sc.noise, sc.s0, sc.dt);
  const long long n = sc.step_count();
  SimLog log;
  log.dt = sc.dt;
  log.rows.reserve(static_cast<std::size_t>(n) + 1);
  for (long long k = 0; k <= n; ++k) {
    const SwitchSignal sigma = sc.schedule.at_step(k, sc.dt);
    log.rows.push_back(stepper.record(sigma));
    if (k < n) stepper.advance(sigma);
  }
  return log;
}

enum class ErrorChannel { E1, E2, E3 };

inline double channel_norm(const SimRecord& r, ErrorChannel c) {
  switch (c) {
    case ErrorChannel::E1: return r.e1.norm();
    case ErrorChannel::E2: return std::abs(r.e2);
    default: return std::abs(r.e3);
  }
}

/// Least-squares slope of log|e(t)| over rows with t in [t_a, t_b].
inline double decay_rate_estimate(const SimLog& log, ErrorChannel channel, double t_a, double t_b) {
  double st = 0, sy = 0, stt = 0, sty = 0;
  std::size_t m = 0;
  for (const auto& r : log.rows) {
    if (r.t < t_a || r.t > t_b) continue;
    const double mag = channel_norm(r, channel);
    if (mag < 1e-12) throw ChannelUnderflow("error channel below 1e-12 at t=" + std::to_string(r.t));
    const double ly = std::log(mag);
    st += r.t;
    sy += ly;
    stt += r.t * r.t;
    sty += r.t * ly;
    ++m;
  }
  if (m < 2) throw std::invalid_argument("decay window holds fewer than two samples");
  const double md = static_cast<double>(m);
  return (md * sty - st * sy) / (md * stt - st * st);
}

}  // namespace sflc
