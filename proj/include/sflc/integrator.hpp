#pragma once

#include "sflc/mecanum.hpp"

#include <stdexcept>
#include <string>
#include <utility>

namespace sflc {

class NonFiniteState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Classical fourth-order Runge-Kutta step. f(x, tau) returns dx/dt at state x
/// and step-relative time tau in [0, dt].
template <typename Vec, typename F>
Vec rk4(const Vec& x, F&& f, double dt) {
  const Vec k1 = f(x, 0.0);
  const Vec k2 = f((x + 0.5 * dt * k1).eval(), 0.5 * dt);
  const Vec k3 = f((x + 0.5 * dt * k2).eval(), 0.5 * dt);
  const Vec k4 = f((x + dt * k3).eval(), dt);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

namespace mecanum {

/// One RK4 step of the vehicle with u held constant over the step.
inline ExtendedState rk4_step(const ExtendedState& s, const ControlInput& u, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  const auto next = rk4(
      s.to_array(), [&](const ExtendedState::Array& x, double) { return state_derivative(ExtendedState::from_array(x), u); },
      dt);
  const ExtendedState out = ExtendedState::from_array(next);
  if (!out.finite()) throw NonFiniteState("rk4_step produced a non-finite state");
  return out;
}

/// RK4 step of the closed loop: the policy is re-evaluated at every stage.
template <typename Policy>
ExtendedState rk4_closed_loop_step(const ExtendedState& s, Policy&& policy, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_closed_loop_step: dt must be positive");
  const auto next = rk4(
      s.to_array(),
      [&](const ExtendedState::Array& x, double tau) {
        const ExtendedState xs = ExtendedState::from_array(x);
        return state_derivative(xs, policy(xs, tau));
      },
      dt);
  const ExtendedState out = ExtendedState::from_array(next);
  if (!out.finite()) throw NonFiniteState("closed-loop step produced a non-finite state");
  return out;
}

}  // namespace mecanum
}  // namespace sflc
