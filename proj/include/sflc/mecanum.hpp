#pragma once

// Four-Mecanum-wheel vehicle at the body-velocity level, with both linear
// velocities dynamically extended:
//
//   x' = v1 cos(th) - v2 sin(th),  y' = v1 sin(th) + v2 cos(th),  th' = u3,
//   v1' = u1,  v2' = u2.
//
// Outputs: y1 = (x, y) with relative degree {2, 2}, y2 = th and y3 = v2 with
// relative degree 1.

#include "sflc/flc_core.hpp"
#include "sflc/switched_controller.hpp"

#include <cmath>
#include <numbers>

namespace sflc::mecanum {

struct ExtendedState {
  double x = 0.0;      // m
  double y = 0.0;      // m
  double theta = 0.0;  // rad, unwrapped
  double v1 = 0.0;     // m/s, sagittal
  double v2 = 0.0;     // m/s, transversal

  using Array = Eigen::Matrix<double, 5, 1>;

  Array to_array() const { return (Array() << x, y, theta, v1, v2).finished(); }
  static ExtendedState from_array(const Array& a) { return {a[0], a[1], a[2], a[3], a[4]}; }
  std::vector<double> to_vector() const { return {x, y, theta, v1, v2}; }

  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(theta) && std::isfinite(v1) && std::isfinite(v2);
  }

  friend bool operator==(const ExtendedState&, const ExtendedState&) = default;
};

struct ControlInput {
  double u1 = 0.0;  // m/s^2, v1'
  double u2 = 0.0;  // m/s^2, v2'
  double u3 = 0.0;  // rad/s, turn rate

  Eigen::Vector3d to_array() const { return {u1, u2, u3}; }
  static ControlInput from_array(const Eigen::Ref<const Eigen::VectorXd>& a) { return {a[0], a[1], a[2]}; }
  bool finite() const { return std::isfinite(u1) && std::isfinite(u2) && std::isfinite(u3); }

  friend bool operator==(const ControlInput&, const ControlInput&) = default;
};

struct OutputStack {
  Eigen::Vector2d y1;
  Eigen::Vector2d y1_dot;
  double y2 = 0.0;
  double y3 = 0.0;
};

class UndefinedHeading : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Wraps to (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * std::numbers::pi);
  if (w <= -std::numbers::pi) w += 2.0 * std::numbers::pi;
  return w;
}

inline Eigen::Vector2d world_velocity(const ExtendedState& s) {
  const double c = std::cos(s.theta);
  const double sn = std::sin(s.theta);
  return {s.v1 * c - s.v2 * sn, s.v1 * sn + s.v2 * c};
}

inline ExtendedState::Array state_derivative(const ExtendedState& s, const ControlInput& u) {
  const Eigen::Vector2d p_dot = world_velocity(s);
  return (ExtendedState::Array() << p_dot.x(), p_dot.y(), u.u3, u.u1, u.u2).finished();
}

inline InteractionBlocks<double> interaction_blocks(const ExtendedState& s) {
  const double c = std::cos(s.theta);
  const double sn = std::sin(s.theta);
  InteractionBlocks<double> b;
  b.a11.resize(2, 2);
  b.a11 << c, -sn, sn, c;
  b.a12.resize(2, 1);
  b.a12 << -s.v1 * sn - s.v2 * c, s.v1 * c - s.v2 * sn;
  b.a21 = Matrix::Zero(1, 2);
  b.a22 = Matrix::Ones(1, 1);
  b.abar21.resize(1, 2);
  b.abar21 << 0.0, 1.0;
  b.abar22 = Matrix::Zero(1, 1);
  b.b1 = Vector::Zero(2);
  b.b2 = Vector::Zero(1);
  b.b3 = Vector::Zero(1);
  return b;
}

inline OutputStack output_stack(const ExtendedState& s) {
  return {Eigen::Vector2d(s.x, s.y), world_velocity(s), s.theta, s.v2};
}

/// Closed-form det A_sigma = sigma - (1 - sigma) v1.
inline double det_sigma(const ExtendedState& s, SwitchSignal sigma) {
  return sigma.is_dexterous() ? 1.0 : -s.v1;
}

inline double heading_of_velocity(const ExtendedState& s) {
  const Eigen::Vector2d v = world_velocity(s);
  if (v.squaredNorm() == 0.0) throw UndefinedHeading("heading undefined at zero translational velocity");
  return std::atan2(v.y(), v.x());
}

/// Transversal motion costs twice as much as sagittal motion at equal speed.
inline double power(const ExtendedState& s) { return s.v1 * s.v1 + 2.0 * s.v2 * s.v2; }

class EnergyMeter {
 public:
  /// Trapezoidal accumulation of the power signal.
  void advance(double power_before, double power_after, double dt) {
    accumulated_ += 0.5 * dt * (std::max(power_before, 0.0) + std::max(power_after, 0.0));
    instantaneous_ = power_after;
  }
  void reset(double p0) {
    accumulated_ = 0.0;
    instantaneous_ = p0;
  }
  double accumulated_energy() const { return accumulated_; }
  double instantaneous_power() const { return instantaneous_; }

 private:
  double accumulated_ = 0.0;
  double instantaneous_ = 0.0;
};

/// Adapter exposing the vehicle to the generic switched controller.
struct Plant {
  using State = ExtendedState;

  static RelativeDegree relative_degree() { return {{2, 2}, {1}, {1}}; }
  static int state_dimension() { return 5; }
  static InteractionBlocks<double> interaction_blocks(const State& s) { return mecanum::interaction_blocks(s); }

  static BlockDerivatives output_derivatives(const State& s) {
    const OutputStack o = output_stack(s);
    BlockDerivatives d;
    d[0] = {Vector(o.y1), Vector(o.y1_dot)};
    d[1] = {Vector::Constant(1, o.y2)};
    d[2] = {Vector::Constant(1, o.y3)};
    return d;
  }
};

static_assert(SwitchedFlcPlant<Plant>);

/// L^1_1 = L^2_1 = I2, L^1_2 = 0.75, L^1_3 = 0.65.
inline GainSet reference_gains() {
  return GainSet::make({
      GainSet::BlockGains{Matrix::Identity(2, 2), Matrix::Identity(2, 2)},
      GainSet::BlockGains{Matrix::Constant(1, 1, 0.75)},
      GainSet::BlockGains{Matrix::Constant(1, 1, 0.65)},
  });
}

using UnifiedController = SwitchedTrackingController<Plant>;

}  // namespace sflc::mecanum
