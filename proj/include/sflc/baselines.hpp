#pragma once

// The two mode-specific controllers a naive design would switch between:
// a velocity-level full-pose tracker and a dynamically extended unicycle-style
// position tracker with v2 pinned to zero.

#include "sflc/flc_core.hpp"
#include "sflc/reference.hpp"

#include <cmath>
#include <stdexcept>

namespace sflc::baseline {

struct BaselineGains {
  double kp1 = 1.0, kp2 = 1.0, kp3 = 1.0;
  double kd1 = 2.0, kd2 = 2.0;

  void validate() const {
    if (!(kp1 > 0 && kp2 > 0 && kp3 > 0 && kd1 > 0 && kd2 > 0)) {
      throw std::invalid_argument("baseline gains must be strictly positive");
    }
  }
};

struct Pose {
  double x = 0.0, y = 0.0, theta = 0.0;
};

struct VelocityCommand {
  double v1 = 0.0, v2 = 0.0, v3 = 0.0;
};

/// (v1', v3) with v2 held at zero.
struct ExtendedCommand {
  double v1_dot = 0.0, v3 = 0.0;
};

/// R(th)^-1 [x'd + kp1 ex; y'd + kp2 ey; th'd + kp3 eth].
inline VelocityCommand naive_dexterous(const Pose& s, const ReferenceSample& ref, const BaselineGains& g) {
  const double wx = ref.velocity.x() + g.kp1 * (ref.position.x() - s.x);
  const double wy = ref.velocity.y() + g.kp2 * (ref.position.y() - s.y);
  const double wt = ref.heading_rate + g.kp3 * (ref.heading - s.theta);
  const double c = std::cos(s.theta);
  const double sn = std::sin(s.theta);
  // R is a planar rotation padded with 1, so its inverse is the transpose
  return {c * wx + sn * wy, -sn * wx + c * wy, wt};
}

/// Solves [[c, -v1 s], [s, v1 c]] (v1', v3) = (w1, w2); the matrix has determinant v1.
inline ExtendedCommand solve_energy_saving(double theta, double v1, double w1, double w2,
                                           double singularity_tol = kDefaultSingularityTol) {
  if (!(std::abs(v1) > singularity_tol)) throw SingularInteractionMatrix(v1, SwitchSignal::energy_saving());
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {c * w1 + s * w2, (-s * w1 + c * w2) / v1};
}

struct UnicycleState {
  double x = 0.0, y = 0.0, theta = 0.0, v1 = 0.0;
};

inline ExtendedCommand naive_energy_saving(const UnicycleState& s, const ReferenceSample& ref, const BaselineGains& g,
                                           double singularity_tol = kDefaultSingularityTol) {
  const double c = std::cos(s.theta);
  const double sn = std::sin(s.theta);
  const double x_dot = s.v1 * c;
  const double y_dot = s.v1 * sn;
  const double w1 = ref.acceleration.x() + g.kp1 * (ref.position.x() - s.x) + g.kd1 * (ref.velocity.x() - x_dot);
  const double w2 = ref.acceleration.y() + g.kp2 * (ref.position.y() - s.y) + g.kd2 * (ref.velocity.y() - y_dot);
  return solve_energy_saving(s.theta, s.v1, w1, w2, singularity_tol);
}

}  // namespace sflc::baseline
