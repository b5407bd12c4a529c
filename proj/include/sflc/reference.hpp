#pragma once

#include "sflc/switched_controller.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sflc {

/// Desired outputs at one instant. The energy-intense reference is zero.
struct ReferenceSample {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
  Eigen::Vector2d acceleration = Eigen::Vector2d::Zero();
  double heading = 0.0;
  double heading_rate = 0.0;

  BlockDerivatives block_derivatives() const {
    BlockDerivatives d;
    d[0] = {Vector(position), Vector(velocity), Vector(acceleration)};
    d[1] = {Vector::Constant(1, heading), Vector::Constant(1, heading_rate)};
    d[2] = {Vector::Zero(1), Vector::Zero(1)};
    return d;
  }
};

class InconsistentReference : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ReferenceTrajectory {
 public:
  using Fn = std::function<ReferenceSample(double)>;

  /// Spot-checks the derivative channels against central differences.
  ReferenceTrajectory(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {
    constexpr double h = 1e-4;
    constexpr double tol = 1e-6;
    for (double t : {0.0, 0.37, 1.9, 7.3, 23.1}) {
      const ReferenceSample lo = fn_(t - h);
      const ReferenceSample hi = fn_(t + h);
      const ReferenceSample mid = fn_(t);
      auto check = [&](double fd, double exact, const char* what) {
        if (!(std::abs(fd - exact) <= tol * std::max(1.0, std::abs(exact)))) {
          throw InconsistentReference("reference '" + name_ + "': " + what + " derivative inconsistent at t=" +
                                      std::to_string(t));
        }
      };
      for (int i = 0; i < 2; ++i) {
        check((hi.position[i] - lo.position[i]) / (2 * h), mid.velocity[i], "position");
        check((hi.velocity[i] - lo.velocity[i]) / (2 * h), mid.acceleration[i], "velocity");
      }
      check((hi.heading - lo.heading) / (2 * h), mid.heading_rate, "heading");
    }
  }

  ReferenceSample operator()(double t) const { return fn_(t); }
  const std::string& name() const { return name_; }

 private:
  std::string name_;
  Fn fn_;
};

/// y1d = (r sin wt, -r cos wt), y2d = wt + heading_offset.
inline ReferenceTrajectory circle_reference(double r, double omega, double heading_offset = std::numbers::pi / 2) {
  if (!(r > 0.0)) throw std::invalid_argument("circle radius must be positive");
  if (omega == 0.0 || !std::isfinite(omega)) throw std::invalid_argument("circle angular rate must be nonzero");
  return ReferenceTrajectory("circle", [=](double t) {
    const double c = std::cos(omega * t);
    const double s = std::sin(omega * t);
    ReferenceSample out;
    out.position = {r * s, -r * c};
    out.velocity = {r * omega * c, r * omega * s};
    out.acceleration = {-r * omega * omega * s, r * omega * omega * c};
    out.heading = omega * t + heading_offset;
    out.heading_rate = omega;
    return out;
  });
}

/// y1d = (5 + t/4, 5 + t/4), y2d = 3 pi / 4.
inline ReferenceTrajectory line_reference() {
  return ReferenceTrajectory("line", [](double t) {
    ReferenceSample out;
    out.position = {5.0 + t / 4.0, 5.0 + t / 4.0};
    out.velocity = {0.25, 0.25};
    out.acceleration = {0.0, 0.0};
    out.heading = 3.0 * std::numbers::pi / 4.0;
    out.heading_rate = 0.0;
    return out;
  });
}

namespace detail {

// value, first and second derivative of sum c_k t^k
inline std::array<double, 3> eval_poly(const std::vector<double>& c, double t) {
  std::array<double, 3> r{0.0, 0.0, 0.0};
  for (std::size_t k = c.size(); k-- > 0;) {
    r[2] = r[2] * t + 2.0 * r[1];
    r[1] = r[1] * t + r[0];
    r[0] = r[0] * t + c[k];
  }
  return r;
}

}  // namespace detail

/// Polynomial reference; coefficients in increasing powers of t.
inline ReferenceTrajectory polynomial_reference(std::vector<double> x, std::vector<double> y,
                                                std::vector<double> heading) {
  if (x.empty() || y.empty() || heading.empty()) throw std::invalid_argument("polynomial coefficients are empty");
  return ReferenceTrajectory("polynomial", [x = std::move(x), y = std::move(y), th = std::move(heading)](double t) {
    const auto px = detail::eval_poly(x, t);
    const auto py = detail::eval_poly(y, t);
    const auto pt = detail::eval_poly(th, t);
    ReferenceSample out;
    out.position = {px[0], py[0]};
    out.velocity = {px[1], py[1]};
    out.acceleration = {px[2], py[2]};
    out.heading = pt[0];
    out.heading_rate = pt[1];
    return out;
  });
}

}  // namespace sflc
