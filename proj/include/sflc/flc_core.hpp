#pragma once

// Plant-agnostic switched feedback linearization.
//
// The stacked output is y_sigma = [y1; sigma*y2 + (1-sigma)*y3]. Its decoupling
// matrix shares the y1 rows between the two modes and selects the bottom rows
// from either the dexterous (A) or the energy-saving (Abar) matrix.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <complex>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sflc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kDefaultSingularityTol = 1e-6;
inline constexpr double kPoleStabilityMargin = 1e-9;

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnstableGains : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Exogenous mode selector. 0 = energy-saving, 1 = dexterous. Nothing else.
class SwitchSignal {
 public:
  constexpr SwitchSignal() = default;

  static SwitchSignal from_int(long long sigma) {
    if (sigma != 0 && sigma != 1) {
      throw std::invalid_argument("switch signal must be 0 or 1, got " + std::to_string(sigma));
    }
    return SwitchSignal(static_cast<int>(sigma));
  }
  static constexpr SwitchSignal dexterous() { return SwitchSignal(1); }
  static constexpr SwitchSignal energy_saving() { return SwitchSignal(0); }

  constexpr int value() const { return sigma_; }
  constexpr bool is_dexterous() const { return sigma_ == 1; }

  friend constexpr bool operator==(SwitchSignal, SwitchSignal) = default;

 private:
  constexpr explicit SwitchSignal(int s) : sigma_(s) {}
  int sigma_ = 1;
};

/// Raised when |det A_sigma| falls to or below the singularity tolerance.
/// Higher layers attach the simulation time and state they were evaluating.
class SingularInteractionMatrix : public std::runtime_error {
 public:
  SingularInteractionMatrix(double det, SwitchSignal sigma, std::optional<double> time = std::nullopt,
                            std::vector<double> state = {})
      : std::runtime_error(format(det, sigma, time, state)),
        det_(det),
        sigma_(sigma),
        time_(time),
        state_(std::move(state)) {}

  double det() const { return det_; }
  SwitchSignal sigma() const { return sigma_; }
  const std::optional<double>& time() const { return time_; }
  const std::vector<double>& state() const { return state_; }

  SingularInteractionMatrix with_context(double time, std::vector<double> state) const {
    return SingularInteractionMatrix(det_, sigma_, time, std::move(state));
  }

 private:
  static std::string format(double det, SwitchSignal sigma, const std::optional<double>& time,
                            const std::vector<double>& state) {
    std::ostringstream os;
    os.precision(17);
    os << "singular interaction matrix (det=" << det << ", sigma=" << sigma.value() << ")";
    if (time) os << " at t=" << *time;
    if (!state.empty()) {
      os << " state=[";
      for (std::size_t i = 0; i < state.size(); ++i) os << (i ? ", " : "") << state[i];
      os << "]";
    }
    return os.str();
  }

  double det_;
  SwitchSignal sigma_;
  std::optional<double> time_;
  std::vector<double> state_;
};

/// Output block identifiers: main task, auxiliary (dexterous) and
/// energy-intense (energy-saving) outputs.
enum class Block : std::size_t { Main = 0, Auxiliary = 1, EnergyIntense = 2 };

inline constexpr std::array<Block, 3> kAllBlocks = {Block::Main, Block::Auxiliary, Block::EnergyIntense};

inline constexpr std::size_t index(Block j) { return static_cast<std::size_t>(j); }

struct RelativeDegree {
  std::vector<int> rho1;
  std::vector<int> rho2;
  std::vector<int> rho3;

  const std::vector<int>& of(Block j) const {
    switch (j) {
      case Block::Main: return rho1;
      case Block::Auxiliary: return rho2;
      default: return rho3;
    }
  }

  std::size_t p1() const { return rho1.size(); }
  std::size_t p2() const { return rho2.size(); }

  /// Checks the block-size and order-sum conditions for a plant of dimension n.
  void validate(int n) const {
    auto positive = [](const std::vector<int>& r) {
      return !r.empty() && std::all_of(r.begin(), r.end(), [](int v) { return v > 0; });
    };
    if (!positive(rho1) || !positive(rho2) || !positive(rho3)) {
      throw DimensionMismatch("relative degrees must be non-empty lists of positive integers");
    }
    if (rho2.size() != rho3.size()) {
      throw DimensionMismatch("auxiliary and energy-intense blocks must have equal output counts");
    }
    const int s1 = std::accumulate(rho1.begin(), rho1.end(), 0);
    const int s2 = std::accumulate(rho2.begin(), rho2.end(), 0);
    const int s3 = std::accumulate(rho3.begin(), rho3.end(), 0);
    if (s1 + s2 != n || s1 + s3 != n) {
      throw DimensionMismatch("relative degrees must sum to the state dimension " + std::to_string(n) +
                              " (got " + std::to_string(s1 + s2) + " and " + std::to_string(s1 + s3) + ")");
    }
  }

  /// Common order of every channel in block j. Tracking gains are per block,
  /// so mixed orders inside one block are rejected.
  int uniform_order(Block j) const {
    const auto& r = of(j);
    if (r.empty() || std::adjacent_find(r.begin(), r.end(), std::not_equal_to<>()) != r.end()) {
      throw DimensionMismatch("block " + std::to_string(index(j) + 1) + " has mixed relative degrees");
    }
    return r.front();
  }
};

template <typename Scalar = double>
struct InteractionBlocks {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Mat a11, a12;        // shared y1 rows
  Mat a21, a22;        // y2 rows (dexterous)
  Mat abar21, abar22;  // y3 rows (energy-saving)
  Vec b1, b2, b3;

  Eigen::Index p1() const { return a11.rows(); }
  Eigen::Index p2() const { return a22.rows(); }

  void validate() const {
    const auto n1 = p1();
    const auto n2 = p2();
    const bool ok = a11.cols() == n1 && a12.rows() == n1 && a12.cols() == n2 && a21.rows() == n2 &&
                    a21.cols() == n1 && a22.cols() == n2 && abar21.rows() == n2 && abar21.cols() == n1 &&
                    abar22.rows() == n2 && abar22.cols() == n2 && b1.size() == n1 && b2.size() == n2 &&
                    b3.size() == n2;
    if (!ok) throw DimensionMismatch("interaction blocks have inconsistent dimensions");
  }

  void validate(const RelativeDegree& rd) const {
    validate();
    if (static_cast<std::size_t>(p1()) != rd.p1() || static_cast<std::size_t>(p2()) != rd.p2()) {
      throw DimensionMismatch("interaction blocks do not match the relative degree block sizes");
    }
  }
};

template <typename Scalar = double>
struct VirtualInput {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v1, v2, v3;
};

/// [[a11, a12], [sigma ? (a21, a22) : (abar21, abar22)]]. Rows are copied, never blended.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> compose_interaction_matrix(
    const InteractionBlocks<Scalar>& blocks, SwitchSignal sigma) {
  blocks.validate();
  const auto n1 = blocks.p1();
  const auto n2 = blocks.p2();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> a(n1 + n2, n1 + n2);
  a.topLeftCorner(n1, n1) = blocks.a11;
  a.topRightCorner(n1, n2) = blocks.a12;
  if (sigma.is_dexterous()) {
    a.bottomLeftCorner(n2, n1) = blocks.a21;
    a.bottomRightCorner(n2, n2) = blocks.a22;
  } else {
    a.bottomLeftCorner(n2, n1) = blocks.abar21;
    a.bottomRightCorner(n2, n2) = blocks.abar22;
  }
  return a;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> compose_drift(const InteractionBlocks<Scalar>& blocks,
                                                        SwitchSignal sigma) {
  blocks.validate();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> b(blocks.p1() + blocks.p2());
  b << blocks.b1, (sigma.is_dexterous() ? blocks.b2 : blocks.b3);
  return b;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> compose_virtual(const VirtualInput<Scalar>& v, SwitchSignal sigma) {
  const auto& lower = sigma.is_dexterous() ? v.v2 : v.v3;
  if (v.v2.size() != v.v3.size()) throw DimensionMismatch("v2 and v3 must have the same length");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(v.v1.size() + lower.size());
  out << v.v1, lower;
  return out;
}

template <typename Scalar>
struct ControlSolution {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> u;
  Scalar det;
};

/// Solves A_sigma u = -b_sigma + v_sigma by LU with partial pivoting.
/// Throws SingularInteractionMatrix when |det A_sigma| <= singularity_tol.
template <typename Scalar>
ControlSolution<Scalar> solve_control(const InteractionBlocks<Scalar>& blocks, const VirtualInput<Scalar>& v,
                                      SwitchSignal sigma, Scalar singularity_tol = kDefaultSingularityTol) {
  const auto a = compose_interaction_matrix(blocks, sigma);
  const auto rhs = (compose_virtual(v, sigma) - compose_drift(blocks, sigma)).eval();
  if (rhs.size() != a.rows()) throw DimensionMismatch("virtual input length does not match interaction matrix");
  const Eigen::PartialPivLU<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> lu(a);
  const Scalar det = lu.determinant();
  if (!(std::abs(det) > singularity_tol)) throw SingularInteractionMatrix(static_cast<double>(det), sigma);
  return {lu.solve(rhs), det};
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> control_input(const InteractionBlocks<Scalar>& blocks,
                                                        const VirtualInput<Scalar>& v, SwitchSignal sigma,
                                                        Scalar singularity_tol = kDefaultSingularityTol) {
  return solve_control(blocks, v, sigma, singularity_tol).u;
}

/// Companion matrix of e^(rho) + sum_{i=0}^{rho-1} L^{i+1} e^(i) = 0 for the
/// stacked error [e; e'; ...; e^(rho-1)].
inline Matrix error_companion_matrix(std::span<const Matrix> gains) {
  if (gains.empty()) throw DimensionMismatch("gain list is empty");
  const Eigen::Index p = gains.front().rows();
  const auto rho = static_cast<Eigen::Index>(gains.size());
  for (const auto& l : gains) {
    if (l.rows() != p || l.cols() != p) throw DimensionMismatch("gain matrices must be square and equally sized");
  }
  Matrix c = Matrix::Zero(p * rho, p * rho);
  for (Eigen::Index i = 0; i + 1 < rho; ++i) c.block(i * p, (i + 1) * p, p, p).setIdentity();
  for (Eigen::Index i = 0; i < rho; ++i) c.block((rho - 1) * p, i * p, p, p) = -gains[static_cast<std::size_t>(i)];
  return c;
}

inline std::vector<std::complex<double>> companion_poles(std::span<const Matrix> gains) {
  const Matrix c = error_companion_matrix(gains);
  const Eigen::EigenSolver<Matrix> es(c, false);
  std::vector<std::complex<double>> poles(es.eigenvalues().data(), es.eigenvalues().data() + c.rows());
  std::sort(poles.begin(), poles.end(), [](const auto& a, const auto& b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return poles;
}

/// Per-block tracking gains L^1_j ... L^{rho_j}_j; L^{i+1}_j multiplies the
/// i-th derivative of the block error.
class GainSet {
 public:
  using BlockGains = std::vector<Matrix>;

  GainSet() = default;

  /// Validates exponential stability of every block's error dynamics.
  static GainSet make(std::array<BlockGains, 3> blocks) {
    GainSet g = unchecked(std::move(blocks));
    for (Block j : kAllBlocks) {
      const auto poles = companion_poles(g.block(j));
      for (const auto& s : poles) {
        if (!(s.real() < -kPoleStabilityMargin)) {
          std::ostringstream os;
          os << "gains of block " << index(j) + 1 << " give a pole at " << s.real()
             << (s.imag() < 0 ? "-" : "+") << std::abs(s.imag()) << "i (need real part < " << -kPoleStabilityMargin
             << ")";
          throw UnstableGains(os.str());
        }
      }
    }
    return g;
  }

  /// Dimension checks only. Used for diagnostics on deliberately bad gains.
  static GainSet unchecked(std::array<BlockGains, 3> blocks) {
    for (Block j : kAllBlocks) (void)error_companion_matrix(blocks[index(j)]);
    GainSet g;
    g.blocks_ = std::move(blocks);
    return g;
  }

  const BlockGains& block(Block j) const { return blocks_[index(j)]; }
  int order(Block j) const { return static_cast<int>(blocks_[index(j)].size()); }
  Eigen::Index dim(Block j) const { return blocks_[index(j)].front().rows(); }

  /// Throws unless block orders and sizes match the relative degree.
  void check_against(const RelativeDegree& rd) const {
    for (Block j : kAllBlocks) {
      if (blocks_[index(j)].empty()) throw DimensionMismatch("gain set is empty");
      if (order(j) != rd.uniform_order(j) || static_cast<std::size_t>(dim(j)) != rd.of(j).size()) {
        throw DimensionMismatch("gains of block " + std::to_string(index(j) + 1) +
                                " do not match its relative degree");
      }
    }
  }

 private:
  std::array<BlockGains, 3> blocks_;
};

/// v_j = y_j^d(rho) + sum_{i=0}^{rho-1} L^{i+1}_j (y_j^d(i) - y_j(i)).
/// ref_derivs holds rho+1 entries, out_derivs holds rho entries.
inline Vector tracking_virtual_input(Block j, std::span<const Vector> ref_derivs, std::span<const Vector> out_derivs,
                                     const GainSet& gains) {
  const auto& l = gains.block(j);
  const std::size_t rho = l.size();
  if (ref_derivs.size() != rho + 1 || out_derivs.size() != rho) {
    throw DimensionMismatch("block " + std::to_string(index(j) + 1) + " expects " + std::to_string(rho + 1) +
                            " reference and " + std::to_string(rho) + " output derivatives");
  }
  const Eigen::Index p = l.front().rows();
  for (const auto& d : ref_derivs)
    if (d.size() != p) throw DimensionMismatch("reference derivative has wrong length");
  for (const auto& d : out_derivs)
    if (d.size() != p) throw DimensionMismatch("output derivative has wrong length");

  Vector v = ref_derivs[rho];
  for (std::size_t i = 0; i < rho; ++i) v.noalias() += l[i] * (ref_derivs[i] - out_derivs[i]);
  return v;
}

inline std::vector<std::complex<double>> closed_loop_error_poles(const GainSet& gains, Block j) {
  return companion_poles(gains.block(j));
}

}  // namespace sflc
