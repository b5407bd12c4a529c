#pragma once

#include "sflc/flc_core.hpp"

#include <concepts>

namespace sflc {

/// Derivative stacks per output block: entry i of block j is the i-th time
/// derivative of that block's output (or of its reference).
using BlockDerivatives = std::array<std::vector<Vector>, 3>;

/// A plant the switched tracking controller can drive. The plant supplies its
/// relative degrees, the mode-specific decoupling blocks, and the output
/// derivatives up to order rho_j - 1 in closed form.
template <typename P>
concept SwitchedFlcPlant = requires(const P& plant, const typename P::State& s) {
  { plant.relative_degree() } -> std::convertible_to<RelativeDegree>;
  { plant.state_dimension() } -> std::convertible_to<int>;
  { plant.interaction_blocks(s) } -> std::convertible_to<InteractionBlocks<double>>;
  { plant.output_derivatives(s) } -> std::convertible_to<BlockDerivatives>;
};

struct ControlEvaluation {
  Vector u;
  VirtualInput<double> virtual_input;
  double det = 0.0;
};

template <SwitchedFlcPlant Plant>
class SwitchedTrackingController {
 public:
  using State = typename Plant::State;

  SwitchedTrackingController(Plant plant, GainSet gains, double singularity_tol = kDefaultSingularityTol)
      : plant_(std::move(plant)), gains_(std::move(gains)), tol_(singularity_tol) {
    const RelativeDegree rd = plant_.relative_degree();
    rd.validate(plant_.state_dimension());
    gains_.check_against(rd);
  }

  /// ref holds, per block, the reference and its derivatives up to order rho_j.
  ControlEvaluation evaluate(const State& s, const BlockDerivatives& ref, SwitchSignal sigma) const {
    const BlockDerivatives out = plant_.output_derivatives(s);
    VirtualInput<double> v{
        tracking_virtual_input(Block::Main, ref[0], out[0], gains_),
        tracking_virtual_input(Block::Auxiliary, ref[1], out[1], gains_),
        tracking_virtual_input(Block::EnergyIntense, ref[2], out[2], gains_),
    };
    const InteractionBlocks<double> blocks = plant_.interaction_blocks(s);
    auto sol = solve_control(blocks, v, sigma, tol_);
    return {std::move(sol.u), std::move(v), sol.det};
  }

  const Plant& plant() const { return plant_; }
  const GainSet& gains() const { return gains_; }
  double singularity_tol() const { return tol_; }

 private:
  Plant plant_;
  GainSet gains_;
  double tol_;
};

}  // namespace sflc
