#include "generators.hpp"
#include "sflc/flc_core.hpp"
#include "sflc/mecanum.hpp"
#include "sflc/switched_controller.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>

using namespace sflc;
using sflc::testing::Gen;

namespace {

std::array<std::vector<Matrix>, 3> blocks3(std::vector<Matrix> main, std::vector<Matrix> aux, std::vector<Matrix> energy) {
  return {std::move(main), std::move(aux), std::move(energy)};
}

const SwitchSignal kOne = SwitchSignal::dexterous();
const SwitchSignal kZero = SwitchSignal::energy_saving();

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  std::copy(xs.begin(), xs.end(), v.begin());
  return v;
}

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double x : r) m(i, j++) = x;
    ++i;
  }
  return m;
}

InteractionBlocks<double> scalar_blocks() {
  // b1=[1], b2=[2], b3=[3] with 1x1 blocks
  return {mat({{1}}), mat({{0}}), mat({{0}}), mat({{1}}), mat({{0}}), mat({{1}}), vec({1}), vec({2}), vec({3})};
}

GainSet single_block_gains(GainSet::BlockGains main) {
  return GainSet::make(blocks3(std::move(main), {mat({{1}})}, {mat({{1}})}));
}

}  // namespace

TEST(SwitchSignal, AcceptsOnlyZeroAndOne) {
  EXPECT_EQ(SwitchSignal::from_int(0), kZero);
  EXPECT_EQ(SwitchSignal::from_int(1), kOne);
  EXPECT_THROW(SwitchSignal::from_int(2), std::invalid_argument);
  EXPECT_THROW(SwitchSignal::from_int(-1), std::invalid_argument);
  EXPECT_TRUE(SwitchSignal{}.is_dexterous());
}

TEST(RelativeDegree, ValidatesBlockSizesAndSum) {
  RelativeDegree rd{{2, 2}, {1}, {1}};
  EXPECT_NO_THROW(rd.validate(5));
  EXPECT_THROW(rd.validate(6), DimensionMismatch);
  EXPECT_THROW((RelativeDegree{{2, 2}, {1}, {1, 1}}.validate(5)), DimensionMismatch);
  EXPECT_THROW((RelativeDegree{{2, 0}, {1}, {1}}.validate(3)), DimensionMismatch);
  EXPECT_THROW((RelativeDegree{{2, 1}, {1}, {1}}.uniform_order(Block::Main)), DimensionMismatch);
}

TEST(ComposeInteractionMatrix, DexterousSelectsFullMatrix) {
  Gen g(1);
  const auto b = g.well_conditioned_blocks(2, 1);
  Matrix full(3, 3);
  full << b.a11, b.a12, b.a21, b.a22;
  EXPECT_EQ(compose_interaction_matrix(b, kOne), full);
}

TEST(ComposeInteractionMatrix, EnergySavingSelectsBarMatrix) {
  Gen g(2);
  const auto b = g.well_conditioned_blocks(2, 1);
  Matrix bar(3, 3);
  bar << b.a11, b.a12, b.abar21, b.abar22;
  EXPECT_EQ(compose_interaction_matrix(b, kZero), bar);
}

TEST(ComposeInteractionMatrix, MecanumEnergySavingAtUnitForwardSpeed) {
  const auto b = mecanum::interaction_blocks({0, 0, 0, 1, 0});
  EXPECT_EQ(compose_interaction_matrix(b, kZero), mat({{1, 0, 0}, {0, 1, 1}, {0, 1, 0}}));
}

TEST(ComposeInteractionMatrix, RejectsInconsistentBlocks) {
  auto b = scalar_blocks();
  b.a12 = mat({{0, 0}});
  EXPECT_THROW(compose_interaction_matrix(b, kOne), DimensionMismatch);
}

TEST(ComposeDrift, MecanumDriftIsZero) {
  Gen g(3);
  for (int i = 0; i < 20; ++i) {
    const auto b = mecanum::interaction_blocks(g.state());
    EXPECT_EQ(compose_drift(b, g.sigma()), Vector::Zero(3));
  }
}

TEST(ComposeDrift, SelectsLowerDrift) {
  EXPECT_EQ(compose_drift(scalar_blocks(), kOne), vec({1, 2}));
  EXPECT_EQ(compose_drift(scalar_blocks(), kZero), vec({1, 3}));
}

TEST(ComposeVirtual, SelectsLowerVirtualInput) {
  const VirtualInput<double> v{vec({1, 2}), vec({3}), vec({4})};
  EXPECT_EQ(compose_virtual(v, kOne), vec({1, 2, 3}));
  EXPECT_EQ(compose_virtual(v, kZero), vec({1, 2, 4}));
  const VirtualInput<double> zero{vec({0, 0}), vec({0}), vec({0})};
  EXPECT_EQ(compose_virtual(zero, kOne), Vector::Zero(3));
  EXPECT_EQ(compose_virtual(zero, kZero), Vector::Zero(3));
}

TEST(ControlInput, MecanumDexterousExample) {
  const auto b = mecanum::interaction_blocks({0, 0, 0, 1, 0});
  const VirtualInput<double> v{vec({1, 0}), vec({0}), vec({0})};
  const Vector u = control_input(b, v, kOne);
  EXPECT_NEAR((u - vec({1, 0, 0})).norm(), 0.0, 1e-15);
}

TEST(ControlInput, MecanumEnergySavingExample) {
  const auto b = mecanum::interaction_blocks({0, 0, 0, 1, 0});
  const VirtualInput<double> v{vec({0, 0}), vec({0}), vec({1})};
  const Vector u = control_input(b, v, kZero);
  EXPECT_NEAR((u - vec({0, 1, -1})).norm(), 0.0, 1e-15);
}

TEST(ControlInput, ZeroForwardSpeedIsSingularInEnergySavingMode) {
  const auto b = mecanum::interaction_blocks({0, 0, 0, 0, 0});
  const VirtualInput<double> v{vec({0, 0}), vec({0}), vec({1})};
  try {
    (void)control_input(b, v, kZero);
    FAIL() << "expected SingularInteractionMatrix";
  } catch (const SingularInteractionMatrix& e) {
    EXPECT_EQ(e.det(), 0.0);
    EXPECT_EQ(e.sigma(), kZero);
  }
  EXPECT_NO_THROW((void)control_input(b, v, kOne));
}

TEST(ControlInput, ToleranceIsInclusive) {
  const auto b = mecanum::interaction_blocks({0, 0, 0, 1e-6, 0});
  const VirtualInput<double> v{vec({0, 0}), vec({0}), vec({1})};
  EXPECT_THROW((void)control_input(b, v, kZero, 1e-6), SingularInteractionMatrix);
  EXPECT_NO_THROW((void)control_input(b, v, kZero, 1e-7));
}

TEST(TrackingVirtualInput, ZeroErrorIsPureFeedforward) {
  const GainSet g = mecanum::reference_gains();
  const std::vector<Vector> ref = {vec({1, 2}), vec({3, 4}), vec({5, 6})};
  const std::vector<Vector> out = {vec({1, 2}), vec({3, 4})};
  EXPECT_EQ(tracking_virtual_input(Block::Main, ref, out, g), vec({5, 6}));
}

TEST(TrackingVirtualInput, FirstOrderExample) {
  const GainSet g = mecanum::reference_gains();
  const std::vector<Vector> ref = {vec({0}), vec({0})};
  const std::vector<Vector> out = {vec({-2})};
  EXPECT_DOUBLE_EQ(tracking_virtual_input(Block::Auxiliary, ref, out, g)(0), 1.5);
}

TEST(TrackingVirtualInput, SecondOrderExample) {
  const GainSet g = mecanum::reference_gains();
  const std::vector<Vector> ref = {vec({0, 0}), vec({0, 0}), vec({0, 0})};
  const std::vector<Vector> out = {vec({1, 0}), vec({0, 1})};
  EXPECT_EQ(tracking_virtual_input(Block::Main, ref, out, g), vec({-1, -1}));
}

TEST(TrackingVirtualInput, RejectsWrongDerivativeCount) {
  const GainSet g = mecanum::reference_gains();
  const std::vector<Vector> ref = {vec({0, 0}), vec({0, 0})};
  const std::vector<Vector> out = {vec({1, 0}), vec({0, 1})};
  EXPECT_THROW(tracking_virtual_input(Block::Main, ref, out, g), DimensionMismatch);
}

TEST(ClosedLoopErrorPoles, ReferenceGains) {
  const GainSet g = mecanum::reference_gains();
  const auto p2 = closed_loop_error_poles(g, Block::Auxiliary);
  ASSERT_EQ(p2.size(), 1u);
  EXPECT_NEAR(p2[0].real(), -0.75, 1e-12);
  const auto p3 = closed_loop_error_poles(g, Block::EnergyIntense);
  ASSERT_EQ(p3.size(), 1u);
  EXPECT_NEAR(p3[0].real(), -0.65, 1e-12);

  // s^2 + s + 1 per channel, twice
  const auto p1 = closed_loop_error_poles(g, Block::Main);
  ASSERT_EQ(p1.size(), 4u);
  const double im = std::sqrt(3.0) / 2.0;
  for (const auto& s : p1) {
    EXPECT_NEAR(s.real(), -0.5, 1e-9);
    EXPECT_NEAR(std::abs(s.imag()), im, 1e-9);
  }
}

TEST(GainSet, RejectsMarginalAndUnstableGains) {
  EXPECT_THROW(GainSet::make(blocks3({Matrix::Identity(2, 2), Matrix::Identity(2, 2)}, {mat({{0}})}, {mat({{0.65}})})),
               UnstableGains);
  EXPECT_THROW(GainSet::make(blocks3({Matrix::Identity(2, 2), Matrix::Identity(2, 2)}, {mat({{0.75}})}, {mat({{-1}})})),
               UnstableGains);
  // zero damping on a second-order block puts the poles on the imaginary axis
  EXPECT_THROW(single_block_gains({Matrix::Identity(2, 2), Matrix::Zero(2, 2)}), UnstableGains);
  EXPECT_NO_THROW(GainSet::unchecked(blocks3({Matrix::Identity(2, 2), Matrix::Identity(2, 2)}, {mat({{0}})}, {mat({{0.65}})})));
}

TEST(GainSet, DimensionChecks) {
  EXPECT_THROW(GainSet::unchecked(blocks3({Matrix::Identity(2, 2), Matrix::Identity(3, 3)}, {mat({{1}})}, {mat({{1}})})),
               DimensionMismatch);
  const GainSet wrong_order = single_block_gains({Matrix::Identity(2, 2)});
  EXPECT_THROW(wrong_order.check_against(mecanum::Plant::relative_degree()), DimensionMismatch);
  EXPECT_NO_THROW(mecanum::reference_gains().check_against(mecanum::Plant::relative_degree()));
}

// ---- properties -----------------------------------------------------------

TEST(FlcCoreProperty, DeterminantIsConvexCombinationOfPureModes) {
  Gen g(11);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto p1 = g.integer(1, 3), p2 = g.integer(1, 3);
    const auto b = g.well_conditioned_blocks(p1, p2);
    Matrix full(p1 + p2, p1 + p2), bar(p1 + p2, p1 + p2);
    full << b.a11, b.a12, b.a21, b.a22;
    bar << b.a11, b.a12, b.abar21, b.abar22;
    for (const SwitchSignal s : {kZero, kOne}) {
      const double d = compose_interaction_matrix(b, s).determinant();
      const double w = s.value();
      const double expected = w * full.determinant() + (1 - w) * bar.determinant();
      EXPECT_LE(std::abs(d - expected), 1e-10 * std::max(1.0, std::abs(expected)));
    }
  }
}

TEST(FlcCoreProperty, ExactSelectionIsBitIdentical) {
  Gen g(12);
  for (int trial = 0; trial < 500; ++trial) {
    const auto b = g.well_conditioned_blocks(g.integer(1, 3), g.integer(1, 3));
    const VirtualInput<double> v{g.vector(b.p1()), g.vector(b.p2()), g.vector(b.p2())};

    InteractionBlocks<double> only_full = b, only_bar = b;
    only_full.abar21 = b.a21;
    only_full.abar22 = b.a22;
    only_full.b3 = b.b2;
    only_bar.a21 = b.abar21;
    only_bar.a22 = b.abar22;
    only_bar.b2 = b.b3;
    const VirtualInput<double> v_full{v.v1, v.v2, v.v2}, v_bar{v.v1, v.v3, v.v3};

    EXPECT_EQ(control_input(b, v, kOne), control_input(only_full, v_full, kOne));
    EXPECT_EQ(control_input(b, v, kZero), control_input(only_bar, v_bar, kZero));
    EXPECT_EQ(compose_drift(b, kOne), compose_drift(only_full, kZero));
    EXPECT_EQ(compose_virtual(v, kZero), compose_virtual(v_bar, kOne));
  }
}

TEST(FlcCoreProperty, LinearSolveResidual) {
  Gen g(13);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto b = g.well_conditioned_blocks(g.integer(1, 3), g.integer(1, 3));
    const VirtualInput<double> v{g.vector(b.p1(), 5), g.vector(b.p2(), 5), g.vector(b.p2(), 5)};
    const SwitchSignal s = g.sigma();
    const Vector u = control_input(b, v, s);
    const Vector r = compose_interaction_matrix(b, s) * u + compose_drift(b, s) - compose_virtual(v, s);
    EXPECT_LT(r.lpNorm<Eigen::Infinity>(), 1e-9);
  }
}

TEST(FlcCoreProperty, RandomStableDiagonalGainsHaveLeftHalfPlanePoles) {
  Gen g(14);
  for (int trial = 0; trial < 200; ++trial) {
    // s^2 + a s + b is Hurwitz iff a, b > 0
    const double a = g.uniform(0.1, 5), b = g.uniform(0.1, 5), l2 = g.uniform(0.05, 5), l3 = g.uniform(0.05, 5);
    const GainSet gs =
        GainSet::make(blocks3({b * Matrix::Identity(2, 2), a * Matrix::Identity(2, 2)}, {mat({{l2}})}, {mat({{l3}})}));
    for (Block j : kAllBlocks)
      for (const auto& p : closed_loop_error_poles(gs, j)) EXPECT_LT(p.real(), 0.0);
    EXPECT_NEAR(closed_loop_error_poles(gs, Block::Auxiliary)[0].real(), -l2, 1e-12);
  }
}

TEST(FlcCoreProperty, TrackingLawIsAffineInOutputDerivatives) {
  Gen g(15);
  const GainSet gs = mecanum::reference_gains();
  for (int trial = 0; trial < 500; ++trial) {
    const std::vector<Vector> ref = {g.vector(2), g.vector(2), g.vector(2)};
    const std::vector<Vector> a = {g.vector(2), g.vector(2)}, b = {g.vector(2), g.vector(2)};
    const double alpha = g.uniform(-2, 2);
    std::vector<Vector> mix = {alpha * a[0] + (1 - alpha) * b[0], alpha * a[1] + (1 - alpha) * b[1]};
    const Vector lhs = tracking_virtual_input(Block::Main, ref, mix, gs);
    const Vector rhs = alpha * tracking_virtual_input(Block::Main, ref, a, gs) +
                       (1 - alpha) * tracking_virtual_input(Block::Main, ref, b, gs);
    EXPECT_LT((lhs - rhs).lpNorm<Eigen::Infinity>(), 1e-12);
  }
}

TEST(SwitchedTrackingController, SolutionReproducesVirtualInputs) {
  Gen g(16);
  const mecanum::UnifiedController ctrl(mecanum::Plant{}, mecanum::reference_gains());
  for (int trial = 0; trial < 300; ++trial) {
    auto s = g.state();
    s.v1 = std::copysign(std::max(std::abs(s.v1), 0.1), s.v1);
    const BlockDerivatives ref = {std::vector<Vector>{g.vector(2), g.vector(2), g.vector(2)},
                                  std::vector<Vector>{g.vector(1), g.vector(1)},
                                  std::vector<Vector>{g.vector(1), g.vector(1)}};
    const SwitchSignal sigma = g.sigma();
    const auto eval = ctrl.evaluate(s, ref, sigma);
    const Vector lhs = compose_interaction_matrix(mecanum::interaction_blocks(s), sigma) * eval.u;
    EXPECT_LT((lhs - compose_virtual(eval.virtual_input, sigma)).norm(), 1e-9);
    EXPECT_NEAR(eval.det, mecanum::det_sigma(s, sigma), 1e-12);
  }
}
