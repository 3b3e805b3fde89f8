#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "test_support.hpp"
#include "ubhp/errors.hpp"
#include "ubhp/potential.hpp"

using namespace ubhp;
using namespace ubhp::testing;

namespace {

constexpr double kPi = std::numbers::pi;

ProcessModel stable(double alpha, int d = 1) {
  ProcessModel m;
  m.d = d;
  m.sub.phi = PhiModel(StablePower{alpha});
  return m;
}

ExitParams wos() {
  ExitParams p;
  p.strategy = ExitStrategy::WosStable;
  return p;
}

/// Mass of the 1-d Cauchy exit law from the center of B(0,1) on a < |y| < b.
double cauchy_shell_mass(double a, double b) { return 2.0 * (std::acos(1.0 / b) - std::acos(1.0 / a)) / kPi; }

}  // namespace

TEST(KernelBins, IndexAndVolume) {
  const KernelBins b = KernelBins::shells(Point{0.0, 0.0}, 1.0, 0.01, 10.0, 8, 4);
  EXPECT_EQ(b.size(), 32u);
  EXPECT_EQ(b.index(Point{1.001, 0.0}), -1);
  EXPECT_EQ(b.index(Point{20.0, 0.0}), -2);
  double total = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k) total += b.volume(k);
  // Annulus between 1.01 and 10.
  EXPECT_NEAR(total, kPi * (100.0 - 1.01 * 1.01), 1e-9 * total);
  for (std::size_t k = 0; k < b.size(); ++k) {
    const double rad = b.radius(k);
    // Sectors are counted from the negative x axis, counterclockwise.
    const double ang = -kPi + (b.angle_of(k) + 0.5) * 2.0 * kPi / 4.0;
    EXPECT_EQ(b.index(Point{rad * std::cos(ang), rad * std::sin(ang)}), static_cast<long>(k));
  }
}

TEST(KernelEstimate, CauchyShellAtSqrtTwo) {
  const ProcessModel m = stable(1.0);
  const KernelBins bins = KernelBins::shells(Point{0.0}, 1.0, 1e-3, 100.0, 24, 1);
  const KernelEstimate k = kernel_estimate(m, Geometry::ball(Point{0.0}, 1.0), Point{0.0}, bins, 1000000, 3, wos());
  std::size_t hit = bins.size();
  for (std::size_t i = 0; i < bins.size(); ++i)
    if (1.0 + bins.s_edges[i] <= std::sqrt(2.0) && std::sqrt(2.0) < 1.0 + bins.s_edges[i + 1]) hit = i;
  ASSERT_LT(hit, bins.size());
  const double a = 1.0 + bins.s_edges[hit], b = 1.0 + bins.s_edges[hit + 1];
  const double exact = cauchy_shell_mass(a, b) / bins.volume(hit);
  EXPECT_NEAR(k.density[hit], exact, 3.0 * k.stderr_[hit]);
  // The pointwise density at sqrt 2 lies within the shell's range of values.
  const double point = 1.0 / (kPi * std::sqrt(2.0));
  EXPECT_NEAR(exact, point, 0.2 * point);
  EXPECT_NEAR(k.mass(), 1.0, 1e-12);
}

TEST(KernelEstimate, BinsMatchClosedFormEverywhere) {
  const ProcessModel m = stable(1.0);
  const KernelBins bins = KernelBins::shells(Point{0.0}, 1.0, 1e-2, 50.0, 10, 1);
  const KernelEstimate k = kernel_estimate(m, Geometry::ball(Point{0.0}, 1.0), Point{0.0}, bins, 200000, 4, wos());
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const double exact = cauchy_shell_mass(1.0 + bins.s_edges[i], 1.0 + bins.s_edges[i + 1]) / bins.volume(i);
    EXPECT_NEAR(k.density[i], exact, 4.0 * k.stderr_[i] + 1e-12) << i;
  }
  std::ostringstream os;
  k.write_csv(os);
  EXPECT_EQ(os.str().rfind("# columns:", 0), 0u);
}

TEST(HarmonicMeasure, ComplementAndHalfLine) {
  const ProcessModel m = stable(1.0);
  const Geometry ball = Geometry::ball(Point{0.0}, 1.0);
  const HarmonicEstimate all = harmonic_eval(m, ball, TargetSet::everything(), Point{0.3}, 5000, 5, wos());
  EXPECT_EQ(all.value, 1.0);
  const HarmonicEstimate right =
      harmonic_eval(m, ball, TargetSet::halfspace(Point{0.0}, Point{1.0}), Point{0.0}, 200000, 6, wos());
  EXPECT_NEAR(right.value, 0.5, 3.0 * right.stderr_);
}

TEST(HarmonicMeasure, MeanValueOverSmallerBall) {
  // u(x) = E u(X at the exit of a smaller concentric ball).
  ProcessModel m;
  m.d = 2;
  m.sub.phi = PhiModel(Mixture{{{1.0, 1.0}, {1.0, 0.6}}});
  const ExitParams ep = default_exit_params(m);
  const ExitSampler inner(m, Geometry::ball(Point{0.0, 0.0}, 0.5), ep);
  const ExitSampler outer(m, Geometry::ball(Point{0.0, 0.0}, 1.0), ep);
  const TargetSet A = TargetSet::outside_ball_halfspace(Point{0.0, 0.0}, 1.5, Point{1.0, 0.0});
  const HarmonicEstimate two = harmonic_from_batch(run_two_stage_batch(inner, outer, Point{0.1, 0.0}, 20000, 7), A);
  const HarmonicEstimate direct = harmonic_from_batch(run_exit_batch(outer, Point{0.1, 0.0}, 20000, 8), A);
  EXPECT_NEAR(two.value, direct.value, 3.0 * std::hypot(two.stderr_, direct.stderr_));
}

TEST(HarmonicMeasure, SymmetricTargetIsSymmetric) {
  const ProcessModel m = stable(1.2, 2);
  const Geometry ball = Geometry::ball(Point{0.0, 0.0}, 1.0);
  const TargetSet far = TargetSet::outside_ball(Point{0.0, 0.0}, 2.0);
  const HarmonicEstimate a = harmonic_eval(m, ball, far, Point{0.4, 0.0}, 100000, 9, wos());
  const HarmonicEstimate b = harmonic_eval(m, ball, far, Point{-0.4, 0.0}, 100000, 10, wos());
  EXPECT_NEAR(a.value / b.value, 1.0, 3.0 * std::hypot(a.stderr_ / a.value, b.stderr_ / b.value));
}

TEST(Targets, ParseAndDescribeRoundTrip) {
  for (const char* s : {"complement", "right", "far:2", "right_far:1", "left_far:1.5"}) {
    const TargetSpec t = TargetSpec::parse(s);
    EXPECT_EQ(TargetSpec::parse(t.describe()).describe(), t.describe()) << s;
  }
  EXPECT_THROW(TargetSpec::parse("up"), DomainError);
  const TargetSet rf = TargetSpec::parse("right_far:1").resolve(Point{0.0}, 0.5);
  EXPECT_TRUE(rf.contains(Point{0.6}));
  EXPECT_FALSE(rf.contains(Point{-0.6}));
  EXPECT_FALSE(rf.contains(Point{0.4}));
}

TEST(Generator, CauchyPoissonKernelClosedForm) {
  // f = (1 + |y|^2)^{-(d+1)/2} is the Cauchy semigroup density at time 1 up to
  // a constant, so L f = d/dt P_t at t = 1: (|y|^2 - d) / (1 + |y|^2)^{(d+3)/2}.
  for (int d : {1, 2, 3}) {
    const RadialKernelTable t(stable(1.0, d), 1e-6, 1e6, 16);
    auto f = [d](const Point& y) { return std::pow(1 + y.dot(y), -(d + 1) / 2.0); };
    for (double s : {0.0, 0.5, 2.0}) {
      Point x(d);
      x[0] = s;
      const double exact = (s * s - d) / std::pow(1 + s * s, (d + 3) / 2.0);
      EXPECT_NEAR(generator_apply(t, f, x), exact, 1e-6 * std::abs(exact)) << "d=" << d << " s=" << s;
    }
    EXPECT_NEAR(generator_apply(t, [](const Point&) { return 3.0; }, Point(d)), 0.0, 1e-9);
  }
}

TEST(Generator, CosineEigenfunction) {
  // L cos(.) = -Psi(1) cos(.) with Psi(1) = 1 for the Cauchy process.
  const RadialKernelTable t(stable(1.0), 1e-6, 1e6, 16);
  EXPECT_NEAR(generator_apply(t, [](const Point& y) { return std::cos(y[0]); }, Point{0.0}, 1e-4), -1.0, 1e-3);
}

TEST(Generator, RescaledBumpEnvelopeHasOneConstant) {
  const ProcessModel m = stable(1.0, 2);
  const RadialKernelTable table(m, 1e-6, 1e6, 16);
  const double b0 = generator_tail_mass(table, 1.0);
  // b0 = 2 * 2 pi int_1^inf r c / r^3 dr with c = 1 / (2 pi) for d = 2, alpha = 1.
  EXPECT_NEAR(b0, 2.0 * jx_density(m, 1.0) * 2.0 * kPi, 1e-3 * b0);
  const double L1 = 2.0;  // sup of |second derivatives| of exp(-|y|^2)
  std::vector<double> c;
  for (double r : {0.01, 0.03, 0.1, 0.3, 1.0}) {
    auto f = [r](const Point& y) { return std::exp(-(y[0] * y[0] + y[1] * y[1]) / (r * r)); };
    double worst = 0.0;
    for (double s : {0.0, 0.5, 1.0, 2.0}) worst = std::max(worst, std::abs(generator_apply(table, f, Point{s * r, 0.0})));
    c.push_back(worst / (m.sub.phi(1.0 / (r * r)) * (2.0 + L1 / 2.0) + b0));
  }
  EXPECT_LT(spread(c), 2.0);
}

TEST(Harnack, TrivialTargetGivesOne) {
  HarnackParams p;
  p.targets = {TargetSpec::parse("complement")};
  p.n = 2000;
  const ExperimentReport rep = harnack_experiment(stable(1.0), Point{0.0}, p);
  EXPECT_EQ(rep.status, Status::Pass);
  EXPECT_EQ(rep.constants.at("harnack_max"), 1.0);
}

TEST(Harnack, StableConstantIsScaleInvariant) {
  HarnackParams p;
  p.radii = {0.25, 0.5, 0.75};
  p.targets = {TargetSpec::parse("right")};
  p.n = 20000;
  const ExperimentReport rep = harnack_experiment(stable(1.0), Point{0.0}, p);
  std::vector<double> c;
  for (const auto& [k, v] : rep.constants)
    if (k != "harnack_max") c.push_back(v);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_LT(spread(c), 1.2);
  EXPECT_THROW(harnack_experiment(stable(1.0), Point{0.0}, HarnackParams{{1.5}}), DomainError);
}

TEST(Factorization, HalvingTheScaleKeepsTheConstant) {
  const Point z0{0.0, 0.0};
  const Geometry D = Geometry::halfspace_cap_ball(z0, 1.0, Point{1.0, 0.0});
  FactorizationParams p;
  p.n = 5000;
  const ProcessModel m = stable(1.0, 2);
  const ExperimentReport a = factorization_experiment(m, D, z0, 0.5, p);
  const ExperimentReport b = factorization_experiment(m, D, z0, 0.25, p);
  const double ca = a.constants.at("C"), cb = b.constants.at("C");
  ASSERT_TRUE(std::isfinite(ca) && std::isfinite(cb));
  EXPECT_LT(std::max(ca, cb) / std::min(ca, cb), 2.0);
}

TEST(BoundaryHarnack, EqualTargetsGiveOneAndSwapIsInvariant) {
  const ProcessModel m = stable(1.0, 2);
  const auto sets = standard_open_sets(2, Point{0.0, 0.0});
  BhpParams p;
  p.n = 3000;
  p.a1 = TargetSpec::parse("right_far:1");
  p.a2 = p.a1;
  const ExperimentReport same = bhp_experiment(m, sets[0].geometry, Point{0.0, 0.0}, 0.25, p);
  EXPECT_EQ(same.constants.at("bhp_harmonic"), 1.0);
  p.a2 = TargetSpec::parse("left_far:1");
  const ExperimentReport rep = bhp_experiment(m, sets[0].geometry, Point{0.0, 0.0}, 0.25, p);
  EXPECT_NEAR(rep.constants.at("bhp_harmonic"), rep.constants.at("bhp_harmonic_swapped"),
              1e-12 * rep.constants.at("bhp_harmonic"));
  EXPECT_TRUE(std::isfinite(rep.constants.at("bhp_harmonic")));
  EXPECT_TRUE(std::isfinite(rep.constants.at("bhp_kernel")));
}

TEST(BoundaryHarnack, BallDomainGivesFiniteConstants) {
  const ProcessModel m = stable(1.0, 2);
  BhpParams p;
  p.n = 3000;
  const Geometry D = Geometry::ball(Point{1.0, 0.0}, 1.0);
  const ExperimentReport rep = bhp_experiment(m, D, Point{0.0, 0.0}, 0.25, p);
  EXPECT_TRUE(std::isfinite(rep.constants.at("bhp_harmonic")));
  EXPECT_TRUE(std::isfinite(rep.constants.at("bhp_kernel")));
}

TEST(OpenSets, StandardFamilyHasBoundaryPointAtZ0) {
  const Point z0{0.0, 0.0, 0.0};
  const auto sets = standard_open_sets(3, z0);
  ASSERT_EQ(sets.size(), 3u);
  for (const auto& s : sets) {
    EXPECT_FALSE(s.geometry.contains(z0)) << s.name;
    EXPECT_TRUE(s.geometry.contains(s.geometry.witness())) << s.name;
    // Points just inside along e_1 belong to the set.
    EXPECT_TRUE(s.geometry.contains(Point{0.05, 0.0, 0.0})) << s.name;
  }
  EXPECT_EQ(select_open_sets(sets, {"slit_ball"}).size(), 1u);
  EXPECT_THROW(select_open_sets(sets, {"torus"}), DomainError);
}

TEST(SeedStability, ComparesSharedConstants) {
  EXPECT_EQ(seed_stability({{"C", 1.0}, {"D", 2.0}}, {{"C", 1.2}, {"D", 2.0}}, 0.25).status, Status::Pass);
  EXPECT_EQ(seed_stability({{"C", 1.0}}, {{"C", 1.3}}, 0.25).status, Status::Fail);
  EXPECT_EQ(seed_stability({{"C", 1.0}}, {{"E", 1.0}}, 0.25).status, Status::Fail);
}

TEST(Spread, Definition) {
  EXPECT_EQ(spread({1.0, 2.0, 4.0}), 4.0);
  EXPECT_TRUE(std::isinf(spread({1.0, 0.0})));
  EXPECT_TRUE(std::isinf(spread({1.0, std::nan("")})));
}

TEST(ExitParamsDefault, StrategyByModel) {
  EXPECT_EQ(default_exit_params(stable(1.0)).strategy, ExitStrategy::WosStable);
  ProcessModel m = stable(1.0);
  m.gamma = 2;
  m.modulation.kind = Modulation::Kind::Constant;
  m.modulation.value = 2;
  EXPECT_EQ(default_exit_params(m).strategy, ExitStrategy::Timestep);
}
