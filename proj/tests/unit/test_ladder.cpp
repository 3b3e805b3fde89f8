#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "test_support.hpp"
#include "ubhp/errors.hpp"
#include "ubhp/ladder.hpp"
#include "ubhp/sim.hpp"

using namespace ubhp;
using ubhp::testing::rel_diff;

namespace {

ProcessModel stable(double alpha, int d = 1) {
  ProcessModel m;
  m.d = d;
  m.sub.phi = PhiModel(StablePower{alpha});
  return m;
}

LadderExponent power_kappa(double a) {
  return LadderExponent::from_kappa([a](double l) { return std::pow(l, a); }, "power");
}

}  // namespace

TEST(Kappa, CauchyExponent) {
  const LadderExponent ladder = LadderExponent::from_exponent([](double t) { return t; }, "cauchy");
  EXPECT_NEAR(kappa_eval(ladder, 4.0), 2.0, 2e-4);
}

TEST(Kappa, PowerExponents) {
  for (double a : {0.3, 0.5, 0.7}) {
    const LadderExponent ladder =
        LadderExponent::from_exponent([a](double t) { return std::pow(t, 2 * a); }, "power");
    for (double l : log_grid(1e-2, 1e4, 2)) EXPECT_LT(rel_diff(kappa_eval(ladder, l), std::pow(l, a)), 1e-4) << a;
    EXPECT_NEAR(kappa_eval(ladder, 1.0), 1.0, 1e-4);
  }
}

TEST(Kappa, IncreasingAndComparableForShippedModels) {
  std::vector<PhiModel> models{PhiModel(StablePower{1.0}), PhiModel(Mixture{{{1.0, 1.0}, {1.0, 0.8}}}),
                               PhiModel(SectionSix{section6_build_f(4, 0.05)})};
  for (const auto& phi : models) {
    const LadderExponent ladder = LadderExponent::from_phi(phi);
    const auto grid = log_grid(1e-2, 1e4, 3);
    const RatioProfile p = kappa_comparability_check(ladder, phi, grid);
    EXPECT_TRUE(p.well_formed());
    EXPECT_LE(p.max, 3.0) << phi.kind();
    EXPECT_GE(p.min, 1.0 / 3.0) << phi.kind();
    double prev = 0.0;
    for (double l : grid) {
      const double k = kappa_eval(ladder, l);
      EXPECT_GT(k, prev);
      prev = k;
    }
  }
}

TEST(Renewal, SquareRootKappa) {
  const LadderExponent ladder = power_kappa(0.5);
  const double v1 = renewal_V(ladder, 1.0);
  EXPECT_NEAR(v1, 2.0 / std::sqrt(std::numbers::pi), 1e-3);
  EXPECT_NEAR(renewal_V(ladder, 4.0) / v1, 2.0, 1e-3);
  EXPECT_LT(renewal_V(ladder, 1e-8), 1e-3);
}

TEST(Renewal, PowerKappaClosedForms) {
  for (double a : {0.3, 0.5, 0.7}) {
    const LadderExponent ladder = power_kappa(a);
    for (double r : log_grid(1e-2, 1e2, 3))
      EXPECT_LT(rel_diff(renewal_V(ladder, r), std::pow(r, a) / std::tgamma(1.0 + a)), 1e-3) << a << " " << r;
  }
}

TEST(Renewal, PostWidderAgrees) {
  const LadderExponent ladder = power_kappa(0.5);
  EXPECT_LT(rel_diff(renewal_V(ladder, 1.0, InversionMethod::PostWidder), 2.0 / std::sqrt(std::numbers::pi)), 2e-2);
}

TEST(Renewal, TableIncreasingFromZero) {
  const RenewalFunction V(LadderExponent::from_phi(PhiModel(StablePower{1.0})), 1e-4, 1e2, 200);
  EXPECT_EQ(V(0.0), 0.0);
  double prev = 0.0;
  for (double r : V.grid()) {
    EXPECT_GT(V(r), prev);
    prev = V(r);
  }
}

TEST(RenewalComparability, Profiles) {
  const RatioProfile s = renewal_comparability_check(stable(1.0), log_grid(1e-3, 1e2, 3));
  for (double v : s.ratio) EXPECT_NEAR(v, 2.0 / std::sqrt(std::numbers::pi), 0.01 * 2.0 / std::sqrt(std::numbers::pi));

  ProcessModel mix;
  mix.sub.phi = PhiModel(Mixture{{{1.0, 1.0}, {1.0, 0.8}}});
  EXPECT_LE(renewal_comparability_check(mix, log_grid(1e-3, 10.0, 3)).spread(), 5.0);

  ProcessModel six;
  six.sub.phi = PhiModel(SectionSix{section6_build_f(4, 0.05)});
  EXPECT_LE(renewal_comparability_check(six, log_grid(1e-3, 1e2, 3)).spread(), 10.0);
}

TEST(HalfLineGreen, ZeroFunction) {
  const RenewalFunction V(power_kappa(0.5), 1e-6, 1e4, 1000);
  EXPECT_EQ(halfline_green_apply(V, 0.5, [](double) { return 0.0; }).value, 0.0);
}

TEST(HalfLineGreen, IntervalBoundAndMonotonicity) {
  const RenewalFunction V(power_kappa(0.5), 1e-6, 1e4, 1000);
  const double r = 1.0;
  auto ind = [r](double y) { return y > 0.0 && y < r ? 1.0 : 0.0; };
  auto half = [r](double y) { return y > 0.0 && y < r / 2 ? 1.0 : 0.0; };
  for (double x : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    const double g = halfline_green_apply(V, x, ind, 1e-2).value;
    EXPECT_LE(g, 2.0 * V(r) * std::min(V(x), V(r - x)) * (1 + 1e-9)) << x;
    EXPECT_LE(halfline_green_apply(V, x, half, 1e-2).value, g * (1 + 1e-12));
  }
}

TEST(HalfLineGreen, DominatesIntervalExitTime) {
  // E_x tau_(0,1) from the midpoint is 1/2 for the Cauchy process and the
  // half-line quantity can only be larger.
  const RenewalFunction V(power_kappa(0.5), 1e-6, 1e4, 1000);
  const double g = halfline_green_apply(V, 0.5, [](double y) { return y > 0.0 && y < 1.0 ? 1.0 : 0.0; }, 1e-2).value;
  EXPECT_NEAR(stable_ball_exit_time(1.0, 1, 0.5, 0.0), 0.5, 1e-12);
  ExitParams p;
  p.strategy = ExitStrategy::Timestep;
  const ExitTimeEstimate mc = expected_exit_time(stable(1.0), Geometry::ball(Point{0.5}, 0.5), Point{0.5}, 20000, 9, p);
  EXPECT_NEAR(mc.estimate, 0.5, 3.0 * mc.stderr_ + 0.01);
  EXPECT_LE(mc.estimate, g + 3.0 * mc.stderr_);
}

TEST(IntervalExitBound, CauchyHoldsAndIsSymmetric) {
  IntervalCheckParams p;
  p.n = 20000;
  p.seed = 3;
  const ExperimentReport rep = interval_exit_bound_check(stable(1.0), 1.0, {1e-3, 0.25, 0.5, 0.75}, p);
  EXPECT_EQ(rep.status, Status::Pass);
  ASSERT_EQ(rep.rows.size(), 4u);
  const auto& r0 = rep.rows[0].values;
  EXPECT_LT(r0[1], 0.05);
  const auto& a = rep.rows[1].values;
  const auto& b = rep.rows[3].values;
  EXPECT_LE(std::abs(a[1] - b[1]), 3.0 * std::hypot(a[2], b[2]));
  // Bound at the midpoint from closed forms.
  EXPECT_NEAR(rep.rows[2].values[3], 2.0 * (2.0 / std::sqrt(std::numbers::pi)) * (2.0 * std::sqrt(0.5 / std::numbers::pi)),
              0.02);
}
