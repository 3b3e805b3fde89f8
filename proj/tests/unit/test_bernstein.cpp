#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "test_support.hpp"
#include "ubhp/bernstein.hpp"
#include "ubhp/errors.hpp"

using namespace ubhp;
using ubhp::testing::rel_diff;

namespace {

PhiModel mixture(std::vector<MixtureTerm> terms) { return PhiModel(Mixture{std::move(terms)}); }

SectionSix degenerate_schedule() {
  SectionSix s;
  s.schedule = PiecewiseSchedule::power_law(0.5);
  return s;
}

SectionSix full_schedule() {
  SectionSix s;
  s.schedule = section6_build_f(4, 0.05);
  return s;
}

/// Random stable and mixture models for property tests.
std::vector<PhiModel> generated_models(int count, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> alpha(0.05, 1.95), weight(0.1, 5.0);
  std::vector<PhiModel> out;
  for (int i = 0; i < count; ++i) {
    if (i % 2 == 0) {
      out.emplace_back(StablePower{alpha(rng)});
    } else {
      Mixture m;
      const int k = 2 + i % 3;
      for (int j = 0; j < k; ++j) m.terms.push_back({weight(rng), alpha(rng)});
      out.emplace_back(m);
    }
  }
  return out;
}

}  // namespace

TEST(PhiEval, StableValues) {
  const PhiModel phi(StablePower{1.0});
  EXPECT_DOUBLE_EQ(phi_eval(phi, 4.0), 2.0);
  EXPECT_DOUBLE_EQ(phi_eval(phi, 1.0), 1.0);
}

TEST(PhiEval, MixtureValue) {
  // 16^{1/2} + 16^{2/5} = 4 + 2^{8/5}, evaluated in long double.
  const long double expected = 4.0L + std::pow(2.0L, 1.6L);
  EXPECT_NEAR(phi_eval(mixture({{1, 1.0}, {1, 0.8}}), 16.0), static_cast<double>(expected), 1e-13);
  EXPECT_NEAR(phi_eval(mixture({{1, 1.0}, {1, 0.8}}), 16.0), 7.0314, 1e-3);
}

TEST(PhiEval, RejectsNonpositiveLambda) {
  const PhiModel phi(StablePower{1.0});
  EXPECT_THROW(phi_eval(phi, 0.0), DomainError);
  EXPECT_THROW(phi_eval(phi, -1.0), DomainError);
}

TEST(PhiEval, TabulatedOutsideHullIsAnError) {
  const PhiModel tab = PhiModel(StablePower{1.0}).tabulate(1e-2, 1e2, 20);
  EXPECT_NEAR(tab(3.7), std::sqrt(3.7), 1e-9);
  EXPECT_THROW(tab(1e3), ExtrapolationError);
  EXPECT_THROW(tab(1e-3), ExtrapolationError);
}

TEST(PhiModelProperties, PositiveIncreasingConcaveDriftFree) {
  const auto grid = log_grid(1e-6, 1e6, 8);
  auto models = generated_models(12, 17);
  models.emplace_back(full_schedule());
  for (const auto& phi : models) {
    std::vector<double> v;
    for (double l : grid) v.push_back(phi(l));
    double prev_slope = INFINITY;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      ASSERT_GT(v[i], 0.0) << phi.kind();
      if (i == 0) continue;
      ASSERT_GT(v[i], v[i - 1] * (1.0 - 1e-9)) << phi.kind() << " at " << grid[i];
      const double slope = (v[i] - v[i - 1]) / (grid[i] - grid[i - 1]);
      ASSERT_LE(slope, prev_slope * (1.0 + 1e-9)) << phi.kind() << " at " << grid[i];
      prev_slope = slope;
    }
    // No drift: phi(lambda) / lambda strictly decreases.
    for (std::size_t i = 1; i < grid.size(); ++i)
      ASSERT_LT(v[i] / grid[i], v[i - 1] / grid[i - 1]) << phi.kind() << " at " << grid[i];
  }
}

TEST(GlobalBernstein, StableExamples) {
  const PhiModel phi(StablePower{1.0});
  const RatioProfile p = global_bernstein_check(phi, {1.0}, {1.0, 4.0});
  EXPECT_DOUBLE_EQ(p.ratio[0], 1.0);
  EXPECT_DOUBLE_EQ(p.ratio[1], 0.5);
}

TEST(GlobalBernstein, HoldsForGeneratedModels) {
  const auto t = log_grid(1e-4, 1e4, 4);
  const auto l = log_grid(1.0, 1e4, 4);
  for (const auto& phi : generated_models(10, 5)) {
    const RatioProfile p = global_bernstein_check(phi, t, l);
    EXPECT_LE(p.max, 1.0 + 1e-9);
    for (std::size_t i = 0; i < p.size(); ++i)
      if (p.argument2[i] == 1.0) EXPECT_DOUBLE_EQ(p.ratio[i], 1.0);
  }
}

TEST(GlobalBernstein, ConstructedSchedule) {
  const RatioProfile p =
      global_bernstein_check(PhiModel(full_schedule()), log_grid(1e-3, 1e3, 3), log_grid(1.0, 1e3, 3));
  EXPECT_LE(p.max, 1.0 + 1e-9);
}

TEST(ScalingCertificate, StableIsExact) {
  const ScalingCertificate c = scaling_certificate(PhiModel(StablePower{1.0}), 1.0);
  EXPECT_NEAR(c.delta1, 0.5, 1e-6);
  EXPECT_NEAR(c.delta2, 0.5, 1e-6);
  EXPECT_NEAR(c.a1, 1.0, 1e-6);
  EXPECT_NEAR(c.a2, 1.0, 1e-6);
  EXPECT_TRUE(c.pass);
}

TEST(ScalingCertificate, StableIndicesAreHalfAlpha) {
  for (double alpha : {0.2, 0.7, 1.0, 1.3, 1.9}) {
    const ScalingCertificate c = scaling_certificate(PhiModel(StablePower{alpha}), 1.0);
    EXPECT_NEAR(c.delta1, alpha / 2, 1e-3);
    EXPECT_NEAR(c.delta2, alpha / 2, 1e-3);
  }
}

TEST(ScalingCertificate, MixtureMatchesFineScan) {
  const PhiModel phi = mixture({{1, 1.0}, {1, 0.8}});
  ScalingGrid grid;
  grid.r_max = 1e14;
  const double R0 = 1e7;
  const ScalingCertificate c = scaling_certificate(phi, R0, grid);
  EXPECT_GE(c.delta1, 0.39);
  EXPECT_LE(c.delta1, 0.41);
  EXPECT_GE(c.delta2, 0.49);
  EXPECT_LE(c.delta2, 0.51);
  EXPECT_LE(c.delta1, c.delta2);

  // Brute-force scan on a ten times finer grid of log phi.
  const int ppd = 500;
  const double lo = 1.0 / (R0 * R0);
  const auto x = log_grid(lo, grid.r_max * grid.lambda_max, ppd);
  std::vector<double> lp;
  for (double v : x) lp.push_back(std::log(phi(v)));
  const double step = std::log(10.0) / ppd;
  const std::size_t r_count = static_cast<std::size_t>(std::lround(std::log10(grid.r_max / lo) * ppd)) + 1;
  const std::size_t l_min = static_cast<std::size_t>(std::ceil(std::log(2.0) / step));
  const std::size_t l_max = static_cast<std::size_t>(std::lround(std::log10(grid.lambda_max) * ppd));
  double d1 = INFINITY, d2 = -INFINITY;
  for (std::size_t i = 0; i < r_count; ++i)
    for (std::size_t k = l_min; k <= l_max && i + k < x.size(); ++k) {
      const double idx = (lp[i + k] - lp[i]) / (k * step);
      d1 = std::min(d1, idx);
      d2 = std::max(d2, idx);
    }
  EXPECT_NEAR(c.delta1, d1, 2e-3);
  EXPECT_NEAR(c.delta2, d2, 2e-3);
}

TEST(ScalingCertificate, BoundsHoldOnGridForGeneratedModels) {
  for (const auto& phi : generated_models(6, 23)) {
    ScalingGrid grid;
    grid.per_decade = 20;
    const ScalingCertificate c = scaling_certificate(phi, 1.0, grid);
    ASSERT_TRUE(c.pass);
    ASSERT_LE(c.delta1, c.delta2);
    for (double r : log_grid(1.0, grid.r_max, 5))
      for (double l : log_grid(1.0, grid.lambda_max, 5)) {
        const double ratio = phi(l * r) / phi(r);
        EXPECT_GE(ratio, c.a1 * std::pow(l, c.delta1) * (1.0 - 1e-9));
        EXPECT_LE(ratio, c.a2 * std::pow(l, c.delta2) * (1.0 + 1e-9));
      }
  }
}

TEST(ScalingCertificate, RejectsDecreasingFunction) {
  EXPECT_THROW(scaling_certificate(PhiModel(Tabulated({1e-9, 1.0, 1e5, 1e20}, {4.0, 3.0, 2.0, 1.0})), 1.0),
               ModelError);
}

TEST(Schedule, SinglePieceIsSquareRoot) {
  const PiecewiseSchedule s = section6_build_f(1, 0.05);
  EXPECT_EQ(s.pieces(), 1u);
  for (double x : {0.01, 1.0, 2.0}) EXPECT_NEAR(s(x), std::sqrt(x), 1e-15);
}

TEST(Schedule, ContinuousAtTwo) {
  const PiecewiseSchedule s = section6_build_f(4, 0.05);
  EXPECT_NEAR(s(2.0), std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(s(2.0 * (1.0 + 1e-12)), std::sqrt(2.0), 1e-10);
  EXPECT_NEAR(s.piece_value(1, 2.0), std::pow(2.0, 1.0 / 3.0) + std::sqrt(2.0) - std::pow(2.0, 1.0 / 3.0), 1e-14);
}

TEST(Schedule, BreakpointsMeetClosenessByIndependentScan) {
  const double eps = 0.05;
  const PiecewiseSchedule s = section6_build_f(4, eps);
  ASSERT_EQ(s.breakpoints.size(), 3u);
  const double a1 = s.breakpoints[1];
  EXPECT_GE(a1, 20.0);
  const double k = 1.0;  // piece index of the first 1/3 piece
  EXPECT_NEAR(s.piece_value(1, 2.0 * a1) / s(a1), std::pow(2.0, 1.0 / 3.0), eps);
  for (std::size_t piece = 1; piece < s.pieces() - 1; ++piece) {
    const double top = s.breakpoints[piece];
    const double beta = s.exponents[piece];
    double worst = 0.0;
    for (int i = 0; i <= 60; ++i)
      for (int j = 0; j <= 60; ++j) {
        const double x = top / 10.0 * std::pow(10.0, i / 60.0);
        const double l = std::pow(piece + k, j / 60.0);
        worst = std::max(worst, std::abs(s.piece_value(piece, l * x) / s.piece_value(piece, x) - std::pow(l, beta)));
      }
    EXPECT_LE(worst, eps * 1.02) << "piece " << piece;
  }
  // Continuous and increasing across every breakpoint.
  for (double b : s.breakpoints) {
    EXPECT_NEAR(s(b * (1 + 1e-12)) / s(b), 1.0, 1e-9);
    EXPECT_GT(s(b * 1.001), s(b));
  }
}

TEST(Schedule, InvalidEpsilon) {
  EXPECT_THROW(section6_build_f(4, 0.0), DomainError);
  EXPECT_THROW(section6_build_f(4, 0.3), DomainError);
  EXPECT_THROW(section6_build_f(0, 0.05), DomainError);
}

TEST(StieltjesG, DegenerateClosedForm) {
  const SectionSix s = degenerate_schedule();
  EXPECT_NEAR(stieltjes_g(s.schedule, 1.0), std::numbers::pi / 2, 1e-9);
  EXPECT_NEAR(stieltjes_g(s.schedule, 4.0), std::numbers::pi / 4, 1e-9);
  for (double l : log_grid(1e-2, 1e4, 10))
    EXPECT_LT(rel_diff(stieltjes_g(s.schedule, l), std::numbers::pi / (2 * std::sqrt(l))), 1e-5) << l;
}

TEST(StieltjesG, DecreasingForFullSchedule) {
  const SectionSix s = full_schedule();
  double prev = INFINITY;
  for (double l : log_grid(1e-3, 1e9, 6)) {
    const double g = stieltjes_g(s.schedule, l);
    EXPECT_LT(g, prev);
    prev = g;
  }
  EXPECT_THROW(stieltjes_g(s.schedule, 0.0), DomainError);
}

TEST(Section6Phi, DegenerateSchedule) {
  const SectionSix s = degenerate_schedule();
  EXPECT_NEAR(section6_phi(s, 1.0), std::numbers::pi / 2, 1e-9);
  for (double l : log_grid(1e-3, 1e3, 4)) EXPECT_NEAR(section6_phi(s, l) / std::sqrt(l), std::numbers::pi / 2, 1e-8);
}

TEST(Section6Phi, BoundedByPowersOnLargeLambda) {
  const SectionSix s = full_schedule();
  double c1 = INFINITY, c2 = 0.0;
  for (double l : log_grid(2.0, 1e6, 10)) {
    const double p = section6_phi(s, l);
    c1 = std::min(c1, p / std::cbrt(l));
    c2 = std::max(c2, p / std::sqrt(l));
  }
  EXPECT_TRUE(std::isfinite(c1) && c1 > 0.0);
  EXPECT_TRUE(std::isfinite(c2) && c2 > 0.0);
}

TEST(Section6Phi, CertificatePasses) {
  const ScalingCertificate c = scaling_certificate(PhiModel(full_schedule()), 1.0);
  EXPECT_TRUE(c.pass);
}

TEST(Section6Phi, CertificateIndicesNearOneThirdAndOneHalf) {
  const ScalingCertificate c = scaling_certificate(PhiModel(full_schedule()), 1.0);
  EXPECT_GE(c.delta1, 0.28);
  EXPECT_LE(c.delta2, 0.55);
}

TEST(ScalingIntegrals, StableClosedForms) {
  // phi(r^-2) = r^-alpha integrates in closed form.
  for (double alpha : {0.6, 1.0, 1.5}) {
    const double R0 = 1.0;
    const auto grid = log_grid(1.0, 1e3, 3);
    const auto prof = scaling_integral_profile(PhiModel(StablePower{alpha}), grid, R0);
    const double b = alpha / 2;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double l = grid[i];
      EXPECT_NEAR(prof[0].ratio[i], 1.0 / (1.0 - b), 1e-6);
      EXPECT_NEAR(prof[1].ratio[i], 1.0 / (2.0 - alpha) + (1.0 - std::pow(l * R0, -alpha)) / alpha, 1e-6);
      EXPECT_NEAR(prof[2].ratio[i], 1.0 / (2.0 - b) + (1.0 - std::pow(l * R0, -b)) / b, 1e-6);
    }
  }
}

TEST(ScalingIntegrals, StableProfilesFlatOnceTailsDominate) {
  // The truncated tails approach their limits like (lambda R0)^{-alpha/2},
  // within 1% once lambda R0 >= 1e4.
  const auto prof = scaling_integral_profile(PhiModel(StablePower{1.0}), log_grid(1.0, 1e3, 4), 1e4);
  for (const auto& p : prof) EXPECT_LE(p.spread(), 1.05) << p.label;
}

TEST(ScalingIntegrals, MixtureBounded) {
  const auto prof = scaling_integral_profile(mixture({{1, 1.0}, {1, 0.8}}), log_grid(1.0, 1e3, 4), 1.0);
  for (const auto& p : prof) {
    EXPECT_TRUE(p.well_formed());
    EXPECT_LE(p.max, 10.0 * p.median());
  }
}
