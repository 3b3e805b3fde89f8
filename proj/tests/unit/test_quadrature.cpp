#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "ubhp/interp.hpp"
#include "ubhp/quadrature.hpp"

using namespace ubhp;

TEST(Quadrature, PolynomialOnInterval) {
  const QuadResult r = integrate([](double x) { return x * x; }, 0.0, 1.0);
  EXPECT_NEAR(r.value, 1.0 / 3.0, 1e-14);
  EXPECT_TRUE(r.converged);
}

TEST(Quadrature, BreaksAtKink) {
  const std::vector<double> breaks{-1.0, 0.0, 2.0};
  const QuadResult r = integrate([](double x) { return std::abs(x); }, breaks);
  EXPECT_NEAR(r.value, 0.5 + 2.0, 1e-13);
}

TEST(Quadrature, LogVariable) {
  const QuadResult r = integrate_log([](double x) { return 1.0 / x; }, 1.0, std::exp(3.0));
  EXPECT_NEAR(r.value, 3.0, 1e-12);
}

TEST(Quadrature, GammaHalfSplitAtOne) {
  // int_0^inf x^{-1/2} e^{-x} dx = sqrt(pi)
  auto f = [](double x) { return std::exp(-x) / std::sqrt(x); };
  QuadResult r = integrate_from_zero(f, 1.0);
  r += integrate_to_infinity(f, 1.0);
  EXPECT_NEAR(r.value, std::sqrt(std::numbers::pi), 1e-9);
}

TEST(Quadrature, HeavyTail) {
  // int_1^inf x^{-3/2} dx = 2
  const QuadResult r = integrate_to_infinity([](double x) { return std::pow(x, -1.5); }, 1.0);
  EXPECT_NEAR(r.value, 2.0, 1e-8);
}

TEST(Quadrature, RequireConvergedThrowsOnMiss) {
  QuadResult r;
  r.value = 1.0;
  r.error = 0.5;
  EXPECT_THROW(require_converged(r, "test", 1e-6), QuadratureError);
  r.error = 1e-9;
  EXPECT_DOUBLE_EQ(require_converged(r, "test", 1e-6), 1.0);
}

TEST(LogLogInterpolant, ReproducesPowerLaw) {
  std::vector<double> x, y;
  for (int i = 0; i <= 20; ++i) {
    x.push_back(std::pow(10.0, -2.0 + 0.2 * i));
    y.push_back(3.0 * std::pow(x.back(), -1.7));
  }
  const LogLogInterpolant f(x, y);
  for (double t : {0.0137, 0.5, 7.3, 99.0}) EXPECT_NEAR(f(t) / (3.0 * std::pow(t, -1.7)), 1.0, 1e-10);
  // Power-law continuation beyond the table.
  EXPECT_NEAR(f(1e4) / (3.0 * std::pow(1e4, -1.7)), 1.0, 1e-10);
  EXPECT_FALSE(f.in_hull(1e4));
}

TEST(LogLogInterpolant, MonotoneDataGivesMonotoneInterpolant) {
  const std::vector<double> x{1, 2, 3, 4, 5, 6};
  const std::vector<double> y{1, 1.1, 5, 5.01, 9, 30};
  const LogLogInterpolant f(x, y);
  double prev = f(1.0);
  for (double t = 1.01; t <= 6.0; t += 0.01) {
    const double v = f(t);
    EXPECT_GE(v, prev * (1.0 - 1e-12));
    prev = v;
  }
}
