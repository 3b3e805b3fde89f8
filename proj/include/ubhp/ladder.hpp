#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ubhp/interp.hpp"
#include "ubhp/levy.hpp"
#include "ubhp/report.hpp"

namespace ubhp {

/// Ladder-height Laplace exponent of a one-dimensional symmetric process,
/// either from its characteristic exponent or given in closed form.
class LadderExponent {
 public:
  /// Psi(theta) = phi(theta^2). Expensive phi variants are tabulated first.
  static LadderExponent from_phi(const PhiModel& phi);
  static LadderExponent from_exponent(std::function<double(double)> psi, std::string name = "custom");
  /// Skips the quadrature: kappa is taken as given.
  static LadderExponent from_kappa(std::function<double(double)> kappa, std::string name = "kappa");
  /// Psi of the first coordinate of a d-dimensional process, tabulated from
  /// a radial kernel table.
  static LadderExponent from_process(const ProcessModel& model);

  double psi(double theta) const { return psi_(theta); }
  bool closed_form() const { return static_cast<bool>(kappa_); }
  const std::string& name() const { return name_; }

  friend double kappa_eval(const LadderExponent& ladder, double lambda, double rel_tol);

 private:
  std::function<double(double)> psi_;
  std::function<double(double)> kappa_;
  std::string name_;
};

/// kappa(lambda) = exp((1/pi) int_0^inf log Psi(lambda theta) / (1 + theta^2) dtheta).
double kappa_eval(const LadderExponent& ladder, double lambda, double rel_tol = 1e-10);

enum class InversionMethod { GaverStehfest, PostWidder };

InversionMethod parse_inversion_method(const std::string& s);

/// Inverts L V(lambda) = 1 / (lambda kappa(lambda)) at r. Throws
/// InversionError when two successive orders disagree.
double renewal_V(const LadderExponent& ladder, double r, InversionMethod method = InversionMethod::GaverStehfest,
                 int order = 12);

/// Numerical inverse Laplace transform of F at t.
double gaver_stehfest(const std::function<double(double)>& F, double t, int order);
/// Gaver functionals accelerated by the Wynn rho algorithm.
double gaver_wynn(const std::function<double(double)>& F, double t, int functionals);

/// V tabulated on a log grid; V(0) = 0 and power laws beyond the grid.
class RenewalFunction {
 public:
  RenewalFunction() = default;
  RenewalFunction(const LadderExponent& ladder, double r_lo, double r_hi, int points = 1000,
                  InversionMethod method = InversionMethod::GaverStehfest);

  double operator()(double r) const;
  double lo() const { return r_.front(); }
  double hi() const { return r_.back(); }
  const std::vector<double>& grid() const { return r_; }
  const std::vector<double>& values() const { return v_; }
  void write_csv(std::ostream& os) const;

 private:
  std::vector<double> r_, v_;
  LogLogInterpolant table_;
};

/// V(r) sqrt(phi(r^-2)) over r_grid.
RatioProfile renewal_comparability_check(const ProcessModel& model, const std::vector<double>& r_grid);
RatioProfile renewal_comparability_check(const LadderExponent& ladder, const PhiModel& phi,
                                         const std::vector<double>& r_grid);

/// kappa(lambda) / sqrt(phi(lambda^2)) over lambda_grid.
RatioProfile kappa_comparability_check(const LadderExponent& ladder, const PhiModel& phi,
                                       const std::vector<double>& lambda_grid);

struct GreenResult {
  double value = 0.0;
  double truncation = 0.0;  // estimated mass dropped beyond the y grid
};

/// int_0^inf V(dy) int_0^x V(dz) f(x + y - z) as a Stieltjes double sum
/// over the renewal grid. Throws QuadratureError when the truncation
/// estimate exceeds rel_tol of the value.
GreenResult halfline_green_apply(const RenewalFunction& V, double x, const std::function<double(double)>& f,
                                 double rel_tol = 1e-3, int cells = 400);

struct IntervalCheckParams {
  std::uint64_t n = 100000;
  std::uint64_t seed = 1;
  int workers = 0;
  double r_max_table = 0.0;  // 0: 10 r
};

/// Monte Carlo E_x[tau] for the first coordinate leaving (0, r) against
/// 2 V(r) (V(x) min V(r - x)) with a 3 sigma one-sided margin.
ExperimentReport interval_exit_bound_check(const ProcessModel& model, double r, const std::vector<double>& x_grid,
                                           const IntervalCheckParams& params);

}  // namespace ubhp
