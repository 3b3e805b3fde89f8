#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ubhp/bernstein.hpp"
#include "ubhp/interp.hpp"

namespace ubhp {

constexpr int kMaxDim = 8;

/// Driftless subordinator with Laplace exponent phi.
struct SubordinatorModel {
  PhiModel phi;
};

/// Radial factor m(r) with gamma^{-1} <= m <= gamma.
struct Modulation {
  enum class Kind { Unit, Constant, Step, LogPeriodic };
  Kind kind = Kind::Unit;
  double value = 1.0;   // Constant: m; Step: m for r < radius
  double outer = 1.0;   // Step: m for r >= radius
  double radius = 1.0;  // Step: switch radius
  double amplitude = 0.0, period = 1.0;  // LogPeriodic: exp(a sin(2 pi log(r) / period))

  double operator()(double r) const;
  double lower() const;
  double upper() const;
  std::string describe() const;
};

/// Isotropic process with jump kernel J_X(y) = j(|y|) m(|y|).
struct ProcessModel {
  int d = 1;
  SubordinatorModel sub;
  double gamma = 1.0;
  Modulation modulation;

  void validate() const;
  bool modulated() const { return modulation.kind != Modulation::Kind::Unit; }
};

double mu_density(const SubordinatorModel& sub, double t);
double mu_tail(const SubordinatorModel& sub, double t);

/// Levy density of lambda g(lambda): int s e^{-st} f'(s) ds.
double mu_from_stieltjes(const PiecewiseSchedule& s, double t, double rel_tol = 1e-9);
/// Tail int e^{-st} f'(s) ds.
double mu_tail_from_stieltjes(const PiecewiseSchedule& s, double t, double rel_tol = 1e-9);

/// Radial density of the subordinate Brownian motion kernel j(r).
double j_density(const ProcessModel& model, double r, double rel_tol = 1e-6);
/// j(r) m(r).
double jx_density(const ProcessModel& model, double r, double rel_tol = 1e-6);

/// Surface area of the unit sphere in R^d.
double sphere_area(int d);
/// 1 - E[cos(x e_1 . U)] for U uniform on the unit sphere of R^d.
double one_minus_spherical_cos(int d, double x);

/// j tabulated on a log grid, interpolated in log-log, extended by power
/// laws outside the grid.
class RadialKernelTable {
 public:
  RadialKernelTable() = default;
  RadialKernelTable(const ProcessModel& model, double r_lo, double r_hi, int per_decade = 16);

  double j(double r) const { return table_(r); }
  /// Modulated kernel j(r) m(r).
  double jx(double r) const { return j(r) * modulation_(r); }
  /// Radial Levy measure density omega_d r^{d-1} J_X(r).
  double nu(double r) const;
  bool in_hull(double r) const { return r >= lo_ && r <= hi_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  int dim() const { return d_; }
  const Modulation& modulation() const { return modulation_; }

 private:
  int d_ = 1;
  Modulation modulation_;
  double lo_ = 0.0, hi_ = 0.0;
  LogLogInterpolant table_;
};

struct PsiResult {
  double value = 0.0;
  double error = 0.0;
};

/// Psi(theta) = int (1 - cos(theta y_1)) J_X(y) dy from the radial measure
/// density nu(r) = omega_d r^{d-1} J_X(r).
PsiResult psi_from_radial(int d, const std::function<double(double)>& nu, double theta, double rel_tol = 1e-6);

/// Throws QuadratureError when the error estimate exceeds rel_tol.
double psi_eval(const ProcessModel& model, double theta, double rel_tol = 1e-6);
double psi_eval(const RadialKernelTable& table, double theta, double rel_tol = 1e-6);

enum class AsymptoticKind { Mu, Tail, J, DoublingSmall, DoublingLarge };

AsymptoticKind parse_asymptotic_kind(const std::string& s);
const char* to_string(AsymptoticKind k);

/// mu: t mu(t) / phi(1/t); tail: mu(t,inf) / phi(1/t); j: j(r) r^d / phi(r^-2);
/// doubling_small: j(r)/j(2r); doubling_large: j(r)/j(r+1).
RatioProfile asymp_ratio_profile(const ProcessModel& model, AsymptoticKind which, const std::vector<double>& grid);

}  // namespace ubhp
