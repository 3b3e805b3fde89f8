#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "ubhp/geometry.hpp"
#include "ubhp/report.hpp"
#include "ubhp/sim.hpp"

namespace ubhp {

/// Radial-angular bins around a center. Shell k holds points with
/// inner + s_k <= |y - c| < inner + s_{k+1}; points closer than inner + s_0
/// go to the inner bucket and points beyond `far` to the far-field bucket.
struct KernelBins {
  Point center;
  double inner = 0.0;
  std::vector<double> s_edges;
  int n_angle = 1;
  double far = 0.0;

  /// Geometric shells from s_lo to far - inner.
  static KernelBins shells(const Point& center, double inner, double s_lo, double far, int n_radial, int n_angle = 1);

  std::size_t n_radial() const { return s_edges.size() - 1; }
  std::size_t size() const { return n_radial() * static_cast<std::size_t>(n_angle); }
  /// Bin index, or -1 for inner, -2 for far field.
  long index(const Point& y) const;
  double volume(std::size_t bin) const;
  /// Geometric-mean radius |y - c| of the bin's shell.
  double radius(std::size_t bin) const;
  std::size_t radial_of(std::size_t bin) const { return bin / static_cast<std::size_t>(n_angle); }
  std::size_t angle_of(std::size_t bin) const { return bin % static_cast<std::size_t>(n_angle); }
  void validate(int d) const;
};

/// Histogram estimate of the Poisson kernel K_D(x, .).
struct KernelEstimate {
  KernelBins bins;
  Point start;
  std::uint64_t n = 0;
  std::vector<std::uint64_t> counts;
  std::vector<double> density, stderr_;
  std::uint64_t inner_count = 0, far_count = 0, censored = 0;
  bool warning = false;

  double mass() const;
  double relative_error(std::size_t bin) const;
  void write_csv(std::ostream& os) const;
};

KernelEstimate kernel_from_batch(const ExitBatch& batch, const KernelBins& bins);
KernelEstimate kernel_estimate(const ProcessModel& model, const Geometry& geometry, const Point& x,
                               const KernelBins& bins, std::uint64_t n, std::uint64_t seed,
                               const ExitParams& params = {}, int workers = 0);

/// Measurable subset of the complement used as an exit target.
struct TargetSet {
  std::string name;
  std::function<bool(const Point&)> contains;

  static TargetSet everything();
  /// {y : |y - c| >= radius}.
  static TargetSet outside_ball(const Point& c, double radius);
  /// {y : |y - c| >= radius, n.(y - c) > 0}.
  static TargetSet outside_ball_halfspace(const Point& c, double radius, const Point& normal);
  /// {y : |y - c| >= radius, n.(y - c) <= 0}.
  static TargetSet outside_ball_closed_halfspace(const Point& c, double radius, const Point& normal);
  /// {y : n.(y - c) > 0}.
  static TargetSet halfspace(const Point& c, const Point& normal);
};

/// Relative description of a target, resolved against a center and radius.
struct TargetSpec {
  enum class Kind { Complement, Right, Far, RightFar, LeftFar };
  Kind kind = Kind::Complement;
  double factor = 1.0;  // Far kinds: |y - c| >= factor r

  TargetSet resolve(const Point& c, double r) const;
  std::string describe() const;
  static TargetSpec parse(const std::string& s);
};

struct HarmonicEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::uint64_t n = 0;
  std::string target;
};

HarmonicEstimate harmonic_from_batch(const ExitBatch& batch, const TargetSet& target);
HarmonicEstimate harmonic_eval(const ProcessModel& model, const Geometry& geometry, const TargetSet& target,
                               const Point& x, std::uint64_t n, std::uint64_t seed, const ExitParams& params = {},
                               int workers = 0);

/// Twice differentiable test function on R^d.
using TestFunction = std::function<double(const Point&)>;

/// L f(x) = int (f(x + y) - f(x) - y.grad f(x) 1{|y| <= 1}) J_X(y) dy via
/// sphere averages of f against the radial measure. Supports d <= 3.
double generator_apply(const RadialKernelTable& table, const TestFunction& f, const Point& x,
                       double rel_tol = 1e-6);
double generator_apply(const ProcessModel& model, const TestFunction& f, const Point& x, double rel_tol = 1e-6);

/// b0 = 2 int_{|z| > R0} J_X(z) dz.
double generator_tail_mass(const RadialKernelTable& table, double R0);

/// Picks the strategy for a model: exact walk on spheres for unmodulated
/// stable models, time stepping otherwise.
ExitParams default_exit_params(const ProcessModel& model);

/// Limits that turn estimated constants into pass/fail.
struct Thresholds {
  double stability = 2.0;       // max/min of a constant across scales or geometries
  double harnack_max = 1e6;     // cap on a Harnack constant
  double seed_tolerance = 0.25;
  double max_rel_stderr = 0.2;  // estimates above this relative error are excluded
  double max_excluded = 0.5;    // excluded fraction that makes a run inconclusive
};

struct KernelBoundsParams {
  std::vector<double> r_grid{0.25, 0.5, 1.0};
  std::vector<double> offsets{0.0, 0.2, 0.4};  // |x - x0| / r, along e_1
  double a = 0.5;
  int n_radial = 16;
  int n_angle = 4;
  std::uint64_t n = 100000;
  std::uint64_t seed = 1;
  int workers = 0;
  Thresholds thresholds;
};

/// Ratio profiles of the ball Poisson kernel against its two-sided bound,
/// the Harnack comparison between start points and the near-boundary bound.
ExperimentReport kernel_bounds_experiment(const ProcessModel& model, const Point& x0, const KernelBoundsParams& p);

struct ExitTimeProfileParams {
  std::vector<double> r_grid{0.125, 0.25, 0.5, 1.0};
  std::vector<double> offsets{0.0, 0.25, 0.5, 0.75, 0.9};
  double a = 0.5;  // sub-domain start points lie in B(0, a r)
  std::uint64_t n = 20000;
  std::uint64_t seed = 1;
  int workers = 0;
  Thresholds thresholds;
};

/// Expected exit times of balls against the lower envelope c / phi((r/2)^-2)
/// at centers and the upper envelope (phi(r^-2) phi((r - |x - x0|)^-2))^{-1/2},
/// and exit probabilities of sub-domains against phi(r^-2) E_x tau_D.
ExperimentReport exit_time_profile_check(const ProcessModel& model, const Point& x0,
                                         const ExitTimeProfileParams& p);

struct HarnackParams {
  std::vector<double> radii{0.25, 0.5};
  double a = 0.5;
  std::vector<double> grid{-1.0, -0.5, 0.0, 0.5, 1.0};  // multiples of a r along e_1
  std::vector<TargetSpec> targets;
  std::uint64_t n = 20000;
  std::uint64_t seed = 1;
  int workers = 0;
  Thresholds thresholds;
};

/// max over grid pairs of u(x)/u(y) for u(x) = P_x(X_tau in A), per target
/// and radius.
ExperimentReport harnack_experiment(const ProcessModel& model, const Point& x0, const HarnackParams& p);

struct FactorizationParams {
  std::vector<double> x_grid{0.1, 0.2, 0.3, 0.4};  // multiples of r along the inner normal e_1
  std::uint64_t n = 20000;
  std::uint64_t seed = 1;
  int workers = 0;
  Thresholds thresholds;
};

/// u(x) / (E_x tau_U I) with U = D cap B(z0, r), u = P_x(X_tau_U outside
/// B(z0, r)) and I = int_{B(z0, r/2)^c} j(|y - z0|) u(y) dy.
ExperimentReport factorization_experiment(const ProcessModel& model, const Geometry& D, const Point& z0, double r,
                                          const FactorizationParams& p);

struct BhpParams {
  std::vector<Point> x_grid;  // in units of r relative to z0; empty: default grid
  TargetSpec a1{TargetSpec::Kind::RightFar, 1.0};
  TargetSpec a2{TargetSpec::Kind::LeftFar, 1.0};
  int n_radial = 6;
  int n_angle = 4;
  std::uint64_t n = 100000;
  std::uint64_t seed = 1;
  int workers = 0;
  Thresholds thresholds;
};

/// Boundary Harnack constants for one open set D and scale r: (i) the
/// oscillation of u/v over the grid and (ii) the kernel cross ratio
/// K(x1,y1)K(x2,y2) / (K(x1,y2)K(x2,y1)).
ExperimentReport bhp_experiment(const ProcessModel& model, const Geometry& D, const Point& z0, double r,
                                const BhpParams& p);

struct NamedGeometry {
  std::string name;
  Geometry geometry;
};

/// Half-space cap, cone cap and slit ball of radius R with z0 on the
/// boundary (d >= 2).
std::vector<NamedGeometry> standard_open_sets(int d, const Point& z0, double R = 1.0, double aperture = 0.7853981633974483,
                                              double slit_half_width = 0.01);
std::vector<NamedGeometry> select_open_sets(const std::vector<NamedGeometry>& all,
                                            const std::vector<std::string>& names);

/// Runs factorization_experiment on each set; C must vary by less than the
/// stability factor across them.
ExperimentReport factorization_family(const ProcessModel& model, const std::vector<NamedGeometry>& sets,
                                      const Point& z0, double r, const FactorizationParams& p);

/// Runs bhp_experiment over sets x r_grid; constants must be finite, swap
/// invariant and vary by less than the stability factor over all runs.
ExperimentReport bhp_family(const ProcessModel& model, const std::vector<NamedGeometry>& sets, const Point& z0,
                            const std::vector<double>& r_grid, const BhpParams& p);

/// Default grid of BHP start points in units of r.
std::vector<Point> default_bhp_grid(int d);

/// Relative difference |a - b| / min(|a|, |b|) of every shared constant.
/// Pass when all are within tolerance.
ExperimentReport seed_stability(const std::map<std::string, double>& a, const std::map<std::string, double>& b,
                                double tolerance = 0.25);

/// max / min of positive finite values; infinity if any value is not.
double spread(const std::vector<double>& values);

}  // namespace ubhp
