#pragma once

#include <array>
#include <memory>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "ubhp/quadrature.hpp"
#include "ubhp/ratio_profile.hpp"

namespace ubhp {

/// phi(lambda) = lambda^{alpha/2}.
struct StablePower {
  double alpha = 1.0;
};

struct MixtureTerm {
  double weight = 1.0;
  double alpha = 1.0;
};

/// phi(lambda) = sum_k w_k lambda^{alpha_k/2}.
struct Mixture {
  std::vector<MixtureTerm> terms;
};

/// Continuous increasing piecewise power function
///   f(x) = x^{beta_k} + C_k  on piece k,
/// piece 0 is x^{1/2} on (0, 2] and later exponents alternate 1/3, 1/2.
/// Piece k covers (b_{k-1}, b_k] with b_{-1} = 0; the last piece is unbounded.
struct PiecewiseSchedule {
  std::vector<double> exponents;
  std::vector<double> breakpoints;  // size exponents.size() - 1
  std::vector<double> offsets;      // C_k, offsets[0] = 0
  double epsilon = 0.0;

  /// f(x) = x^beta on all of (0, inf).
  static PiecewiseSchedule power_law(double beta);

  std::size_t pieces() const { return exponents.size(); }
  std::size_t piece_of(double x) const;
  /// The formula of piece k evaluated at any x > 0, even outside the piece.
  double piece_value(std::size_t k, double x) const;
  double operator()(double x) const;
  double derivative(double x) const;
  /// Largest closeness defect sup |piece_k(lx)/piece_k(x) - l^beta_k| over
  /// x in [a/10, a] and l in [1, k+1] on a 50 x 50 log grid.
  double closeness_defect(std::size_t k, double a) const;
  void validate() const;
};

enum class Section6Form { LambdaG, InverseG };

/// phi built from the Stieltjes transform g of a piecewise schedule:
/// phi = lambda g(lambda) (default) or 1/g(lambda).
struct SectionSix {
  PiecewiseSchedule schedule;
  Section6Form form = Section6Form::LambdaG;
  QuadSpec quad{1e-11, 0.0, 4000, 2.0, 600};
};

/// Monotone cubic interpolation in (log lambda, log phi).
class Tabulated {
 public:
  Tabulated() = default;
  Tabulated(std::vector<double> lambda, std::vector<double> value);
  double operator()(double lambda) const;
  double lo() const { return lambda_.front(); }
  double hi() const { return lambda_.back(); }
  const std::vector<double>& lambda() const { return lambda_; }
  const std::vector<double>& value() const { return value_; }

 private:
  struct Impl;
  std::vector<double> lambda_, value_;
  std::shared_ptr<const Impl> impl_;
};

/// A complete Bernstein function without drift.
class PhiModel {
 public:
  using Variant = std::variant<StablePower, Mixture, SectionSix, Tabulated>;

  PhiModel() : v_(StablePower{1.0}) {}
  PhiModel(Variant v);  // NOLINT(google-explicit-constructor)

  double operator()(double lambda) const;
  const Variant& variant() const { return v_; }
  std::string kind() const;
  /// Tabulated copy on [lo, hi] with the given points per decade.
  PhiModel tabulate(double lo, double hi, int per_decade = 40) const;

 private:
  Variant v_;
};

double phi_eval(const PhiModel& model, double lambda);

/// Stieltjes transform g(lambda) = int_0^inf f(xi) / (lambda + xi)^2 dxi.
QuadResult stieltjes_g_result(const PiecewiseSchedule& s, double lambda, const QuadSpec& spec = {1e-11});
double stieltjes_g(const PiecewiseSchedule& s, double lambda, const QuadSpec& spec = {1e-11});

double section6_phi(const SectionSix& model, double lambda);

/// Generates the oscillating schedule with the given number of pieces.
/// Throws ScheduleError if some breakpoint would exceed 1e300.
PiecewiseSchedule section6_build_f(int num_pieces, double epsilon);

struct ScalingGrid {
  double lambda_max = 1e4;
  double r_max = 1e6;
  int per_decade = 50;
};

struct ScalingCertificate {
  double delta1 = 0.0, delta2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
  double R0 = 1.0;
  ScalingGrid grid;
  bool pass = false;
  std::array<double, 2> witness_delta1{}, witness_delta2{};  // (lambda, r)
  std::array<double, 2> witness_a1{}, witness_a2{};
  std::size_t pairs = 0;

  void write_csv(std::ostream& os) const;
};

/// Estimates lower and upper scaling indices of phi on a shared log grid.
/// Throws ModelError when phi is not strictly increasing on the grid.
ScalingCertificate scaling_certificate(const PhiModel& model, double R0, const ScalingGrid& grid = {});

/// phi(t l) / (l phi(t)) over t_grid x l_grid (l >= 1).
RatioProfile global_bernstein_check(const PhiModel& model, const std::vector<double>& t_grid,
                                    const std::vector<double>& l_grid);

/// Three profiles: the small-scale root integral, the first-moment sum and
/// the root-moment sum, each divided by its power of phi(lambda^2).
std::array<RatioProfile, 3> scaling_integral_profile(const PhiModel& model,
                                                     const std::vector<double>& lambda_grid, double R0,
                                                     const QuadSpec& spec = {1e-9});

/// Points log-uniform on [lo, hi] with the given density, endpoints included.
std::vector<double> log_grid(double lo, double hi, int per_decade);

}  // namespace ubhp
