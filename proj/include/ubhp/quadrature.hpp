#pragma once

#include <functional>
#include <span>
#include <string>

#include "ubhp/errors.hpp"

namespace ubhp {

struct QuadSpec {
  double rel_tol = 1e-10;
  double abs_tol = 0.0;
  int max_intervals = 4000;
  // Unbounded ranges are integrated in u = log x over chunks of this width.
  double log_chunk = 2.0;
  int max_chunks = 600;
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  long evaluations = 0;
  bool converged = true;

  double relative_error() const;
  QuadResult& operator+=(const QuadResult& other);
};

using Integrand = std::function<double(double)>;

/// Global adaptive Gauss-Kronrod (10/21) on [a, b].
QuadResult integrate(const Integrand& f, double a, double b, const QuadSpec& spec = {});

/// Sum of adaptive integrals over consecutive break points. Splitting at
/// kinks keeps each panel smooth.
QuadResult integrate(const Integrand& f, std::span<const double> breaks,
                     const QuadSpec& spec = {});

/// Integral over [a, b] with 0 < a < b, computed in the variable u = log x.
QuadResult integrate_log(const Integrand& f, double a, double b, const QuadSpec& spec = {});

/// Integral over (0, b] in log chunks walking down until the contribution is
/// negligible. Suited to integrable algebraic or logarithmic singularities at 0.
QuadResult integrate_from_zero(const Integrand& f, double b, const QuadSpec& spec = {});

/// Integral over [a, infinity), a > 0, in log chunks walking up.
QuadResult integrate_to_infinity(const Integrand& f, double a, const QuadSpec& spec = {});

/// Returns r.value, or throws QuadratureError if the achieved relative error
/// exceeds tol.
double require_converged(const QuadResult& r, const std::string& what, double tol);

}  // namespace ubhp
