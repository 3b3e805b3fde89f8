#include "ubhp/interp.hpp"

#include <math.h>  // boost 1.74 pchip calls unqualified isnan

#include <boost/math/interpolators/pchip.hpp>
#include <cmath>

#include "ubhp/errors.hpp"

namespace ubhp {

struct LogLogInterpolant::Impl {
  boost::math::interpolators::pchip<std::vector<double>> spline;
  double u_lo, u_hi, v_lo, v_hi, slope_lo, slope_hi;
};

LogLogInterpolant::LogLogInterpolant(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 4) throw ModelError("log-log table needs at least four points");
  std::vector<double> u(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0) || !std::isfinite(y[i]))
      throw ModelError("log-log table needs positive finite values");
    if (i > 0 && !(x[i] > x[i - 1])) throw ModelError("log-log table abscissae must increase");
    u[i] = std::log(x[i]);
    v[i] = std::log(y[i]);
  }
  const double u_lo = u.front(), u_hi = u.back(), v_lo = v.front(), v_hi = v.back();
  const double slope_lo = (v[1] - v[0]) / (u[1] - u[0]);
  const double slope_hi = (v[n - 1] - v[n - 2]) / (u[n - 1] - u[n - 2]);
  impl_ = std::make_shared<const Impl>(Impl{boost::math::interpolators::pchip<std::vector<double>>(
                                                std::move(u), std::move(v)),
                                            u_lo, u_hi, v_lo, v_hi, slope_lo, slope_hi});
}

double LogLogInterpolant::operator()(double x) const {
  if (!impl_) throw ModelError("empty log-log table");
  const double u = std::log(x);
  if (u <= impl_->u_lo) return std::exp(impl_->v_lo + impl_->slope_lo * (u - impl_->u_lo));
  if (u >= impl_->u_hi) return std::exp(impl_->v_hi + impl_->slope_hi * (u - impl_->u_hi));
  return std::exp(impl_->spline(u));
}

bool LogLogInterpolant::in_hull(double x) const {
  const double u = std::log(x);
  return impl_ && u >= impl_->u_lo - 1e-12 && u <= impl_->u_hi + 1e-12;
}

double LogLogInterpolant::lo() const { return impl_ ? std::exp(impl_->u_lo) : 0.0; }
double LogLogInterpolant::hi() const { return impl_ ? std::exp(impl_->u_hi) : 0.0; }

}  // namespace ubhp
