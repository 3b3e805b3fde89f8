#include "ubhp/bernstein.hpp"

#include <math.h>  // boost 1.74 pchip calls unqualified isnan

#include <algorithm>
#include <boost/math/interpolators/pchip.hpp>
#include <cmath>
#include <iomanip>
#include <limits>

namespace ubhp {

namespace {

constexpr double kLn10 = 2.302585092994045684;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool valid_alpha(double a) { return a > 0.0 && a < 2.0; }

double next_power_of_ten(double x) {
  return std::pow(10.0, std::ceil(std::log10(x) - 1e-12));
}

}  // namespace

// --- PiecewiseSchedule -------------------------------------------------------

PiecewiseSchedule PiecewiseSchedule::power_law(double beta) {
  PiecewiseSchedule s;
  s.exponents = {beta};
  s.offsets = {0.0};
  return s;
}

std::size_t PiecewiseSchedule::piece_of(double x) const {
  auto it = std::lower_bound(breakpoints.begin(), breakpoints.end(), x);
  return static_cast<std::size_t>(it - breakpoints.begin());
}

double PiecewiseSchedule::piece_value(std::size_t k, double x) const {
  return std::pow(x, exponents[k]) + offsets[k];
}

double PiecewiseSchedule::operator()(double x) const {
  if (!(x > 0.0)) return 0.0;
  return piece_value(piece_of(x), x);
}

double PiecewiseSchedule::derivative(double x) const {
  if (!(x > 0.0)) return 0.0;
  const double b = exponents[piece_of(x)];
  return b * std::pow(x, b - 1.0);
}

double PiecewiseSchedule::closeness_defect(std::size_t k, double a) const {
  const double beta = exponents[k];
  const double lmax = static_cast<double>(k + 1);
  double worst = 0.0;
  constexpr int kPts = 50;
  for (int i = 0; i < kPts; ++i) {
    const double x = a * std::pow(10.0, -1.0 + static_cast<double>(i) / (kPts - 1));
    const double fx = piece_value(k, x);
    if (!(fx > 0.0)) return std::numeric_limits<double>::infinity();
    for (int j = 0; j < kPts; ++j) {
      const double l = std::pow(lmax, static_cast<double>(j) / (kPts - 1));
      worst = std::max(worst, std::abs(piece_value(k, l * x) / fx - std::pow(l, beta)));
    }
  }
  return worst;
}

void PiecewiseSchedule::validate() const {
  if (exponents.empty()) throw ModelError("schedule has no pieces");
  if (breakpoints.size() + 1 != exponents.size() || offsets.size() != exponents.size())
    throw ModelError("schedule sizes are inconsistent");
  for (double b : exponents)
    if (!(b > 0.0 && b < 1.0)) throw ModelError("schedule exponent outside (0,1)");
  for (std::size_t k = 0; k < breakpoints.size(); ++k) {
    if (!(breakpoints[k] > 0.0) || (k > 0 && !(breakpoints[k] > breakpoints[k - 1])))
      throw ModelError("schedule breakpoints must be positive and increasing");
    const double left = piece_value(k, breakpoints[k]);
    const double right = piece_value(k + 1, breakpoints[k]);
    if (std::abs(left - right) > 1e-9 * std::max(1.0, std::abs(left)))
      throw ModelError("schedule is discontinuous at breakpoint " + std::to_string(breakpoints[k]));
  }
  const double start = breakpoints.empty() ? 1.0 : breakpoints.front();
  if (!(piece_value(0, start * 1e-6) > 0.0)) throw ModelError("schedule is not positive");
}

PiecewiseSchedule section6_build_f(int num_pieces, double epsilon) {
  if (num_pieces < 1) throw DomainError("section6_build_f needs at least one piece");
  if (!(epsilon > 0.0 && epsilon < 0.2)) throw DomainError("section6_build_f needs epsilon in (0, 0.2)");
  PiecewiseSchedule s;
  s.epsilon = epsilon;
  s.exponents.push_back(0.5);
  s.offsets.push_back(0.0);
  for (int k = 1; k < num_pieces; ++k) {
    const double beta = (k % 2 == 1) ? 1.0 / 3.0 : 0.5;
    double start = 2.0;
    if (k >= 2) {
      const std::size_t prev = static_cast<std::size_t>(k - 1);
      double a = next_power_of_ten(10.0 * s.breakpoints.back());
      while (s.closeness_defect(prev, a) > epsilon) {
        a *= 10.0;
        if (a > 1e300) throw ScheduleError("no breakpoint below 1e300 meets the closeness tolerance");
      }
      start = a;
    }
    const double value = s.piece_value(static_cast<std::size_t>(k - 1), start);
    s.breakpoints.push_back(start);
    s.exponents.push_back(beta);
    s.offsets.push_back(value - std::pow(start, beta));
  }
  s.validate();
  return s;
}

QuadResult stieltjes_g_result(const PiecewiseSchedule& s, double lambda, const QuadSpec& spec) {
  if (!(lambda > 0.0)) throw DomainError("stieltjes_g requires lambda > 0");
  std::vector<double> breaks = s.breakpoints;
  breaks.push_back(lambda);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  auto h = [&s, lambda](double xi) {
    const double d = lambda + xi;
    return s(xi) / (d * d);
  };
  QuadResult out = integrate_from_zero(h, breaks.front(), spec);
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) out += integrate_log(h, breaks[i], breaks[i + 1], spec);
  out += integrate_to_infinity(h, breaks.back(), spec);
  return out;
}

double stieltjes_g(const PiecewiseSchedule& s, double lambda, const QuadSpec& spec) {
  return require_converged(stieltjes_g_result(s, lambda, spec), "stieltjes_g", std::max(1e-6, spec.rel_tol));
}

double section6_phi(const SectionSix& model, double lambda) {
  const double g = stieltjes_g(model.schedule, lambda, model.quad);
  return model.form == Section6Form::LambdaG ? lambda * g : 1.0 / g;
}

// --- Tabulated ---------------------------------------------------------------

struct Tabulated::Impl {
  boost::math::interpolators::pchip<std::vector<double>> spline;
};

Tabulated::Tabulated(std::vector<double> lambda, std::vector<double> value)
    : lambda_(std::move(lambda)), value_(std::move(value)) {
  if (lambda_.size() != value_.size() || lambda_.size() < 4)
    throw ModelError("tabulated phi needs at least four (lambda, value) pairs");
  for (std::size_t i = 0; i < lambda_.size(); ++i) {
    if (!(lambda_[i] > 0.0) || !(value_[i] > 0.0)) throw ModelError("tabulated phi must be positive");
    if (i > 0 && (!(lambda_[i] > lambda_[i - 1]) || !(value_[i] > value_[i - 1])))
      throw ModelError("tabulated phi must be strictly increasing");
  }
  std::vector<double> lx(lambda_.size()), ly(value_.size());
  std::transform(lambda_.begin(), lambda_.end(), lx.begin(), [](double v) { return std::log(v); });
  std::transform(value_.begin(), value_.end(), ly.begin(), [](double v) { return std::log(v); });
  impl_ = std::make_shared<const Impl>(Impl{{std::move(lx), std::move(ly)}});
}

double Tabulated::operator()(double lambda) const {
  if (!impl_) throw ModelError("empty tabulated phi");
  const double slack = 1e-12;
  if (lambda < lo() * (1.0 - slack) || lambda > hi() * (1.0 + slack))
    throw ExtrapolationError("lambda=" + std::to_string(lambda) + " outside tabulated range");
  const double u = std::clamp(std::log(lambda), std::log(lo()), std::log(hi()));
  return std::exp(impl_->spline(u));
}

// --- PhiModel ----------------------------------------------------------------

PhiModel::PhiModel(Variant v) : v_(std::move(v)) {
  std::visit(Overloaded{
                 [](const StablePower& s) {
                   if (!valid_alpha(s.alpha)) throw ModelError("stable alpha must lie in (0,2)");
                 },
                 [](const Mixture& m) {
                   if (m.terms.empty()) throw ModelError("mixture has no terms");
                   for (const auto& t : m.terms)
                     if (!(t.weight > 0.0) || !valid_alpha(t.alpha))
                       throw ModelError("mixture terms need weight > 0 and alpha in (0,2)");
                 },
                 [](const SectionSix& s) { s.schedule.validate(); },
                 [](const Tabulated&) {},
             },
             v_);
}

double PhiModel::operator()(double lambda) const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("phi requires lambda > 0");
  return std::visit(Overloaded{
                        [lambda](const StablePower& s) { return std::pow(lambda, 0.5 * s.alpha); },
                        [lambda](const Mixture& m) {
                          double sum = 0.0;
                          for (const auto& t : m.terms) sum += t.weight * std::pow(lambda, 0.5 * t.alpha);
                          return sum;
                        },
                        [lambda](const SectionSix& s) { return section6_phi(s, lambda); },
                        [lambda](const Tabulated& t) { return t(lambda); },
                    },
                    v_);
}

std::string PhiModel::kind() const {
  switch (v_.index()) {
    case 0: return "stable";
    case 1: return "mixture";
    case 2: return "section6";
    default: return "tabulated";
  }
}

PhiModel PhiModel::tabulate(double lo, double hi, int per_decade) const {
  std::vector<double> x = log_grid(lo, hi, per_decade);
  std::vector<double> y(x.size());
  #pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = (*this)(x[i]);
  return PhiModel(Tabulated(std::move(x), std::move(y)));
}

double phi_eval(const PhiModel& model, double lambda) { return model(lambda); }

std::vector<double> log_grid(double lo, double hi, int per_decade) {
  if (!(lo > 0.0) || !(hi >= lo) || per_decade < 1) throw DomainError("log_grid needs 0 < lo <= hi");
  if (hi == lo) return {lo};
  const int n = std::max(1, static_cast<int>(std::ceil(std::log10(hi / lo) * per_decade - 1e-9)));
  std::vector<double> out(static_cast<std::size_t>(n) + 1);
  const double step = std::log(hi / lo) / n;
  for (int i = 0; i <= n; ++i) out[static_cast<std::size_t>(i)] = lo * std::exp(step * i);
  out.back() = hi;
  return out;
}

// --- certificates and profiles -----------------------------------------------

ScalingCertificate scaling_certificate(const PhiModel& model, double R0, const ScalingGrid& grid) {
  if (!(R0 > 0.0)) throw DomainError("scaling_certificate requires R0 > 0");
  if (!(grid.lambda_max >= 2.0) || grid.per_decade < 1) throw DomainError("scaling grid is too small");
  ScalingCertificate cert;
  cert.R0 = R0;
  cert.grid = grid;
  const double lo = 1.0 / (R0 * R0);
  const double ppd = grid.per_decade;
  const int m_max = static_cast<int>(std::floor(std::log10(grid.lambda_max) * ppd + 1e-9));
  const int r_count = static_cast<int>(std::floor(std::log10(grid.r_max / lo) * ppd + 1e-9)) + 1;
  if (r_count < 1) throw DomainError("r_max must exceed 1/R0^2");
  const int n = r_count + m_max;
  std::vector<double> x(static_cast<std::size_t>(n)), lphi(x.size());
  for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = lo * std::pow(10.0, i / ppd);
  #pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) lphi[static_cast<std::size_t>(i)] = std::log(model(x[static_cast<std::size_t>(i)]));
  for (std::size_t i = 1; i < x.size(); ++i)
    if (!(lphi[i] > lphi[i - 1]))
      throw ModelError("phi is not strictly increasing near lambda=" + std::to_string(x[i]));

  const int m_two = static_cast<int>(std::ceil(std::log10(2.0) * ppd - 1e-9));
  cert.delta1 = std::numeric_limits<double>::infinity();
  cert.delta2 = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < r_count; ++i) {
    for (int m = m_two; m <= m_max; ++m) {
      const double s = (lphi[static_cast<std::size_t>(i + m)] - lphi[static_cast<std::size_t>(i)]) / (m / ppd * kLn10);
      const double lam = std::pow(10.0, m / ppd);
      if (s < cert.delta1) {
        cert.delta1 = s;
        cert.witness_delta1 = {lam, x[static_cast<std::size_t>(i)]};
      }
      if (s > cert.delta2) {
        cert.delta2 = s;
        cert.witness_delta2 = {lam, x[static_cast<std::size_t>(i)]};
      }
    }
  }
  cert.a1 = std::numeric_limits<double>::infinity();
  cert.a2 = 0.0;
  for (int i = 0; i < r_count; ++i) {
    for (int m = 0; m <= m_max; ++m) {
      const double loglam = m / ppd * kLn10;
      const double diff = lphi[static_cast<std::size_t>(i + m)] - lphi[static_cast<std::size_t>(i)];
      const double lower = std::exp(diff - cert.delta1 * loglam);
      const double upper = std::exp(diff - cert.delta2 * loglam);
      const double lam = std::exp(loglam);
      if (lower < cert.a1) {
        cert.a1 = lower;
        cert.witness_a1 = {lam, x[static_cast<std::size_t>(i)]};
      }
      if (upper > cert.a2) {
        cert.a2 = upper;
        cert.witness_a2 = {lam, x[static_cast<std::size_t>(i)]};
      }
      ++cert.pairs;
    }
  }
  cert.pass = cert.delta1 > 0.0 && cert.delta2 < 1.0 && cert.delta1 <= cert.delta2 && cert.a1 > 0.0 &&
              std::isfinite(cert.a2);
  return cert;
}

void ScalingCertificate::write_csv(std::ostream& os) const {
  os << "# columns: key,value\nkey,value\n" << std::setprecision(17);
  os << "delta1," << delta1 << "\ndelta2," << delta2 << "\na1," << a1 << "\na2," << a2 << "\nR0," << R0
     << "\nlambda_max," << grid.lambda_max << "\nr_max," << grid.r_max << "\nper_decade," << grid.per_decade
     << "\npass," << (pass ? 1 : 0) << "\npairs," << pairs << "\nwitness_delta1_lambda," << witness_delta1[0]
     << "\nwitness_delta1_r," << witness_delta1[1] << "\nwitness_delta2_lambda," << witness_delta2[0]
     << "\nwitness_delta2_r," << witness_delta2[1] << "\nwitness_a1_lambda," << witness_a1[0]
     << "\nwitness_a1_r," << witness_a1[1] << "\nwitness_a2_lambda," << witness_a2[0] << "\nwitness_a2_r,"
     << witness_a2[1] << '\n';
}

RatioProfile global_bernstein_check(const PhiModel& model, const std::vector<double>& t_grid,
                                    const std::vector<double>& l_grid) {
  RatioProfile p;
  p.label = "phi(t*l)/(l*phi(t))";
  for (double t : t_grid) {
    const double pt = model(t);
    for (double l : l_grid) {
      if (!(l >= 1.0)) throw DomainError("global_bernstein_check requires l >= 1");
      p.push(t, l, model(t * l) / (l * pt));
    }
  }
  return p;
}

std::array<RatioProfile, 3> scaling_integral_profile(const PhiModel& model, const std::vector<double>& lambda_grid,
                                                     double R0, const QuadSpec& spec) {
  std::array<RatioProfile, 3> out;
  out[0].label = "root_small";
  out[1].label = "first_moment";
  out[2].label = "root_moment";
  const double tol = std::max(1e-6, spec.rel_tol);
  auto phi_inv_sq = [&model](double r) { return model(1.0 / (r * r)); };
  for (double lam : lambda_grid) {
    if (!(lam >= 1.0 / R0 * (1.0 - 1e-12))) throw DomainError("scaling_integral_profile requires lambda >= 1/R0");
    const double inv = 1.0 / lam;
    const double p2 = model(lam * lam);

    const double i1 = require_converged(
        integrate_from_zero([&](double r) { return std::sqrt(phi_inv_sq(r)); }, inv, spec), "root integral", tol);
    out[0].push(lam, i1 / (inv * std::sqrt(p2)));

    const double near2 = require_converged(
        integrate_from_zero([&](double r) { return r * phi_inv_sq(r); }, inv, spec), "first moment", tol);
    double far2 = 0.0, far3 = 0.0;
    if (R0 > inv) {
      far2 = require_converged(integrate_log([&](double r) { return phi_inv_sq(r) / r; }, inv, R0, spec),
                               "first moment tail", tol);
      far3 = require_converged(integrate_log([&](double r) { return std::sqrt(phi_inv_sq(r)) / r; }, inv, R0, spec),
                               "root moment tail", tol);
    }
    out[1].push(lam, (lam * lam * near2 + far2) / p2);

    const double near3 = require_converged(
        integrate_from_zero([&](double r) { return r * std::sqrt(phi_inv_sq(r)); }, inv, spec), "root moment", tol);
    out[2].push(lam, (lam * lam * near3 + far3) / std::sqrt(p2));
  }
  return out;
}

}  // namespace ubhp
