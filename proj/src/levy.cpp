#include "ubhp/levy.hpp"

#include <algorithm>
#include <boost/math/special_functions/bessel.hpp>
#include <cmath>
#include <numbers>

namespace ubhp {

namespace {

using std::numbers::pi;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double stable_mu(double alpha, double t) {
  const double a = 0.5 * alpha;
  return a / std::tgamma(1.0 - a) * std::pow(t, -1.0 - a);
}

double stable_tail(double alpha, double t) {
  const double a = 0.5 * alpha;
  return std::pow(t, -a) / std::tgamma(1.0 - a);
}

const SectionSix& require_lambda_g(const SectionSix& s) {
  if (s.form != Section6Form::LambdaG)
    throw ModelError("the 1/g form has no Levy density representation in this toolkit");
  return s;
}

// int_0^inf w(s) f'(s) ds split at the schedule breakpoints and at 1/t.
double stieltjes_moment(const PiecewiseSchedule& s, double t, double rel_tol,
                        const std::function<double(double)>& weight, const char* what) {
  if (!(t > 0.0)) throw DomainError(std::string(what) + " requires t > 0");
  std::vector<double> breaks = s.breakpoints;
  breaks.push_back(1.0 / t);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  auto h = [&](double x) { return weight(x) * s.derivative(x); };
  QuadSpec spec;
  spec.rel_tol = rel_tol;
  QuadResult out = integrate_from_zero(h, breaks.front(), spec);
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) out += integrate_log(h, breaks[i], breaks[i + 1], spec);
  out += integrate_to_infinity(h, breaks.back(), spec);
  return require_converged(out, what, std::max(1e-6, 10.0 * rel_tol));
}

// Series of 1 - Gamma(d/2) (2/x)^{d/2-1} J_{d/2-1}(x) for small x.
double one_minus_series(int d, double x) {
  const double nu = 0.5 * d;
  const double q = 0.25 * x * x;
  double term = 1.0;
  double sum = 0.0;
  for (int k = 1; k < 30; ++k) {
    term *= -q / (k * (nu + k - 1.0));
    sum -= term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return sum;
}

double spherical_cos(int d, double x) {
  if (d == 1) return std::cos(x);
  if (d == 3) return std::sin(x) / x;
  const double nu = 0.5 * d - 1.0;
  return std::tgamma(0.5 * d) * std::pow(2.0 / x, nu) * boost::math::cyl_bessel_j(nu, x);
}

}  // namespace

// --- Modulation --------------------------------------------------------------

double Modulation::operator()(double r) const {
  switch (kind) {
    case Kind::Unit: return 1.0;
    case Kind::Constant: return value;
    case Kind::Step: return r < radius ? value : outer;
    case Kind::LogPeriodic: return std::exp(amplitude * std::sin(2.0 * pi * std::log(r) / period));
  }
  return 1.0;
}

double Modulation::lower() const {
  switch (kind) {
    case Kind::Unit: return 1.0;
    case Kind::Constant: return value;
    case Kind::Step: return std::min(value, outer);
    case Kind::LogPeriodic: return std::exp(-std::abs(amplitude));
  }
  return 1.0;
}

double Modulation::upper() const {
  switch (kind) {
    case Kind::Unit: return 1.0;
    case Kind::Constant: return value;
    case Kind::Step: return std::max(value, outer);
    case Kind::LogPeriodic: return std::exp(std::abs(amplitude));
  }
  return 1.0;
}

std::string Modulation::describe() const {
  switch (kind) {
    case Kind::Unit: return "unit";
    case Kind::Constant: return "constant:" + std::to_string(value);
    case Kind::Step:
      return "step:" + std::to_string(value) + ":" + std::to_string(outer) + ":" + std::to_string(radius);
    case Kind::LogPeriodic: return "logperiodic:" + std::to_string(amplitude) + ":" + std::to_string(period);
  }
  return "unit";
}

void ProcessModel::validate() const {
  if (d < 1 || d > kMaxDim) throw ModelError("dimension must lie in [1, " + std::to_string(kMaxDim) + "]");
  if (!(gamma >= 1.0)) throw ModelError("gamma must be at least 1");
  if (modulation.kind == Modulation::Kind::Step && !(modulation.radius > 0.0))
    throw ModelError("step modulation radius must be positive");
  if (modulation.kind == Modulation::Kind::LogPeriodic && !(modulation.period > 0.0))
    throw ModelError("log-periodic modulation period must be positive");
  const double tol = 1e-12;
  if (!(modulation.lower() > 0.0) || modulation.lower() < 1.0 / gamma - tol || modulation.upper() > gamma + tol)
    throw ModelError("modulation must stay within [1/gamma, gamma]");
}

// --- subordinator ------------------------------------------------------------

double mu_from_stieltjes(const PiecewiseSchedule& s, double t, double rel_tol) {
  return stieltjes_moment(s, t, rel_tol, [t](double x) { return x * std::exp(-x * t); }, "mu_from_stieltjes");
}

double mu_tail_from_stieltjes(const PiecewiseSchedule& s, double t, double rel_tol) {
  return stieltjes_moment(s, t, rel_tol, [t](double x) { return std::exp(-x * t); }, "mu_tail_from_stieltjes");
}

double mu_density(const SubordinatorModel& sub, double t) {
  if (!(t > 0.0)) throw DomainError("mu_density requires t > 0");
  return std::visit(Overloaded{
                        [t](const StablePower& s) { return stable_mu(s.alpha, t); },
                        [t](const Mixture& m) {
                          double sum = 0.0;
                          for (const auto& term : m.terms) sum += term.weight * stable_mu(term.alpha, t);
                          return sum;
                        },
                        [t](const SectionSix& s) { return mu_from_stieltjes(require_lambda_g(s).schedule, t); },
                        [](const Tabulated&) -> double {
                          throw ModelError("a tabulated phi carries no Levy density");
                        },
                    },
                    sub.phi.variant());
}

double mu_tail(const SubordinatorModel& sub, double t) {
  if (!(t > 0.0)) throw DomainError("mu_tail requires t > 0");
  return std::visit(Overloaded{
                        [t](const StablePower& s) { return stable_tail(s.alpha, t); },
                        [t](const Mixture& m) {
                          double sum = 0.0;
                          for (const auto& term : m.terms) sum += term.weight * stable_tail(term.alpha, t);
                          return sum;
                        },
                        [t](const SectionSix& s) {
                          return mu_tail_from_stieltjes(require_lambda_g(s).schedule, t);
                        },
                        [](const Tabulated&) -> double {
                          throw ModelError("a tabulated phi carries no Levy density");
                        },
                    },
                    sub.phi.variant());
}

// --- jump kernel -------------------------------------------------------------

double j_density(const ProcessModel& model, double r, double rel_tol) {
  if (!(r >= 1e-8)) throw DomainError("j_density is guarded below r = 1e-8");
  const double r2 = r * r;
  const double hd = 0.5 * model.d;
  const auto& sub = model.sub;
  QuadSpec spec;
  spec.rel_tol = std::min(1e-8, 0.01 * rel_tol);
  auto right = [&](double t) { return std::pow(4.0 * pi * t, -hd) * std::exp(-r2 / (4.0 * t)) * mu_density(sub, t); };
  // t = r^2 / u on (0, r^2].
  auto left = [&](double u) {
    const double t = r2 / u;
    return std::pow(4.0 * pi * t, -hd) * std::exp(-0.25 * u) * mu_density(sub, t) * r2 / (u * u);
  };
  QuadResult out = integrate_to_infinity(right, r2, spec);
  out += integrate_to_infinity(left, 1.0, spec);
  return require_converged(out, "j_density", rel_tol);
}

double jx_density(const ProcessModel& model, double r, double rel_tol) {
  return j_density(model, r, rel_tol) * model.modulation(r);
}

double sphere_area(int d) { return 2.0 * std::pow(pi, 0.5 * d) / std::tgamma(0.5 * d); }

double one_minus_spherical_cos(int d, double x) {
  x = std::abs(x);
  if (x < 1.0) return one_minus_series(d, x);
  return 1.0 - spherical_cos(d, x);
}

RadialKernelTable::RadialKernelTable(const ProcessModel& model, double r_lo, double r_hi, int per_decade)
    : d_(model.d), modulation_(model.modulation), lo_(r_lo), hi_(r_hi) {
  model.validate();
  std::vector<double> r = log_grid(r_lo, r_hi, per_decade);
  std::vector<double> j(r.size());
  #pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < r.size(); ++i) j[i] = j_density(model, r[i], 1e-8);
  table_ = LogLogInterpolant(r, j);
}

double RadialKernelTable::nu(double r) const {
  return sphere_area(d_) * std::pow(r, d_ - 1) * jx(r);
}

// --- characteristic exponent -------------------------------------------------

PsiResult psi_from_radial(int d, const std::function<double(double)>& nu, double theta, double rel_tol) {
  PsiResult res;
  theta = std::abs(theta);
  if (theta == 0.0) return res;
  const double half = pi / theta;
  QuadSpec spec;
  spec.rel_tol = std::min(1e-9, 1e-3 * rel_tol);

  QuadResult near = integrate_from_zero([&](double r) { return one_minus_spherical_cos(d, theta * r) * nu(r); },
                                        half, spec);
  QuadResult mass = integrate_to_infinity(nu, half, spec);
  double base = near.value + mass.value;
  double qerr = near.error + mass.error;

  // Oscillatory remainder int_{half}^inf cos-average * nu, summed over
  // half periods and accelerated by repeated averaging of partial sums.
  std::vector<double> partial;
  double sum = 0.0;
  double accel = 0.0, prev_accel = 0.0;
  int stable = 0;
  constexpr int kWindow = 12;
  constexpr int kMaxChunks = 4000;
  for (int k = 0; k < kMaxChunks; ++k) {
    const double a = half * (1 + k), b = half * (2 + k);
    QuadResult c = integrate([&](double r) { return spherical_cos(d, theta * r) * nu(r); }, a, b, spec);
    sum += c.value;
    qerr += c.error;
    partial.push_back(sum);
    if (partial.size() < kWindow) continue;
    std::vector<double> level(partial.end() - kWindow, partial.end());
    while (level.size() > 1) {
      for (std::size_t i = 0; i + 1 < level.size(); ++i) level[i] = 0.5 * (level[i] + level[i + 1]);
      level.pop_back();
    }
    prev_accel = accel;
    accel = level.front();
    const double scale = std::abs(base - accel);
    if (std::abs(accel - prev_accel) <= 1e-2 * rel_tol * scale) {
      if (++stable >= 3) break;
    } else {
      stable = 0;
    }
  }
  res.value = base - accel;
  res.error = qerr + std::abs(accel - prev_accel);
  return res;
}

double psi_eval(const RadialKernelTable& table, double theta, double rel_tol) {
  PsiResult r = psi_from_radial(table.dim(), [&table](double x) { return table.nu(x); }, theta, rel_tol);
  if (theta != 0.0 && !(r.error <= rel_tol * std::abs(r.value)))
    throw QuadratureError("psi_eval", r.error / std::abs(r.value));
  return r.value;
}

double psi_eval(const ProcessModel& model, double theta, double rel_tol) {
  model.validate();
  const double area = sphere_area(model.d);
  auto nu = [&](double x) {
    if (x < 1e-8) x = 1e-8;
    return area * std::pow(x, model.d - 1) * jx_density(model, x, 1e-9);
  };
  PsiResult r = psi_from_radial(model.d, nu, theta, rel_tol);
  if (theta != 0.0 && !(r.error <= rel_tol * std::abs(r.value)))
    throw QuadratureError("psi_eval", r.error / std::abs(r.value));
  return r.value;
}

// --- asymptotic profiles -----------------------------------------------------

AsymptoticKind parse_asymptotic_kind(const std::string& s) {
  if (s == "mu") return AsymptoticKind::Mu;
  if (s == "tail") return AsymptoticKind::Tail;
  if (s == "j") return AsymptoticKind::J;
  if (s == "doubling_small") return AsymptoticKind::DoublingSmall;
  if (s == "doubling_large") return AsymptoticKind::DoublingLarge;
  throw DomainError("unknown profile kind '" + s + "'");
}

const char* to_string(AsymptoticKind k) {
  switch (k) {
    case AsymptoticKind::Mu: return "mu";
    case AsymptoticKind::Tail: return "tail";
    case AsymptoticKind::J: return "j";
    case AsymptoticKind::DoublingSmall: return "doubling_small";
    case AsymptoticKind::DoublingLarge: return "doubling_large";
  }
  return "j";
}

RatioProfile asymp_ratio_profile(const ProcessModel& model, AsymptoticKind which, const std::vector<double>& grid) {
  model.validate();
  RatioProfile p;
  p.label = to_string(which);
  std::vector<double> values(grid.size());
  #pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid[i];
    switch (which) {
      case AsymptoticKind::Mu: values[i] = mu_density(model.sub, x) * x / model.sub.phi(1.0 / x); break;
      case AsymptoticKind::Tail: values[i] = mu_tail(model.sub, x) / model.sub.phi(1.0 / x); break;
      case AsymptoticKind::J:
        values[i] = j_density(model, x) * std::pow(x, model.d) / model.sub.phi(1.0 / (x * x));
        break;
      case AsymptoticKind::DoublingSmall: values[i] = j_density(model, x) / j_density(model, 2.0 * x); break;
      case AsymptoticKind::DoublingLarge: values[i] = j_density(model, x) / j_density(model, x + 1.0); break;
    }
  }
  for (std::size_t i = 0; i < grid.size(); ++i) p.push(grid[i], values[i]);
  return p;
}

}  // namespace ubhp
