#include "ubhp/ladder.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "ubhp/geometry.hpp"
#include "ubhp/sim.hpp"

namespace ubhp {

namespace {

using std::numbers::pi;
constexpr long double kLn2 = 0.693147180559945309417232121458176568L;

long double factorial(int n) {
  long double f = 1.0L;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

long double binomial(int n, int k) { return factorial(n) / (factorial(k) * factorial(n - k)); }

std::vector<long double> stehfest_weights(int order) {
  const int half = order / 2;
  std::vector<long double> w(static_cast<std::size_t>(order) + 1, 0.0L);
  for (int k = 1; k <= order; ++k) {
    long double sum = 0.0L;
    for (int j = (k + 1) / 2; j <= std::min(k, half); ++j) {
      sum += std::pow(static_cast<long double>(j), half) * factorial(2 * j) /
             (factorial(half - j) * factorial(j) * factorial(j - 1) * factorial(k - j) * factorial(2 * j - k));
    }
    w[static_cast<std::size_t>(k)] = ((k + half) % 2 == 0 ? 1.0L : -1.0L) * sum;
  }
  return w;
}

bool consistent(double a, double b, double tol) {
  return std::isfinite(a) && std::isfinite(b) && a > 0.0 && std::abs(a - b) <= tol * std::abs(a);
}

// Psi sampled on a wide log grid, then interpolated with power-law ends.
std::function<double(double)> tabulate_psi(const std::function<double(double)>& psi, double lo, double hi,
                                           int per_decade) {
  std::vector<double> th = log_grid(lo, hi, per_decade);
  std::vector<double> val(th.size());
  #pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < th.size(); ++i) val[i] = psi(th[i]);
  LogLogInterpolant table(th, val);
  return [table](double theta) { return theta == 0.0 ? 0.0 : table(std::abs(theta)); };
}

}  // namespace

// --- exponents ---------------------------------------------------------------

LadderExponent LadderExponent::from_phi(const PhiModel& phi) {
  LadderExponent l;
  l.name_ = "phi:" + phi.kind();
  if (std::holds_alternative<StablePower>(phi.variant()) || std::holds_alternative<Mixture>(phi.variant())) {
    l.psi_ = [phi](double theta) { return theta == 0.0 ? 0.0 : phi(theta * theta); };
  } else if (const auto* t = std::get_if<Tabulated>(&phi.variant())) {
    LogLogInterpolant table(t->lambda(), t->value());
    l.psi_ = [table](double theta) { return theta == 0.0 ? 0.0 : table(theta * theta); };
  } else {
    l.psi_ = tabulate_psi([phi](double theta) { return phi(theta * theta); }, 1e-12, 1e16, 10);
  }
  return l;
}

LadderExponent LadderExponent::from_exponent(std::function<double(double)> psi, std::string name) {
  LadderExponent l;
  l.psi_ = std::move(psi);
  l.name_ = std::move(name);
  return l;
}

LadderExponent LadderExponent::from_kappa(std::function<double(double)> kappa, std::string name) {
  LadderExponent l;
  l.kappa_ = std::move(kappa);
  l.name_ = std::move(name);
  return l;
}

LadderExponent LadderExponent::from_process(const ProcessModel& model) {
  model.validate();
  auto table = std::make_shared<RadialKernelTable>(model, 1e-7, 1e7, 16);
  LadderExponent l;
  l.name_ = "process:" + model.sub.phi.kind();
  l.psi_ = tabulate_psi([table](double theta) { return psi_eval(*table, theta, 1e-5); }, 1e-6, 1e6, 8);
  return l;
}

double kappa_eval(const LadderExponent& ladder, double lambda, double rel_tol) {
  if (!(lambda > 0.0)) throw DomainError("kappa_eval requires lambda > 0");
  if (ladder.kappa_) return ladder.kappa_(lambda);
  // Fold theta > 1 onto (0, 1] through theta -> 1/theta.
  auto h = [&](double th) {
    return (std::log(ladder.psi_(lambda * th)) + std::log(ladder.psi_(lambda / th))) / (1.0 + th * th);
  };
  QuadSpec spec;
  spec.rel_tol = 1e-12;
  spec.abs_tol = 1e-3 * rel_tol;
  QuadResult r = integrate_from_zero(h, 1.0, spec);
  if (!std::isfinite(r.value)) throw DomainError("Psi must be positive and finite for kappa_eval");
  if (r.error > pi * rel_tol) throw QuadratureError("kappa_eval", r.error / pi);
  return std::exp(r.value / pi);
}

// --- Laplace inversion -------------------------------------------------------

InversionMethod parse_inversion_method(const std::string& s) {
  if (s == "gaver_stehfest") return InversionMethod::GaverStehfest;
  if (s == "post_widder") return InversionMethod::PostWidder;
  throw DomainError("unknown inversion method '" + s + "'");
}

double gaver_stehfest(const std::function<double(double)>& F, double t, int order) {
  if (order < 2 || order % 2 != 0) throw DomainError("Gaver-Stehfest order must be even");
  const std::vector<long double> w = stehfest_weights(order);
  const long double a = kLn2 / t;
  long double sum = 0.0L;
  for (int k = 1; k <= order; ++k) sum += w[static_cast<std::size_t>(k)] * F(static_cast<double>(k * a));
  return static_cast<double>(a * sum);
}

double gaver_wynn(const std::function<double(double)>& F, double t, int functionals) {
  if (functionals < 2) throw DomainError("need at least two Gaver functionals");
  const long double a = kLn2 / t;
  const int m = functionals;
  std::vector<long double> values(static_cast<std::size_t>(2 * m) + 1);
  for (int j = 1; j <= 2 * m; ++j) values[static_cast<std::size_t>(j)] = F(static_cast<double>(j * a));
  std::vector<long double> g(static_cast<std::size_t>(m));
  for (int n = 1; n <= m; ++n) {
    long double s = 0.0L;
    for (int k = 0; k <= n; ++k) s += ((k % 2) ? -1.0L : 1.0L) * binomial(n, k) * values[static_cast<std::size_t>(n + k)];
    g[static_cast<std::size_t>(n - 1)] = a * n * binomial(2 * n, n) * s;
  }
  // Wynn rho: rho_{-1} = 0, rho_0 = g, rho_k^(i) = rho_{k-2}^(i+1) + k / (rho_{k-1}^(i+1) - rho_{k-1}^(i)).
  std::vector<long double> prev(static_cast<std::size_t>(m) + 1, 0.0L), cur = g;
  long double best = g.back();
  for (int k = 1; k < m; ++k) {
    std::vector<long double> next(cur.size() - 1);
    for (std::size_t i = 0; i + 1 < cur.size(); ++i) {
      const long double diff = cur[i + 1] - cur[i];
      next[i] = prev[i + 1] + (diff == 0.0L ? 0.0L : k / diff);
    }
    prev = cur;
    cur = next;
    if (k % 2 == 0) best = cur.front();
  }
  return static_cast<double>(best);
}

double renewal_V(const LadderExponent& ladder, double r, InversionMethod method, int order) {
  if (!(r > 0.0)) throw DomainError("renewal_V requires r > 0");
  auto F = [&ladder](double lam) { return 1.0 / (lam * kappa_eval(ladder, lam, 1e-11)); };
  std::ostringstream diag;
  diag << std::setprecision(10);
  if (method == InversionMethod::GaverStehfest) {
    const double a = gaver_stehfest(F, r, order);
    const double b = gaver_stehfest(F, r, order - 2);
    if (consistent(a, b, 1e-2)) return a;
    diag << "Gaver-Stehfest orders " << order << "/" << order - 2 << " gave " << a << "/" << b << "; ";
  }
  const int m = std::max(4, order / 2 + 2);
  const double a = gaver_wynn(F, r, m);
  const double b = gaver_wynn(F, r, m - 2);
  if (consistent(a, b, 1e-2)) return a;
  diag << "Gaver-Wynn with " << m << "/" << m - 2 << " functionals gave " << a << "/" << b;
  throw InversionError("renewal_V at r=" + std::to_string(r) + " is unstable: " + diag.str());
}

RenewalFunction::RenewalFunction(const LadderExponent& ladder, double r_lo, double r_hi, int points,
                                 InversionMethod method) {
  if (!(r_lo > 0.0) || !(r_hi > r_lo) || points < 4) throw DomainError("renewal table needs 0 < r_lo < r_hi");
  r_.resize(static_cast<std::size_t>(points));
  v_.resize(r_.size());
  const double step = std::log(r_hi / r_lo) / (points - 1);
  for (std::size_t i = 0; i < r_.size(); ++i) r_[i] = r_lo * std::exp(step * static_cast<double>(i));
  r_.back() = r_hi;
  #pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < r_.size(); ++i) v_[i] = renewal_V(ladder, r_[i], method);
  table_ = LogLogInterpolant(r_, v_);
}

double RenewalFunction::operator()(double r) const {
  if (!(r > 0.0)) return 0.0;
  return table_(r);
}

void RenewalFunction::write_csv(std::ostream& os) const {
  os << "# columns: r,V\nr,V\n" << std::setprecision(17);
  for (std::size_t i = 0; i < r_.size(); ++i) os << r_[i] << ',' << v_[i] << '\n';
}

// --- comparability -----------------------------------------------------------

RatioProfile renewal_comparability_check(const LadderExponent& ladder, const PhiModel& phi,
                                         const std::vector<double>& r_grid) {
  RatioProfile p;
  p.label = "V(r)*sqrt(phi(r^-2))";
  std::vector<double> vals(r_grid.size());
  #pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    const double r = r_grid[i];
    vals[i] = renewal_V(ladder, r) * std::sqrt(phi(1.0 / (r * r)));
  }
  for (std::size_t i = 0; i < r_grid.size(); ++i) p.push(r_grid[i], vals[i]);
  return p;
}

RatioProfile renewal_comparability_check(const ProcessModel& model, const std::vector<double>& r_grid) {
  model.validate();
  for (double r : r_grid)
    if (!(r > 0.0 && r <= 100.0)) throw DomainError("renewal_comparability_check needs r in (0, 100]");
  const LadderExponent ladder =
      model.modulated() ? LadderExponent::from_process(model) : LadderExponent::from_phi(model.sub.phi);
  const bool expensive = std::holds_alternative<SectionSix>(model.sub.phi.variant());
  const PhiModel phi = expensive ? model.sub.phi.tabulate(1e-6, 1e16, 20) : model.sub.phi;
  return renewal_comparability_check(ladder, phi, r_grid);
}

RatioProfile kappa_comparability_check(const LadderExponent& ladder, const PhiModel& phi,
                                       const std::vector<double>& lambda_grid) {
  RatioProfile p;
  p.label = "kappa(lambda)/sqrt(phi(lambda^2))";
  for (double l : lambda_grid) p.push(l, kappa_eval(ladder, l) / std::sqrt(phi(l * l)));
  return p;
}

// --- half-line Green operator ------------------------------------------------

GreenResult halfline_green_apply(const RenewalFunction& V, double x, const std::function<double(double)>& f,
                                 double rel_tol, int cells) {
  if (!(x > 0.0)) throw DomainError("halfline_green_apply requires x > 0");
  auto edges = [cells](double lo, double hi) {
    std::vector<double> e{0.0};
    const double step = std::log(hi / lo) / cells;
    for (int i = 0; i <= cells; ++i) e.push_back(lo * std::exp(step * i));
    e.back() = hi;
    return e;
  };
  const std::vector<double> ez = edges(1e-6 * x, x);
  const double y_hi = std::max(V.hi(), 10.0 * x);
  const std::vector<double> ey = edges(1e-6 * x, y_hi);
  std::vector<double> zm, zw, ym, yw;
  for (std::size_t i = 0; i + 1 < ez.size(); ++i) {
    zm.push_back(0.5 * (ez[i] + ez[i + 1]));
    zw.push_back(V(ez[i + 1]) - V(ez[i]));
  }
  for (std::size_t i = 0; i + 1 < ey.size(); ++i) {
    ym.push_back(0.5 * (ey[i] + ey[i + 1]));
    yw.push_back(V(ey[i + 1]) - V(ey[i]));
  }
  const double last_decade = y_hi / 10.0;
  GreenResult res;
  for (std::size_t i = 0; i < ym.size(); ++i) {
    double inner = 0.0;
    for (std::size_t j = 0; j < zm.size(); ++j) inner += zw[j] * f(x + ym[i] - zm[j]);
    const double c = yw[i] * inner;
    res.value += c;
    if (ym[i] >= last_decade) res.truncation += c;
  }
  if (std::abs(res.truncation) > rel_tol * std::abs(res.value) && res.value != 0.0)
    throw QuadratureError("halfline_green_apply truncation", std::abs(res.truncation / res.value));
  return res;
}

// --- interval exit times -----------------------------------------------------

ExperimentReport interval_exit_bound_check(const ProcessModel& model, double r, const std::vector<double>& x_grid,
                                           const IntervalCheckParams& params) {
  model.validate();
  if (!(r > 0.0)) throw DomainError("interval length must be positive");
  for (double x : x_grid)
    if (!(x > 0.0 && x < r)) throw DomainError("x_grid must lie in (0, r)");
  ExperimentReport rep;
  rep.name = "interval_exit_bound";
  rep.seed = params.seed;
  rep.parameters["r"] = std::to_string(r);
  rep.parameters["n"] = std::to_string(params.n);
  rep.parameters["model"] = model.sub.phi.kind();
  rep.columns = {"x", "exit_time", "stderr", "bound", "ratio"};

  // An unmodulated model projects to the same subordinate motion in d = 1;
  // otherwise the first coordinate is followed in a slab.
  ProcessModel sim_model = model;
  if (!model.modulated()) sim_model.d = 1;
  const int d = sim_model.d;
  const Geometry slab = Geometry::slab(d, 0, 0.0, r);
  ExitParams ep;
  const bool stable = std::holds_alternative<StablePower>(model.sub.phi.variant()) && !model.modulated();
  ep.strategy = stable ? ExitStrategy::WosStable : ExitStrategy::Timestep;
  ep.eps_cut = 1e-3 * r;
  const ExitSampler sampler(sim_model, slab, ep);

  const LadderExponent ladder =
      model.modulated() ? LadderExponent::from_process(model) : LadderExponent::from_phi(model.sub.phi);
  const double x_min = *std::min_element(x_grid.begin(), x_grid.end());
  const double r_hi = params.r_max_table > 0.0 ? params.r_max_table : 10.0 * r;
  const RenewalFunction V(ladder, std::min(1e-2 * x_min, 1e-3 * r), r_hi, 400);
  rep.parameters["strategy"] = to_string(ep.strategy);

  for (std::size_t k = 0; k < x_grid.size(); ++k) {
    const double x = x_grid[k];
    Point start(d);
    start[0] = x;
    const auto batch = run_exit_batch(sampler, start, params.n, derive_seed(params.seed, k), params.workers);
    const auto est = exit_time_stats(batch);
    const double bound = 2.0 * V(r) * std::min(V(x), V(r - x));
    rep.add_row("x", {x, est.estimate, est.stderr_, bound, est.estimate / bound});
    std::ostringstream why;
    why << "E_x tau = " << est.estimate << " exceeds bound " << bound << " + 3 stderr at x = " << x;
    rep.require(est.estimate <= bound + 3.0 * est.stderr_, why.str());
    if (est.warning) rep.notes.push_back("censoring above 1% at x = " + std::to_string(x));
  }
  return rep;
}

}  // namespace ubhp
