#include "ubhp/potential.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include "ubhp/errors.hpp"
#include "ubhp/quadrature.hpp"

namespace ubhp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

Point along_axis(const Point& c, double t) {
  Point x = c;
  x[0] += t;
  return x;
}

// Table of j over a range wide enough for every radius an experiment uses.
RadialKernelTable kernel_table(const ProcessModel& model, double lo, double hi) {
  ProcessModel plain = model;
  plain.modulation = Modulation{};
  return RadialKernelTable(plain, lo, hi, 16);
}

double phi_of(const ProcessModel& model, double lambda) { return model.sub.phi(lambda); }

}  // namespace

double spread(const std::vector<double>& values) {
  if (values.empty()) return kInf;
  double lo = kInf, hi = 0.0;
  for (double v : values) {
    if (!(v > 0.0) || !std::isfinite(v)) return kInf;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return hi / lo;
}

// --- bins ---------------------------------------------------------------------

KernelBins KernelBins::shells(const Point& center, double inner, double s_lo, double far, int n_radial, int n_angle) {
  if (!(s_lo > 0.0) || !(far > inner + s_lo) || n_radial < 1) throw DomainError("invalid kernel shell layout");
  KernelBins b;
  b.center = center;
  b.inner = inner;
  b.far = far;
  b.n_angle = n_angle;
  const double s_hi = far - inner;
  for (int k = 0; k <= n_radial; ++k) b.s_edges.push_back(s_lo * std::pow(s_hi / s_lo, static_cast<double>(k) / n_radial));
  b.s_edges.back() = s_hi;
  return b;
}

void KernelBins::validate(int d) const {
  if (s_edges.size() < 2) throw DomainError("kernel bins need at least one shell");
  for (std::size_t i = 1; i < s_edges.size(); ++i)
    if (!(s_edges[i] > s_edges[i - 1])) throw DomainError("kernel shell edges must increase");
  if (n_angle < 1) throw DomainError("n_angle must be positive");
  if (d == 1 && n_angle > 2) throw DomainError("d = 1 allows at most two angular bins");
  if (d > 3 && n_angle != 1) throw DomainError("angular bins are supported for d <= 3");
  if (center.d != d) throw DomainError("bin center has the wrong dimension");
}

long KernelBins::index(const Point& y) const {
  const Point v = y - center;
  const double rho = v.norm();
  if (rho >= far) return -2;
  const double s = rho - inner;
  if (s < s_edges.front()) return -1;
  auto it = std::upper_bound(s_edges.begin(), s_edges.end(), s);
  auto k = static_cast<long>(it - s_edges.begin()) - 1;
  k = std::min(k, static_cast<long>(n_radial()) - 1);
  long a = 0;
  if (n_angle > 1) {
    double frac = 0.0;
    if (v.d == 1) {
      frac = v[0] >= 0.0 ? 0.75 : 0.25;
    } else if (v.d == 2) {
      frac = (std::atan2(v[1], v[0]) + std::numbers::pi) / (2.0 * std::numbers::pi);
    } else {
      frac = (v[0] / rho + 1.0) / 2.0;
    }
    a = std::min(static_cast<long>(frac * n_angle), static_cast<long>(n_angle) - 1);
  }
  return k * n_angle + a;
}

double KernelBins::volume(std::size_t bin) const {
  const std::size_t k = radial_of(bin);
  const int d = center.d;
  const double r1 = inner + s_edges[k], r2 = inner + s_edges[k + 1];
  return sphere_area(d) / d * (std::pow(r2, d) - std::pow(r1, d)) / n_angle;
}

double KernelBins::radius(std::size_t bin) const {
  const std::size_t k = radial_of(bin);
  return inner + std::sqrt(s_edges[k] * s_edges[k + 1]);
}

// --- kernel estimates -----------------------------------------------------------

double KernelEstimate::mass() const {
  if (n == 0) return 0.0;
  std::uint64_t total = inner_count + far_count;
  for (auto c : counts) total += c;
  return static_cast<double>(total) / static_cast<double>(n);
}

double KernelEstimate::relative_error(std::size_t bin) const {
  return density[bin] > 0.0 ? stderr_[bin] / density[bin] : kInf;
}

void KernelEstimate::write_csv(std::ostream& os) const {
  os << "# columns: bin,radial,angle,r_lo,r_hi,radius,count,density,stderr\n";
  os << "bin,radial,angle,r_lo,r_hi,radius,count,density,stderr\n" << std::setprecision(17);
  for (std::size_t b = 0; b < counts.size(); ++b) {
    const std::size_t k = bins.radial_of(b);
    os << b << ',' << k << ',' << bins.angle_of(b) << ',' << bins.inner + bins.s_edges[k] << ','
       << bins.inner + bins.s_edges[k + 1] << ',' << bins.radius(b) << ',' << counts[b] << ',' << density[b] << ','
       << stderr_[b] << '\n';
  }
}

KernelEstimate kernel_from_batch(const ExitBatch& batch, const KernelBins& bins) {
  bins.validate(batch.start.d);
  KernelEstimate k;
  k.bins = bins;
  k.start = batch.start;
  k.n = batch.samples.size();
  k.counts.assign(bins.size(), 0);
  for (const auto& s : batch.samples) {
    if (s.censored) {
      ++k.censored;
      continue;
    }
    const long i = bins.index(s.position);
    if (i == -1)
      ++k.inner_count;
    else if (i == -2)
      ++k.far_count;
    else
      ++k.counts[static_cast<std::size_t>(i)];
  }
  const double n = static_cast<double>(k.n);
  k.density.resize(bins.size());
  k.stderr_.resize(bins.size());
  for (std::size_t b = 0; b < bins.size(); ++b) {
    const double p = static_cast<double>(k.counts[b]) / n;
    const double vol = bins.volume(b);
    k.density[b] = p / vol;
    k.stderr_[b] = std::sqrt(p * (1.0 - p) / n) / vol;
  }
  k.warning = static_cast<double>(k.censored) > 0.01 * n;
  return k;
}

KernelEstimate kernel_estimate(const ProcessModel& model, const Geometry& geometry, const Point& x,
                               const KernelBins& bins, std::uint64_t n, std::uint64_t seed, const ExitParams& params,
                               int workers) {
  bins.validate(model.d);
  const ExitSampler sampler(model, geometry, params);
  return kernel_from_batch(run_exit_batch(sampler, x, n, seed, workers), bins);
}

// --- harmonic functions -----------------------------------------------------------

TargetSet TargetSet::everything() { return {"complement", [](const Point&) { return true; }}; }

TargetSet TargetSet::outside_ball(const Point& c, double radius) {
  return {"outside_ball", [c, radius](const Point& y) { return distance(y, c) >= radius; }};
}

TargetSet TargetSet::outside_ball_halfspace(const Point& c, double radius, const Point& normal) {
  return {"outside_ball_halfspace", [c, radius, normal](const Point& y) {
            const Point v = y - c;
            return v.norm() >= radius && normal.dot(v) > 0.0;
          }};
}

TargetSet TargetSet::outside_ball_closed_halfspace(const Point& c, double radius, const Point& normal) {
  return {"outside_ball_closed_halfspace", [c, radius, normal](const Point& y) {
            const Point v = y - c;
            return v.norm() >= radius && normal.dot(v) <= 0.0;
          }};
}

TargetSet TargetSet::halfspace(const Point& c, const Point& normal) {
  return {"halfspace", [c, normal](const Point& y) { return normal.dot(y - c) > 0.0; }};
}

TargetSet TargetSpec::resolve(const Point& c, double r) const {
  const Point e1 = unit_vector(c.d, 0);
  TargetSet t;
  switch (kind) {
    case Kind::Complement: t = TargetSet::everything(); break;
    case Kind::Right: t = TargetSet::halfspace(c, e1); break;
    case Kind::Far: t = TargetSet::outside_ball(c, factor * r); break;
    case Kind::RightFar: t = TargetSet::outside_ball_halfspace(c, factor * r, e1); break;
    case Kind::LeftFar: t = TargetSet::outside_ball_closed_halfspace(c, factor * r, e1); break;
  }
  t.name = describe();
  return t;
}

std::string TargetSpec::describe() const {
  switch (kind) {
    case Kind::Complement: return "complement";
    case Kind::Right: return "right";
    case Kind::Far: return "far:" + fmt(factor);
    case Kind::RightFar: return "right_far:" + fmt(factor);
    case Kind::LeftFar: return "left_far:" + fmt(factor);
  }
  return "unknown";
}

TargetSpec TargetSpec::parse(const std::string& s) {
  const auto colon = s.find(':');
  const std::string name = s.substr(0, colon);
  double f = 1.0;
  if (colon != std::string::npos) {
    std::size_t used = 0;
    try {
      f = std::stod(s.substr(colon + 1), &used);
    } catch (const std::exception&) {
      throw DomainError("malformed target factor in " + s);
    }
    if (used != s.size() - colon - 1 || !(f > 0.0)) throw DomainError("malformed target factor in " + s);
  }
  if (name == "complement") return {Kind::Complement, 1.0};
  if (name == "right") return {Kind::Right, 1.0};
  if (name == "far") return {Kind::Far, f};
  if (name == "right_far") return {Kind::RightFar, f};
  if (name == "left_far") return {Kind::LeftFar, f};
  throw DomainError("unknown target: " + s);
}

HarmonicEstimate harmonic_from_batch(const ExitBatch& batch, const TargetSet& target) {
  HarmonicEstimate h;
  h.target = target.name;
  std::uint64_t hits = 0;
  for (const auto& s : batch.samples) {
    if (s.censored) continue;
    ++h.n;
    if (target.contains(s.position)) ++hits;
  }
  if (h.n == 0) return h;
  const double n = static_cast<double>(h.n);
  h.value = static_cast<double>(hits) / n;
  h.stderr_ = std::sqrt(h.value * (1.0 - h.value) / n);
  return h;
}

HarmonicEstimate harmonic_eval(const ProcessModel& model, const Geometry& geometry, const TargetSet& target,
                               const Point& x, std::uint64_t n, std::uint64_t seed, const ExitParams& params,
                               int workers) {
  const ExitSampler sampler(model, geometry, params);
  return harmonic_from_batch(run_exit_batch(sampler, x, n, seed, workers), target);
}

// --- generator ------------------------------------------------------------------

namespace {

// Average of f over the sphere of radius rho around x.
double sphere_average(const TestFunction& f, const Point& x, double rho, double rel_tol) {
  const int d = x.d;
  if (d == 1) {
    Point a = x, b = x;
    a[0] += rho;
    b[0] -= rho;
    return 0.5 * (f(a) + f(b));
  }
  const QuadSpec spec{rel_tol, 1e-15};
  std::vector<double> breaks;
  for (int k = 0; k <= 16; ++k) breaks.push_back(2.0 * std::numbers::pi * k / 16.0);
  if (d == 2) {
    auto g = [&](double t) {
      Point y = x;
      y[0] += rho * std::cos(t);
      y[1] += rho * std::sin(t);
      return f(y);
    };
    return integrate(g, breaks, spec).value / (2.0 * std::numbers::pi);
  }
  if (d == 3) {
    // Uniform on the sphere: cos(polar) uniform on [-1, 1].
    auto outer = [&](double c) {
      const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
      auto inner = [&](double t) {
        Point y = x;
        y[0] += rho * c;
        y[1] += rho * s * std::cos(t);
        y[2] += rho * s * std::sin(t);
        return f(y);
      };
      return integrate(inner, breaks, spec).value / (2.0 * std::numbers::pi);
    };
    std::vector<double> cb;
    for (int k = 0; k <= 8; ++k) cb.push_back(-1.0 + 2.0 * k / 8.0);
    return integrate(outer, cb, spec).value / 2.0;
  }
  throw DomainError("generator_apply supports d <= 3");
}

}  // namespace

double generator_apply(const RadialKernelTable& table, const TestFunction& f, const Point& x, double rel_tol) {
  if (x.d != table.dim()) throw DomainError("point and kernel dimensions differ");
  const double fx = f(x);
  // Below rho_s the sphere average is replaced by its second-order Taylor
  // term rho^2 Delta f / (2 d), with the coefficient read off at rho_s.
  constexpr double rho_s = 1e-3;
  const double inner_tol = std::min(1e-10, rel_tol * 1e-3);
  const double q = (sphere_average(f, x, rho_s, inner_tol) - fx) / (rho_s * rho_s);
  auto nu = [&](double r) { return table.nu(r); };
  const QuadSpec spec{rel_tol, 1e-14};
  const auto small = integrate_from_zero([&](double r) { return r * r * nu(r); }, rho_s, spec);
  auto g = [&](double r) { return nu(r) * (sphere_average(f, x, r, inner_tol) - fx); };
  std::vector<double> breaks;
  for (double b = rho_s; b < 1.0; b *= 2.0) breaks.push_back(b);
  breaks.push_back(1.0);
  auto mid = integrate(g, breaks, spec);
  auto tail = integrate_to_infinity(g, 1.0, spec);
  const double total = q * small.value + mid.value + tail.value;
  const double err = std::abs(q) * small.error + mid.error + tail.error;
  if (err > std::max(rel_tol * std::abs(total), 1e-12))
    throw QuadratureError("generator_apply did not reach tolerance", err / std::max(std::abs(total), 1e-300));
  return total;
}

double generator_apply(const ProcessModel& model, const TestFunction& f, const Point& x, double rel_tol) {
  const RadialKernelTable table(model, 1e-7, 1e8, 16);
  return generator_apply(table, f, x, rel_tol);
}

double generator_tail_mass(const RadialKernelTable& table, double R0) {
  auto r = integrate_to_infinity([&](double s) { return table.nu(s); }, R0, QuadSpec{1e-9});
  return 2.0 * r.value;
}

ExitParams default_exit_params(const ProcessModel& model) {
  ExitParams p;
  const bool stable = std::holds_alternative<StablePower>(model.sub.phi.variant()) && !model.modulated();
  p.strategy = stable ? ExitStrategy::WosStable : ExitStrategy::Timestep;
  return p;
}

// --- Poisson kernel bounds ----------------------------------------------------------

ExperimentReport kernel_bounds_experiment(const ProcessModel& model, const Point& x0, const KernelBoundsParams& p) {
  model.validate();
  if (x0.d != model.d) throw DomainError("x0 has the wrong dimension");
  for (double r : p.r_grid)
    if (!(r > 0.0 && r <= 1.0)) throw DomainError("kernel bounds need r in (0, 1]");
  for (double o : p.offsets)
    if (!(o >= 0.0 && o < p.a)) throw DomainError("offsets must lie in [0, a)");
  ExperimentReport rep;
  rep.name = "kernel_bounds";
  rep.seed = p.seed;
  rep.columns = {"r", "offset", "offset2", "radius", "ratio"};
  rep.parameters["model"] = model.sub.phi.kind();
  rep.parameters["d"] = std::to_string(model.d);
  rep.parameters["n"] = std::to_string(p.n);
  rep.parameters["a"] = fmt(p.a);
  const int n_angle = model.d == 1 ? std::min(p.n_angle, 2) : (model.d <= 3 ? p.n_angle : 1);
  const double r_min = *std::min_element(p.r_grid.begin(), p.r_grid.end());
  const double r_max = *std::max_element(p.r_grid.begin(), p.r_grid.end());
  const RadialKernelTable jt = kernel_table(model, 1e-4 * r_min, 100.0 * r_max);
  const ExitParams ep = default_exit_params(model);

  std::vector<double> c_upper, c_lower, c_harnack, c_near;
  std::size_t excluded = 0, considered = 0;
  std::uint64_t tag = 0;
  for (double r : p.r_grid) {
    const Geometry ball = Geometry::ball(x0, r);
    const ExitSampler sampler(model, ball, ep);
    const KernelBins bins = KernelBins::shells(x0, r, 1e-2 * r, 10.0 * r, p.n_radial, n_angle);
    std::vector<KernelEstimate> k;
    for (double o : p.offsets) {
      const auto batch = run_exit_batch(sampler, along_axis(x0, o * r), p.n, derive_seed(p.seed, tag++), p.workers);
      k.push_back(kernel_from_batch(batch, bins));
      if (k.back().warning) rep.notes.push_back("censoring above 1% at r = " + fmt(r));
    }
    const double phr = phi_of(model, 1.0 / (r * r));
    auto usable = [&](const KernelEstimate& e, std::size_t b) {
      ++considered;
      const bool ok = e.counts[b] > 0 && e.relative_error(b) <= p.thresholds.max_rel_stderr;
      if (!ok) ++excluded;
      return ok;
    };
    double upper = 0.0, lower = kInf, harnack = 0.0, near = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) {
      const double o = p.offsets[i];
      const double env = std::sqrt(phr * phi_of(model, 1.0 / std::pow(r - o * r, 2)));
      for (std::size_t b = 0; b < bins.size(); ++b) {
        if (!usable(k[i], b)) continue;
        const double rho = bins.radius(b), s = rho - r;
        const double up = k[i].density[b] * env / jt.j(s);
        upper = std::max(upper, up);
        rep.add_row("upper", {r, o, o, rho, up});
        if (o == 0.0) {
          const double lo = k[i].density[b] * phr / jt.j(rho);
          lower = std::min(lower, lo);
          rep.add_row("lower", {r, o, o, rho, lo});
        }
        if (rho < 2.0 * r) {
          const double nb = k[i].density[b] * std::pow(r, model.d) * std::sqrt(phr / phi_of(model, 1.0 / (s * s)));
          near = std::max(near, nb);
          rep.add_row("near_boundary", {r, o, o, rho, nb});
        }
      }
    }
    for (std::size_t i = 0; i < k.size(); ++i)
      for (std::size_t l = 0; l < k.size(); ++l) {
        if (i == l) continue;
        double worst = 0.0;
        for (std::size_t b = 0; b < bins.size(); ++b) {
          if (!usable(k[i], b) || !usable(k[l], b)) continue;
          worst = std::max(worst, k[i].density[b] / k[l].density[b]);
        }
        harnack = std::max(harnack, worst);
        rep.add_row("start_comparison", {r, p.offsets[i], p.offsets[l], 0.0, worst});
      }
    if (k.size() < 2) harnack = 1.0;
    rep.constants["upper_r" + fmt(r)] = upper;
    rep.constants["lower_r" + fmt(r)] = lower;
    rep.constants["start_comparison_r" + fmt(r)] = harnack;
    rep.constants["near_boundary_r" + fmt(r)] = near;
    c_upper.push_back(upper);
    c_lower.push_back(lower);
    c_harnack.push_back(harnack);
    c_near.push_back(near);
  }
  const double s_up = spread(c_upper), s_lo = spread(c_lower), s_h = spread(c_harnack), s_n = spread(c_near);
  rep.constants["upper_spread"] = s_up;
  rep.constants["lower_spread"] = s_lo;
  rep.constants["start_comparison_spread"] = s_h;
  rep.constants["near_boundary_spread"] = s_n;
  rep.parameters["excluded"] = std::to_string(excluded);
  rep.parameters["considered"] = std::to_string(considered);
  const double lim = p.thresholds.stability;
  rep.require(std::isfinite(s_up) && s_up < lim, "upper kernel constant varies by " + fmt(s_up) + " across r");
  rep.require(std::isfinite(s_lo) && s_lo < lim, "lower kernel constant varies by " + fmt(s_lo) + " across r");
  rep.require(std::isfinite(s_h) && s_h < lim, "start comparison constant varies by " + fmt(s_h) + " across r");
  rep.require(std::isfinite(s_n) && s_n < lim, "near-boundary constant varies by " + fmt(s_n) + " across r");
  if (considered > 0 && static_cast<double>(excluded) > p.thresholds.max_excluded * static_cast<double>(considered))
    rep.mark_inconclusive("more than half of the bin estimates were too noisy");
  return rep;
}

// --- exit-time envelopes ----------------------------------------------------------

ExperimentReport exit_time_profile_check(const ProcessModel& model, const Point& x0, const ExitTimeProfileParams& p) {
  model.validate();
  if (x0.d != model.d) throw DomainError("x0 has the wrong dimension");
  for (double r : p.r_grid)
    if (!(r > 0.0 && r <= 1.0)) throw DomainError("exit-time profiles need r in (0, 1]");
  for (double o : p.offsets)
    if (!(o >= 0.0 && o < 1.0)) throw DomainError("offsets must lie in [0, 1)");
  if (std::find(p.offsets.begin(), p.offsets.end(), 0.0) == p.offsets.end())
    throw DomainError("offsets must include the center 0");
  ExperimentReport rep;
  rep.name = "exit_time_profile";
  rep.seed = p.seed;
  rep.columns = {"r", "offset", "estimate", "stderr", "ratio"};
  rep.parameters["model"] = model.sub.phi.kind();
  rep.parameters["d"] = std::to_string(model.d);
  rep.parameters["n"] = std::to_string(p.n);
  const ExitParams ep = default_exit_params(model);
  const Point e1 = unit_vector(model.d, 0);

  std::vector<double> lower, upper, sub;
  std::uint64_t tag = 0;
  for (double r : p.r_grid) {
    const double phr = phi_of(model, 1.0 / (r * r));
    const ExitSampler sampler(model, Geometry::ball(x0, r), ep);
    double up = 0.0;
    for (double o : p.offsets) {
      const auto est =
          exit_time_stats(run_exit_batch(sampler, along_axis(x0, o * r), p.n, derive_seed(p.seed, tag++), p.workers));
      if (est.warning) rep.notes.push_back("censoring above 1% at r = " + fmt(r) + ", offset " + fmt(o));
      const double env = std::sqrt(phr * phi_of(model, 1.0 / std::pow(r - o * r, 2)));
      const double u = est.estimate * env;
      rep.add_row("upper", {r, o, est.estimate, est.stderr_, u});
      up = std::max(up, u);
      if (o == 0.0) {
        const double l = est.estimate * phi_of(model, 4.0 / (r * r));
        rep.add_row("lower", {r, o, est.estimate, est.stderr_, l});
        lower.push_back(l);
        rep.constants["lower_r" + fmt(r)] = l;
      }
    }
    upper.push_back(up);
    rep.constants["upper_r" + fmt(r)] = up;

    // Sub-domains of B(x0, r) started inside B(x0, a r).
    std::vector<std::pair<std::string, Geometry>> ds{{"ball", Geometry::ball(x0, r)},
                                                     {"halfspace_cap", Geometry::halfspace_cap_ball(x0, r, e1)}};
    if (model.d >= 2) {
      ds.emplace_back("cone_cap", Geometry::cone_cap_ball(x0, r, e1, std::numbers::pi / 4.0));
      ds.emplace_back("slit_ball", Geometry::slit_ball(x0, r, 0.05 * r));
    }
    double worst = 0.0;
    for (const auto& [name, D] : ds) {
      const ExitSampler s(model, D, ep);
      for (double f : {0.25, 0.5, 0.75}) {
        const Point x = along_axis(x0, f * p.a * r);
        if (!D.contains(x)) continue;
        const auto batch = run_exit_batch(s, x, p.n, derive_seed(p.seed, tag++), p.workers);
        const auto est = exit_time_stats(batch);
        const auto out = harmonic_from_batch(batch, TargetSet::outside_ball(x0, r));
        const double ratio = out.value / (phr * est.estimate);
        rep.add_row("subdomain_" + name, {r, f * p.a, out.value, out.stderr_, ratio});
        worst = std::max(worst, ratio);
      }
    }
    sub.push_back(worst);
    rep.constants["subdomain_r" + fmt(r)] = worst;
  }
  const double s_lo = spread(lower), s_up = spread(upper);
  const double sub_max = *std::max_element(sub.begin(), sub.end());
  rep.constants["lower_min"] = *std::min_element(lower.begin(), lower.end());
  rep.constants["upper_max"] = *std::max_element(upper.begin(), upper.end());
  rep.constants["lower_spread"] = s_lo;
  rep.constants["upper_spread"] = s_up;
  rep.constants["subdomain_max"] = sub_max;
  const double lim = p.thresholds.stability;
  rep.require(std::isfinite(s_lo) && s_lo < lim, "lower exit-time constant varies by " + fmt(s_lo) + " across r");
  rep.require(std::isfinite(s_up) && s_up < lim, "upper exit-time constant varies by " + fmt(s_up) + " across r");
  rep.require(std::isfinite(sub_max) && sub_max > 0.0, "sub-domain exit constant is not finite");
  return rep;
}

// --- Harnack ------------------------------------------------------------------------

ExperimentReport harnack_experiment(const ProcessModel& model, const Point& x0, const HarnackParams& p) {
  model.validate();
  if (x0.d != model.d) throw DomainError("x0 has the wrong dimension");
  if (!(p.a > 0.0 && p.a < 1.0)) throw DomainError("a must lie in (0, 1)");
  for (double r : p.radii)
    if (!(r > 0.0 && r < 1.0)) throw DomainError("Harnack radii must lie in (0, 1)");
  for (double g : p.grid)
    if (!(std::abs(g) <= 1.0)) throw DomainError("Harnack grid entries must lie in [-1, 1]");
  std::vector<TargetSpec> targets = p.targets;
  if (targets.empty())
    targets = {{TargetSpec::Kind::Complement, 1.0}, {TargetSpec::Kind::Right, 1.0}, {TargetSpec::Kind::Far, 2.0}};
  ExperimentReport rep;
  rep.name = "harnack";
  rep.seed = p.seed;
  rep.columns = {"r", "target", "x", "u", "stderr"};
  rep.parameters["model"] = model.sub.phi.kind();
  rep.parameters["d"] = std::to_string(model.d);
  rep.parameters["n"] = std::to_string(p.n);
  rep.parameters["a"] = fmt(p.a);
  const ExitParams ep = default_exit_params(model);

  double overall = 0.0;
  std::uint64_t tag = 0;
  for (double r : p.radii) {
    const ExitSampler sampler(model, Geometry::ball(x0, r), ep);
    std::vector<ExitBatch> batches;
    for (double g : p.grid)
      batches.push_back(run_exit_batch(sampler, along_axis(x0, g * p.a * r), p.n, derive_seed(p.seed, tag++), p.workers));
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const TargetSet A = targets[t].resolve(x0, r);
      double lo = kInf, hi = 0.0;
      for (std::size_t i = 0; i < batches.size(); ++i) {
        const auto u = harmonic_from_batch(batches[i], A);
        rep.add_row(A.name, {r, static_cast<double>(t), p.grid[i] * p.a * r, u.value, u.stderr_});
        if (!(u.value > 0.0) || u.stderr_ > p.thresholds.max_rel_stderr * u.value)
          rep.mark_inconclusive("u for " + A.name + " at r = " + fmt(r) + " has relative error above " +
                                fmt(p.thresholds.max_rel_stderr));
        lo = std::min(lo, u.value);
        hi = std::max(hi, u.value);
      }
      const double c = lo > 0.0 ? hi / lo : kInf;
      rep.constants["harnack_" + A.name + "_r" + fmt(r)] = c;
      overall = std::max(overall, c);
      rep.require(std::isfinite(c) && c <= p.thresholds.harnack_max,
                  "Harnack constant " + fmt(c) + " for " + A.name + " at r = " + fmt(r));
    }
  }
  rep.constants["harnack_max"] = overall;
  return rep;
}

// --- factorization ------------------------------------------------------------------

ExperimentReport factorization_experiment(const ProcessModel& model, const Geometry& D, const Point& z0, double r,
                                          const FactorizationParams& p) {
  model.validate();
  if (!(r > 0.0)) throw DomainError("radius must be positive");
  if (D.dim() != model.d || z0.d != model.d) throw DomainError("dimension mismatch");
  const Geometry U = D.intersect_ball(z0, r);
  std::vector<Point> xs;
  for (double t : p.x_grid) {
    const Point x = along_axis(z0, t * r);
    if (!(t > 0.0 && t < 0.5) || !U.contains(x)) throw DomainError("grid point " + format_point(x) + " is not in U cap B(z0, r/2)");
    xs.push_back(x);
  }
  ExperimentReport rep;
  rep.name = "factorization";
  rep.seed = p.seed;
  rep.columns = {"x", "u", "u_stderr", "exit_time", "exit_time_stderr", "ratio", "ratio_stderr"};
  rep.parameters["model"] = model.sub.phi.kind();
  rep.parameters["geometry"] = D.type();
  rep.parameters["r"] = fmt(r);
  rep.parameters["n"] = std::to_string(p.n);
  const ExitParams ep = default_exit_params(model);
  const ExitSampler sampler(model, U, ep);
  const TargetSet beyond = TargetSet::outside_ball(z0, r);
  const int d = model.d;

  // I = int_{|y - z0| >= r} j + int_{r/2 < |y - z0| < r} j u; the second part
  // samples y from the normalised radial law and follows one path from y.
  const RadialKernelTable jt = kernel_table(model, 1e-3 * r, 1e6 * r);
  auto radial = [&](double s) { return sphere_area(d) * std::pow(s, d - 1) * jt.j(s); };
  const double i_far = integrate_to_infinity(radial, r, QuadSpec{1e-9}).value;
  const double z_ann = integrate(radial, 0.5 * r, r, QuadSpec{1e-10}).value;
  const std::uint64_t seed_ann = derive_seed(p.seed, 0xa11);
  const double top = radial(0.5 * r);
  std::vector<double> hit(p.n, 0.0);
  const auto count = static_cast<long long>(p.n);
  const int threads = p.workers > 0 ? p.workers : omp_get_max_threads();
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 256) num_threads(threads)
  for (long long i = 0; i < count; ++i) {
    try {
      Rng rng = substream(seed_ann, static_cast<std::uint64_t>(i));
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      double s = 0.0;
      do s = r * (0.5 + 0.5 * unif(rng));
      while (unif(rng) * top > radial(s));
      const Point y = z0 + s * sample_direction(d, rng);
      if (U.contains(y) && beyond.contains(sampler.sample(y, rng).position)) hit[static_cast<std::size_t>(i)] = 1.0;
    } catch (...) {
#pragma omp critical(ubhp_factorization_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  double mean = 0.0;
  for (double h : hit) mean += h;
  mean /= static_cast<double>(p.n);
  const double i_ann = z_ann * mean;
  const double i_ann_se = z_ann * std::sqrt(mean * (1.0 - mean) / static_cast<double>(p.n));
  const double I = i_far + i_ann;
  rep.constants["I"] = I;
  rep.parameters["I_far"] = fmt(i_far);
  rep.parameters["I_annulus"] = fmt(i_ann);
  if (i_ann_se > p.thresholds.max_rel_stderr * I) rep.mark_inconclusive("I is below the Monte Carlo noise floor");

  std::vector<double> ratio, ratio_se;
  double C = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto batch = run_exit_batch(sampler, xs[k], p.n, derive_seed(p.seed, k + 1), p.workers);
    const auto u = harmonic_from_batch(batch, beyond);
    const auto t = exit_time_stats(batch);
    if (!(u.value > 0.0) || u.stderr_ > p.thresholds.max_rel_stderr * u.value)
      rep.mark_inconclusive("u at " + format_point(xs[k]) + " is below the noise floor");
    const double q = u.value / (t.estimate * I);
    const double q_se = q * std::hypot(u.value > 0.0 ? u.stderr_ / u.value : kInf, t.stderr_ / t.estimate);
    ratio.push_back(q);
    ratio_se.push_back(q_se);
    rep.add_row("x", {p.x_grid[k] * r, u.value, u.stderr_, t.estimate, t.stderr_, q, q_se});
    C = std::max(C, std::max(q, 1.0 / q));
  }
  // Largest pairwise gap in units of the joint standard error.
  double worst = 0.0;
  for (std::size_t i = 0; i < ratio.size(); ++i)
    for (std::size_t j = i + 1; j < ratio.size(); ++j)
      worst = std::max(worst, std::abs(ratio[i] - ratio[j]) / std::hypot(ratio_se[i], ratio_se[j]));
  rep.constants["C"] = C;
  rep.constants["ratio_spread"] = spread(ratio);
  rep.constants["max_gap_sigma"] = worst;
  rep.require(std::isfinite(C), "factorization constant is not finite");
  rep.require(worst <= 3.0, "ratio varies with x by " + fmt(worst) + " joint standard errors");
  return rep;
}

// --- boundary Harnack ---------------------------------------------------------------

std::vector<Point> default_bhp_grid(int d) {
  std::vector<Point> g;
  for (double t : {0.05, 0.1, 0.2, 0.4}) {
    Point x(d);
    x[0] = t;
    g.push_back(x);
  }
  if (d >= 2) {
    for (double s : {0.1, -0.1}) {
      Point x(d);
      x[0] = 0.3;
      x[1] = s;
      g.push_back(x);
    }
  }
  return g;
}

ExperimentReport bhp_experiment(const ProcessModel& model, const Geometry& D, const Point& z0, double r,
                                const BhpParams& p) {
  model.validate();
  if (!(r > 0.0)) throw DomainError("radius must be positive");
  if (D.dim() != model.d || z0.d != model.d) throw DomainError("dimension mismatch");
  const Geometry U = D.intersect_ball(z0, r);
  const auto rel = p.x_grid.empty() ? default_bhp_grid(model.d) : p.x_grid;
  std::vector<Point> xs;
  for (const auto& g : rel) {
    const Point x = z0 + r * g;
    if (!(g.norm() < 0.5) || !U.contains(x))
      throw DomainError("grid point " + format_point(x) + " is not in D cap B(z0, r/2)");
    xs.push_back(x);
  }
  ExperimentReport rep;
  rep.name = "bhp";
  rep.seed = p.seed;
  rep.columns = {"index", "u", "u_stderr", "v", "v_stderr", "u_over_v"};
  rep.parameters["model"] = model.sub.phi.kind();
  rep.parameters["geometry"] = D.type();
  rep.parameters["r"] = fmt(r);
  rep.parameters["n"] = std::to_string(p.n);
  rep.parameters["A1"] = p.a1.describe();
  rep.parameters["A2"] = p.a2.describe();
  const ExitParams ep = default_exit_params(model);
  const ExitSampler su(model, U, ep), sd(model, D, ep);
  const TargetSet A1 = p.a1.resolve(z0, r), A2 = p.a2.resolve(z0, r);
  const int n_angle = model.d == 1 ? std::min(p.n_angle, 2) : (model.d <= 3 ? p.n_angle : 1);
  const double reach = std::isfinite(D.bounding_radius())
                           ? distance(z0, D.bounding_center()) + D.bounding_radius()
                           : 10.0 * r;
  const KernelBins bins = KernelBins::shells(z0, r, 0.1 * r, 10.0 * std::max(reach, r), p.n_radial, n_angle);
  const double tol = p.thresholds.max_rel_stderr;

  std::size_t excluded = 0, considered = 0;
  std::vector<double> q;  // u / v at usable points
  std::vector<KernelEstimate> kernels;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto bu = run_exit_batch(su, xs[k], p.n, derive_seed(p.seed, 2 * k), p.workers);
    const auto u = harmonic_from_batch(bu, A1), v = harmonic_from_batch(bu, A2);
    rep.add_row("harmonic", {static_cast<double>(k), u.value, u.stderr_, v.value, v.stderr_,
                             v.value > 0.0 ? u.value / v.value : kInf});
    ++considered;
    if (u.value > 0.0 && v.value > 0.0 && u.stderr_ <= tol * u.value && v.stderr_ <= tol * v.value)
      q.push_back(u.value / v.value);
    else
      ++excluded;
    const auto bd = run_exit_batch(sd, xs[k], p.n, derive_seed(p.seed, 2 * k + 1), p.workers);
    kernels.push_back(kernel_from_batch(bd, bins));
  }
  double c1 = kInf, c1_swap = kInf;
  if (q.size() >= 2) {
    const auto [lo, hi] = std::minmax_element(q.begin(), q.end());
    c1 = *hi / *lo;
    std::vector<double> inv;
    for (double v : q) inv.push_back(1.0 / v);
    const auto [ilo, ihi] = std::minmax_element(inv.begin(), inv.end());
    c1_swap = *ihi / *ilo;
  }

  // Kernel cross ratios over bins every start point resolves.
  std::vector<std::size_t> good;
  for (std::size_t b = 0; b < bins.size(); ++b) {
    ++considered;
    bool ok = true;
    for (const auto& kk : kernels) ok = ok && kk.counts[b] > 0 && kk.relative_error(b) <= tol;
    if (ok)
      good.push_back(b);
    else
      ++excluded;
  }
  double c2 = 1.0;
  for (std::size_t i = 0; i < kernels.size(); ++i)
    for (std::size_t j = i + 1; j < kernels.size(); ++j)
      for (std::size_t a = 0; a < good.size(); ++a)
        for (std::size_t b = a + 1; b < good.size(); ++b) {
          const auto& ki = kernels[i].density;
          const auto& kj = kernels[j].density;
          const double cr = ki[good[a]] * kj[good[b]] / (ki[good[b]] * kj[good[a]]);
          c2 = std::max(c2, std::max(cr, 1.0 / cr));
        }
  if (good.size() < 2) c2 = kInf;
  for (std::size_t b : good)
    rep.add_row("kernel_bin", {static_cast<double>(b), bins.radius(b), 0.0, 0.0, 0.0,
                               kernels.front().density[b] / kernels.back().density[b]});

  rep.constants["bhp_harmonic"] = c1;
  rep.constants["bhp_harmonic_swapped"] = c1_swap;
  rep.constants["bhp_kernel"] = c2;
  rep.parameters["excluded"] = std::to_string(excluded);
  rep.parameters["considered"] = std::to_string(considered);
  rep.require(std::isfinite(c1), "harmonic ratio constant is not finite");
  rep.require(std::isfinite(c2), "kernel cross ratio constant is not finite");
  if (static_cast<double>(excluded) > p.thresholds.max_excluded * static_cast<double>(considered))
    rep.mark_inconclusive("more than half of the estimates were excluded as too noisy");
  return rep;
}

std::vector<NamedGeometry> standard_open_sets(int d, const Point& z0, double R, double aperture,
                                              double slit_half_width) {
  if (d < 2) throw DomainError("the standard open sets need d >= 2");
  const Point e1 = unit_vector(d, 0);
  return {{"halfspace_cap", Geometry::halfspace_cap_ball(z0, R, e1)},
          {"cone_cap", Geometry::cone_cap_ball(z0, R, e1, aperture)},
          {"slit_ball", Geometry::slit_ball(z0, R, slit_half_width)}};
}

std::vector<NamedGeometry> select_open_sets(const std::vector<NamedGeometry>& all,
                                            const std::vector<std::string>& names) {
  std::vector<NamedGeometry> out;
  for (const auto& n : names) {
    auto it = std::find_if(all.begin(), all.end(), [&](const NamedGeometry& g) { return g.name == n; });
    if (it == all.end()) throw DomainError("unknown open set: " + n);
    out.push_back(*it);
  }
  return out;
}

namespace {

void absorb(ExperimentReport& into, const ExperimentReport& sub, const std::string& prefix) {
  for (const auto& r : sub.rows) {
    into.rows.push_back(r);
    into.rows.back().tag = prefix + "/" + r.tag;
  }
  for (const auto& n : sub.notes) into.notes.push_back(prefix + ": " + n);
  if (sub.status == Status::Fail) into.require(false, prefix + " failed");
  if (sub.status == Status::Inconclusive) into.mark_inconclusive(prefix + " was inconclusive");
}

}  // namespace

ExperimentReport factorization_family(const ProcessModel& model, const std::vector<NamedGeometry>& sets,
                                      const Point& z0, double r, const FactorizationParams& p) {
  ExperimentReport rep;
  rep.name = "factorization_family";
  rep.seed = p.seed;
  rep.columns = {"x", "u", "u_stderr", "exit_time", "exit_time_stderr", "ratio", "ratio_stderr"};
  rep.parameters["r"] = fmt(r);
  std::vector<double> cs;
  for (const auto& g : sets) {
    const auto sub = factorization_experiment(model, g.geometry, z0, r, p);
    absorb(rep, sub, g.name);
    for (const auto& [k, v] : sub.constants) rep.constants[g.name + "_" + k] = v;
    cs.push_back(sub.constants.at("C"));
  }
  const double s = spread(cs);
  rep.constants["C_spread"] = s;
  rep.require(std::isfinite(s) && s < p.thresholds.stability, "factorization constant varies by " + fmt(s));
  return rep;
}

ExperimentReport bhp_family(const ProcessModel& model, const std::vector<NamedGeometry>& sets, const Point& z0,
                            const std::vector<double>& r_grid, const BhpParams& p) {
  ExperimentReport rep;
  rep.name = "bhp_family";
  rep.seed = p.seed;
  rep.columns = {"index", "u", "u_stderr", "v", "v_stderr", "u_over_v"};
  std::vector<double> c1, c2;
  double swap_gap = 0.0;
  std::size_t excluded = 0, considered = 0;
  for (const auto& g : sets)
    for (double r : r_grid) {
      const std::string key = g.name + "_r" + fmt(r);
      const auto sub = bhp_experiment(model, g.geometry, z0, r, p);
      absorb(rep, sub, key);
      for (const auto& [k, v] : sub.constants) rep.constants[key + "_" + k] = v;
      c1.push_back(sub.constants.at("bhp_harmonic"));
      c2.push_back(sub.constants.at("bhp_kernel"));
      swap_gap = std::max(swap_gap, std::abs(sub.constants.at("bhp_harmonic") - sub.constants.at("bhp_harmonic_swapped")));
      excluded += std::stoul(sub.parameters.at("excluded"));
      considered += std::stoul(sub.parameters.at("considered"));
    }
  const double s1 = spread(c1), s2 = spread(c2);
  rep.constants["bhp_harmonic_max"] = *std::max_element(c1.begin(), c1.end());
  rep.constants["bhp_kernel_max"] = *std::max_element(c2.begin(), c2.end());
  rep.constants["bhp_harmonic_spread"] = s1;
  rep.constants["bhp_kernel_spread"] = s2;
  rep.constants["swap_gap"] = swap_gap;
  rep.parameters["excluded"] = std::to_string(excluded);
  rep.parameters["considered"] = std::to_string(considered);
  const double lim = p.thresholds.stability;
  rep.require(swap_gap <= 1e-12 * rep.constants["bhp_harmonic_max"], "swapping the targets changed the constant");
  rep.require(std::isfinite(s1) && s1 < lim, "harmonic ratio constant varies by " + fmt(s1));
  rep.require(std::isfinite(s2) && s2 < lim, "kernel cross ratio constant varies by " + fmt(s2));
  return rep;
}

ExperimentReport seed_stability(const std::map<std::string, double>& a, const std::map<std::string, double>& b,
                                double tolerance) {
  ExperimentReport rep;
  rep.name = "seed_stability";
  rep.columns = {"first", "second", "relative_difference"};
  rep.parameters["tolerance"] = fmt(tolerance);
  std::size_t shared = 0;
  for (const auto& [k, va] : a) {
    auto it = b.find(k);
    if (it == b.end()) continue;
    ++shared;
    const double vb = it->second;
    const double lo = std::min(std::abs(va), std::abs(vb));
    const double diff = va == vb ? 0.0 : (lo > 0.0 ? std::abs(va - vb) / lo : kInf);
    rep.add_row(k, {va, vb, diff});
    rep.require(std::isfinite(diff) && diff <= tolerance, k + " differs by " + fmt(diff));
  }
  if (shared == 0) rep.require(false, "the two runs share no constants");
  return rep;
}

}  // namespace ubhp
