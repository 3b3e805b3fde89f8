#include "ubhp/sim.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <numbers>

#include "ubhp/errors.hpp"
#include "ubhp/quadrature.hpp"

namespace ubhp {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double open_uniform(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double v = 0.0;
  while (v == 0.0) v = u(rng);
  return v;
}

double standard_normal(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return n(rng);
}

// Builds the inverse of a decreasing tail mass T on a grid of jump sizes:
// the interpolant maps T(x) back to x.
LogLogInterpolant invert_tail(const std::vector<double>& x, const std::vector<double>& tail) {
  std::vector<double> tx, xx;
  for (std::size_t i = x.size(); i-- > 0;) {
    if (!(tail[i] > 0.0) || !std::isfinite(tail[i])) continue;
    if (!tx.empty() && tail[i] <= tx.back()) continue;
    tx.push_back(tail[i]);
    xx.push_back(x[i]);
  }
  if (tx.size() < 4) throw SamplerError("jump tail table is degenerate");
  return LogLogInterpolant(tx, xx);
}

// Power-law slope of f between a and b in log-log coordinates.
double log_slope(double fa, double fb, double a, double b) { return std::log(fb / fa) / std::log(b / a); }

}  // namespace

Rng substream(std::uint64_t seed, std::uint64_t index) {
  return Rng(splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(seed ^ splitmix64(tag ^ 0xd1b54a32d192ed03ULL));
}

double sample_stable_subordinator_increment(double a, double t, Rng& rng) {
  if (!(a > 0.0 && a < 1.0)) throw DomainError("stable subordinator index must lie in (0,1)");
  if (!(t >= 0.0)) throw DomainError("negative time step");
  if (t == 0.0) return 0.0;
  if (a == 0.5) {
    // Levy distribution: S_t = t^2 / (2 Z^2).
    const double z = standard_normal(rng);
    return t * t / (2.0 * z * z);
  }
  const double u = std::numbers::pi * open_uniform(rng);
  const double e = -std::log(open_uniform(rng));
  const double s = std::sin(a * u) / std::pow(std::sin(u), 1.0 / a) *
                   std::pow(std::sin((1.0 - a) * u) / e, (1.0 - a) / a);
  return std::pow(t, 1.0 / a) * s;
}

Point sample_direction(int d, Rng& rng) {
  Point p(d);
  double n = 0.0;
  while (!(n > 0.0)) {
    for (int i = 0; i < d; ++i) p[i] = standard_normal(rng);
    n = p.norm();
  }
  p *= 1.0 / n;
  return p;
}

IncrementSampler::IncrementSampler(const ProcessModel& model, double eps_cut, bool force_kernel) {
  model.validate();
  d_ = model.d;
  eps_ = eps_cut;
  const auto& v = model.sub.phi.variant();
  if (std::holds_alternative<SectionSix>(v))
    clock_phi_ = model.sub.phi.tabulate(1e-12, 1e16, 16);
  else
    clock_phi_ = model.sub.phi;

  const bool kernel = force_kernel || model.modulated();
  if (!kernel && std::holds_alternative<StablePower>(v)) {
    kind_ = Kind::StableExact;
    alpha_ = std::get<StablePower>(v).alpha;
    return;
  }
  if (!kernel && std::holds_alternative<Mixture>(v)) {
    kind_ = Kind::MixtureExact;
    terms_ = std::get<Mixture>(v).terms;
    return;
  }
  if (!(eps_cut > 0.0)) throw DomainError("eps_cut must be positive");

  if (!kernel) {
    // Subordinator jumps below eps^2 become drift, larger ones compound Poisson.
    kind_ = Kind::SubordinatedCompoundPoisson;
    const double s0 = eps_cut * eps_cut;
    const auto grid = log_grid(s0, s0 * 1e14, 8);
    std::vector<double> tail(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) tail[i] = mu_tail(model.sub, grid[i]);
    rate_ = tail.front();
    inverse_tail_ = invert_tail(grid, tail);
    auto r = integrate_from_zero([&](double s) { return s * mu_density(model.sub, s); }, s0, QuadSpec{1e-7});
    drift_ = r.value;
    return;
  }

  kind_ = Kind::JumpKernelCompoundPoisson;
  const double lo = eps_cut * 1e-3, hi = std::max(1e4, eps_cut * 1e8);
  const RadialKernelTable table(model, lo, hi, 12);
  auto nu = [&](double r) { return table.nu(r); };
  const auto grid = log_grid(eps_cut, hi, 8);
  std::vector<double> tail(grid.size());
  // Beyond hi the radial density is a power law r^p with p < -1.
  const double p = log_slope(nu(hi / 2.0), nu(hi), hi / 2.0, hi);
  if (!(p < -1.0)) throw SamplerError("radial jump density is not integrable at infinity");
  tail.back() = nu(hi) * hi / (-p - 1.0);
  for (std::size_t i = grid.size() - 1; i-- > 0;) {
    auto seg = integrate(nu, grid[i], grid[i + 1], QuadSpec{1e-9});
    tail[i] = tail[i + 1] + seg.value;
  }
  rate_ = tail.front();
  inverse_tail_ = invert_tail(grid, tail);
  auto sv = integrate_from_zero([&](double r) { return r * r * nu(r); }, eps_cut, QuadSpec{1e-8});
  small_var_ = sv.value / d_;
}

double IncrementSampler::clock(double r) const { return 1.0 / clock_phi_(1.0 / (r * r)); }

double IncrementSampler::sample_subordinator(double t, Rng& rng) const {
  switch (kind_) {
    case Kind::StableExact:
      return sample_stable_subordinator_increment(alpha_ / 2.0, t, rng);
    case Kind::MixtureExact: {
      double s = 0.0;
      for (const auto& term : terms_) {
        const double a = term.alpha / 2.0;
        s += std::pow(term.weight, 1.0 / a) * sample_stable_subordinator_increment(a, t, rng);
      }
      return s;
    }
    case Kind::SubordinatedCompoundPoisson: {
      std::poisson_distribution<long long> count(rate_ * t);
      double s = drift_ * t;
      for (long long k = count(rng); k > 0; --k) s += inverse_tail_(rate_ * open_uniform(rng));
      return s;
    }
    default:
      throw SamplerError("not a subordinated sampler");
  }
}

Point IncrementSampler::sample(double t, Rng& rng) const {
  Point y(d_);
  if (kind_ != Kind::JumpKernelCompoundPoisson) {
    const double sd = std::sqrt(2.0 * sample_subordinator(t, rng));
    for (int i = 0; i < d_; ++i) y[i] = sd * standard_normal(rng);
    return y;
  }
  const double sd = std::sqrt(small_var_ * t);
  for (int i = 0; i < d_; ++i) y[i] = sd * standard_normal(rng);
  std::poisson_distribution<long long> count(rate_ * t);
  for (long long k = count(rng); k > 0; --k) {
    const double r = inverse_tail_(rate_ * open_uniform(rng));
    y += r * sample_direction(d_, rng);
  }
  return y;
}

Point sample_sbm_increment(const ProcessModel& model, double t, double eps_cut, Rng& rng) {
  if (model.modulated()) throw ModelError("a modulated kernel is not subordinate Brownian motion");
  return IncrementSampler(model, eps_cut).sample(t, rng);
}

Point sample_jump_process_increment(const ProcessModel& model, double t, double eps_cut, Rng& rng) {
  return IncrementSampler(model, eps_cut, true).sample(t, rng);
}

double stable_ball_exit_time(double alpha, int d, double radius, double x_norm) {
  if (x_norm >= radius) return 0.0;
  const double h = 0.5 * d;
  return std::tgamma(h) * std::pow(radius * radius - x_norm * x_norm, alpha / 2.0) /
         (std::pow(2.0, alpha) * std::tgamma(1.0 + alpha / 2.0) * std::tgamma(h + alpha / 2.0));
}

ExitSample sample_ball_exit_stable(double alpha, int d, const Point& center, double radius, const Point& x,
                                   Rng& rng) {
  if (!(alpha > 0.0 && alpha < 2.0)) throw DomainError("alpha must lie in (0,2)");
  if (!(radius > 0.0)) throw DomainError("ball radius must be positive");
  const double off = distance(x, center);
  if (!(off < radius)) throw DomainError("start point is not inside the ball");
  std::gamma_distribution<double> ga(alpha / 2.0, 1.0), gb(1.0 - alpha / 2.0, 1.0);
  constexpr int kCap = 10000;
  for (int attempt = 0; attempt < kCap; ++attempt) {
    // From the center |Y - c|^2 / r^2 = 1 / B with B ~ Beta(alpha/2, 1 - alpha/2).
    const double g1 = ga(rng), g2 = gb(rng);
    if (!(g1 > 0.0)) continue;
    const double rho = radius * std::sqrt((g1 + g2) / g1);
    Point y = center + rho * sample_direction(d, rng);
    if (off == 0.0) return ExitSample{y, 0.0, true, 1, false};
    // Target over center density, normalised by its supremum.
    const double accept = std::pow((radius - off) * rho / (radius * distance(y, x)), d);
    if (open_uniform(rng) < accept) return ExitSample{y, 0.0, true, 1, false};
  }
  throw SamplerError("ball exit rejection sampler exceeded its attempt cap");
}

ExitStrategy parse_exit_strategy(const std::string& s) {
  if (s == "wos_stable" || s == "wos") return ExitStrategy::WosStable;
  if (s == "timestep") return ExitStrategy::Timestep;
  throw DomainError("unknown exit strategy: " + s);
}

const char* to_string(ExitStrategy s) { return s == ExitStrategy::WosStable ? "wos_stable" : "timestep"; }

ExitSampler::ExitSampler(const ProcessModel& model, const Geometry& geometry, const ExitParams& params)
    : model_(model), geometry_(geometry), params_(params) {
  model.validate();
  if (geometry.dim() != model.d) throw DomainError("geometry and model dimensions differ");
  if (!(params_.c_h > 0.0)) throw DomainError("c_h must be positive");
  scale_ = std::isfinite(geometry.bounding_radius()) ? geometry.bounding_radius()
                                                     : std::max(1.0, geometry.dist_to_complement(geometry.witness()));
  if (params_.eps_cut <= 0.0) params_.eps_cut = 1e-3 * scale_;
  if (params_.strategy == ExitStrategy::WosStable) {
    const auto* st = std::get_if<StablePower>(&model.sub.phi.variant());
    if (!st || model.modulated()) throw ModelError("walk on spheres needs an unmodulated stable model");
    alpha_ = st->alpha;
  } else {
    increments_ = IncrementSampler(model, params_.eps_cut);
  }
}

ExitSample ExitSampler::sample(const Point& x0, Rng& rng) const {
  if (!geometry_.contains(x0)) throw DomainError("start point " + format_point(x0) + " is outside the domain");
  ExitSample out;
  Point x = x0;
  const int d = model_.d;
  double last_h = 0.0;
  while (out.steps < params_.max_steps) {
    const double dist = geometry_.dist_to_complement(x);
    Point y(d);
    if (params_.strategy == ExitStrategy::WosStable) {
      if (!(dist > 0.0)) {
        out.position = x;
        out.exited_by_jump = false;
        return out;
      }
      y = sample_ball_exit_stable(alpha_, d, x, dist, x, rng).position;
      out.time += stable_ball_exit_time(alpha_, d, dist, 0.0);
    } else {
      // Steps shrink with the distance to the boundary down to eps_cut.
      last_h = params_.c_h * increments_.clock(std::max(dist, params_.eps_cut));
      y = x + increments_.sample(last_h, rng);
      out.time += last_h;
    }
    ++out.steps;
    if (!geometry_.contains(y)) {
      // The exit happened somewhere inside the last step; credit its midpoint.
      if (params_.strategy == ExitStrategy::Timestep) out.time -= 0.5 * last_h;
      out.position = y;
      out.exited_by_jump = geometry_.dist_to_domain(y) > 0.0;
      return out;
    }
    x = y;
  }
  out.position = x;
  out.censored = true;
  return out;
}

ExitSample sample_exit(const ProcessModel& model, const Geometry& geometry, const Point& x, const ExitParams& params,
                       Rng& rng) {
  return ExitSampler(model, geometry, params).sample(x, rng);
}

std::size_t ExitBatch::censored() const {
  return static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(), [](auto& s) { return s.censored; }));
}

double ExitBatch::jump_fraction() const {
  std::size_t exits = 0, jumps = 0;
  for (const auto& s : samples) {
    if (s.censored) continue;
    ++exits;
    jumps += s.exited_by_jump ? 1 : 0;
  }
  return exits ? static_cast<double>(jumps) / static_cast<double>(exits) : 0.0;
}

void ExitBatch::write_csv(std::ostream& os) const {
  const int d = start.d;
  std::string cols = "index";
  for (int i = 0; i < d; ++i) cols += ",y" + std::to_string(i + 1);
  cols += ",time,jump,steps,censored";
  os << "# columns: " << cols << '\n' << cols << '\n' << std::setprecision(17);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    os << k;
    for (int i = 0; i < d; ++i) os << ',' << s.position[i];
    os << ',' << s.time << ',' << (s.exited_by_jump ? 1 : 0) << ',' << s.steps << ',' << (s.censored ? 1 : 0)
       << '\n';
  }
}

void ExitBatch::write_metadata(std::ostream& os) const {
  os << std::setprecision(17);
  os << "model=" << model << '\n';
  os << "geometry=" << geometry.type() << '\n';
  for (const auto& [k, v] : geometry.spec()) os << "geometry." << k << '=' << v << '\n';
  os << "start=" << format_point(start) << '\n';
  os << "strategy=" << to_string(params.strategy) << '\n';
  os << "c_h=" << params.c_h << '\n';
  os << "eps_cut=" << params.eps_cut << '\n';
  os << "max_steps=" << params.max_steps << '\n';
  os << "seed=" << seed << '\n';
  os << "n=" << samples.size() << '\n';
  os << "censored=" << censored() << '\n';
}

void set_workers(int workers) {
  if (workers > 0) omp_set_num_threads(workers);
}

ExitBatch run_exit_batch(const ExitSampler& sampler, const Point& x, std::uint64_t n, std::uint64_t seed,
                         int workers) {
  ExitBatch batch;
  batch.geometry = sampler.geometry();
  batch.model = sampler.model().sub.phi.kind() + "_d" + std::to_string(sampler.model().d);
  batch.start = x;
  batch.params = sampler.params();
  batch.seed = seed;
  batch.samples.resize(n);
  if (!sampler.geometry().contains(x)) throw DomainError("start point " + format_point(x) + " is outside the domain");
  std::exception_ptr failure;
  const int threads = workers > 0 ? workers : omp_get_max_threads();
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 256) num_threads(threads)
  for (long long i = 0; i < count; ++i) {
    try {
      Rng rng = substream(seed, static_cast<std::uint64_t>(i));
      batch.samples[static_cast<std::size_t>(i)] = sampler.sample(x, rng);
    } catch (...) {
#pragma omp critical(ubhp_batch_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return batch;
}

ExitBatch run_two_stage_batch(const ExitSampler& inner, const ExitSampler& outer, const Point& x, std::uint64_t n,
                              std::uint64_t seed, int workers) {
  ExitBatch batch;
  batch.geometry = outer.geometry();
  batch.model = outer.model().sub.phi.kind() + "_d" + std::to_string(outer.model().d);
  batch.start = x;
  batch.params = outer.params();
  batch.seed = seed;
  batch.samples.resize(n);
  std::exception_ptr failure;
  const int threads = workers > 0 ? workers : omp_get_max_threads();
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 256) num_threads(threads)
  for (long long i = 0; i < count; ++i) {
    try {
      Rng rng = substream(seed, static_cast<std::uint64_t>(i));
      ExitSample s = inner.sample(x, rng);
      if (!s.censored && outer.geometry().contains(s.position)) {
        ExitSample t = outer.sample(s.position, rng);
        t.time += s.time;
        t.steps += s.steps;
        s = t;
      }
      batch.samples[static_cast<std::size_t>(i)] = s;
    } catch (...) {
#pragma omp critical(ubhp_batch_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return batch;
}

ExitTimeEstimate exit_time_stats(const ExitBatch& batch) {
  ExitTimeEstimate e;
  const auto n = static_cast<double>(batch.samples.size());
  if (n == 0) return e;
  // Censored paths contribute their censoring time, a lower bound.
  double sum = 0.0, sum2 = 0.0;
  for (const auto& s : batch.samples) {
    sum += s.time;
    sum2 += s.time * s.time;
  }
  e.estimate = sum / n;
  const double var = n > 1 ? std::max(0.0, (sum2 - n * e.estimate * e.estimate) / (n - 1)) : 0.0;
  e.stderr_ = std::sqrt(var / n);
  e.censored_fraction = static_cast<double>(batch.censored()) / n;
  e.warning = e.censored_fraction > 0.01;
  return e;
}

ExitTimeEstimate expected_exit_time(const ProcessModel& model, const Geometry& geometry, const Point& x,
                                    std::uint64_t n, std::uint64_t seed, const ExitParams& params, int workers) {
  const ExitSampler sampler(model, geometry, params);
  return exit_time_stats(run_exit_batch(sampler, x, n, seed, workers));
}

}  // namespace ubhp
