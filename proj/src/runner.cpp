#include "ubhp/runner.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>

#include "ubhp/bernstein.hpp"
#include "ubhp/errors.hpp"
#include "ubhp/ladder.hpp"
#include "ubhp/model_io.hpp"
#include "ubhp/potential.hpp"

namespace ubhp {

namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) { return format_number(v); }

Thresholds thresholds_from(const RunConfig& c) {
  Thresholds t;
  t.stability = c.number("thresholds.stability");
  t.harnack_max = c.number("thresholds.harnack_max");
  t.seed_tolerance = c.number("thresholds.seed_tolerance");
  t.max_rel_stderr = c.number("thresholds.max_rel_stderr");
  t.max_excluded = c.number("thresholds.max_excluded");
  return t;
}

std::optional<Geometry> geometry_from(const RunConfig& c) {
  const auto spec = c.section("geometry");
  if (spec.empty()) return std::nullopt;
  return Geometry::from_spec(spec);
}

Point point_or_origin(const RunConfig& c, const std::string& key, int d) {
  if (!c.has(key)) return Point(d);
  const Point p = c.point(key);
  if (p.d != d) throw DomainError(key + " has dimension " + std::to_string(p.d) + ", model has " + std::to_string(d));
  return p;
}

int workers_of(const RunConfig& c) { return static_cast<int>(c.count("run.workers")); }

std::vector<double> list_or(const RunConfig& c, const std::string& key, std::vector<double> fallback) {
  return c.has(key) ? c.numbers(key) : std::move(fallback);
}

/// Nonincreasing within a relative tolerance.
bool nonincreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1] * (1.0 + 1e-9)) return false;
  return true;
}

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

template <class Writer>
std::string to_text(const Writer& w) {
  std::ostringstream os;
  w.write_csv(os);
  return os.str();
}

void require_profile(ExperimentReport& rep, const RatioProfile& p, double max_spread, const std::string& what) {
  rep.constants[what + "_min"] = p.min;
  rep.constants[what + "_max"] = p.max;
  rep.constants[what + "_spread"] = p.spread();
  rep.require(p.well_formed(), what + " profile has non-positive or non-finite ratios");
  rep.require(p.spread() <= max_spread, what + " spread " + fmt(p.spread()) + " exceeds " + fmt(max_spread));
}

Outcome phi_eval(const RunConfig& c, const ProcessModel& m) {
  Outcome o;
  auto& rep = o.report;
  rep.columns = {"lambda", "phi"};
  std::vector<double> values;
  for (double l : c.numbers("grid.lambda")) {
    const double v = m.sub.phi(l);
    values.push_back(v);
    rep.add_row("phi", {l, v});
    rep.require(positive_finite(v), "phi(" + fmt(l) + ") is not positive and finite");
  }
  for (std::size_t i = 1; i < values.size(); ++i)
    rep.require(values[i] >= values[i - 1], "phi is not nondecreasing on the grid");
  const RatioProfile b = global_bernstein_check(m.sub.phi, c.numbers("grid.t"), c.numbers("grid.l"));
  rep.constants["bernstein_ratio_max"] = b.max;
  rep.require(b.max <= 1.0 + 1e-9, "phi(t l) exceeds l phi(t)");
  o.files["bernstein.csv"] = to_text(b);
  return o;
}

ScalingGrid scaling_grid(const RunConfig& c) {
  ScalingGrid g;
  g.lambda_max = c.number("experiment.lambda_max");
  g.r_max = c.number("experiment.r_max");
  g.per_decade = static_cast<int>(c.count("experiment.per_decade"));
  return g;
}

void put_certificate(Outcome& o, const ScalingCertificate& cert) {
  o.report.constants["delta1"] = cert.delta1;
  o.report.constants["delta2"] = cert.delta2;
  o.report.constants["a1"] = cert.a1;
  o.report.constants["a2"] = cert.a2;
  o.files["certificate.csv"] = to_text(cert);
}

Outcome phi_cert(const RunConfig& c, const ProcessModel& m) {
  Outcome o;
  auto& rep = o.report;
  rep.columns = {"delta1", "delta2", "a1", "a2"};
  const ScalingCertificate cert = scaling_certificate(m.sub.phi, c.number("experiment.R0"), scaling_grid(c));
  rep.add_row("certificate", {cert.delta1, cert.delta2, cert.a1, cert.a2});
  put_certificate(o, cert);
  rep.require(cert.pass, "scaling indices are not certified");
  return o;
}

Outcome phi_section6(const RunConfig& c, const ProcessModel& m) {
  const auto* six = std::get_if<SectionSix>(&m.sub.phi.variant());
  if (!six) throw ModelError("phi.section6 needs model.phi = section6");
  Outcome o;
  auto& rep = o.report;
  rep.columns = {"lambda", "g", "phi", "f", "phi_over_f"};
  auto row = [&](const std::string& tag, double l) {
    const double g = stieltjes_g(six->schedule, l);
    const double p = m.sub.phi(l);
    const double f = six->schedule(l);
    rep.add_row(tag, {l, g, p, f, p / f});
    return g;
  };
  for (double l : c.numbers("grid.lambda")) row("grid", l);
  // g between c1 lambda^{-2/3} and c2 lambda^{-1/2} on [2, 1e6].
  double c1 = kInf, c2 = 0.0;
  for (double l : log_grid(2.0, 1e6, 10)) {
    const double g = row("bound", l);
    c1 = std::min(c1, g * std::pow(l, 2.0 / 3.0));
    c2 = std::max(c2, g * std::sqrt(l));
  }
  rep.constants["c1"] = c1;
  rep.constants["c2"] = c2;
  rep.require(positive_finite(c1) && positive_finite(c2), "g bound constants are not finite");
  const ScalingCertificate cert = scaling_certificate(m.sub.phi, c.number("experiment.R0"), scaling_grid(c));
  put_certificate(o, cert);
  rep.require(std::abs(cert.delta1 - 1.0 / 3.0) <= 0.05, "delta1 " + fmt(cert.delta1) + " is outside 1/3 +- 0.05");
  rep.require(std::abs(cert.delta2 - 0.5) <= 0.05, "delta2 " + fmt(cert.delta2) + " is outside 1/2 +- 0.05");
  return o;
}

Outcome levy_j(const RunConfig& c, const ProcessModel& m) {
  Outcome o;
  auto& rep = o.report;
  rep.columns = {"r", "j", "jx"};
  std::vector<double> js;
  for (double r : c.numbers("grid.r")) {
    const double j = j_density(m, r);
    js.push_back(j);
    rep.add_row("j", {r, j, j * m.modulation(r)});
    rep.require(positive_finite(j), "j(" + fmt(r) + ") is not positive and finite");
  }
  rep.require(nonincreasing(js), "j is not nonincreasing on the grid");
  return o;
}

Outcome levy_mu(const RunConfig& c, const ProcessModel& m) {
  Outcome o;
  auto& rep = o.report;
  rep.columns = {"t", "mu", "tail"};
  std::vector<double> tails;
  for (double t : c.numbers("grid.t")) {
    const double mu = mu_density(m.sub, t);
    const double tail = mu_tail(m.sub, t);
    tails.push_back(tail);
    rep.add_row("mu", {t, mu, tail});
    rep.require(positive_finite(mu) && positive_finite(tail), "mu at " + fmt(t) + " is not positive and finite");
  }
  rep.require(nonincreasing(tails), "the tail of mu is not nonincreasing");
  return o;
}

Outcome levy_asymp(const RunConfig& c, const ProcessModel& m) {
  Outcome o;
  auto& rep = o.report;
  const AsymptoticKind kind = parse_asymptotic_kind(c.text("experiment.kind"));
  const bool time_grid = kind == AsymptoticKind::Mu || kind == AsymptoticKind::Tail;
  const RatioProfile p = asymp_ratio_profile(m, kind, c.numbers(time_grid ? "grid.t" : "grid.r"));
  rep.columns = {"argument", "ratio"};
  for (std::size_t i = 0; i < p.size(); ++i) rep.add_row(to_string(kind), {p.argument[i], p.ratio[i]});
  require_profile(rep, p, c.number("experiment.max_spread"), to_string(kind));
  return o;
}

LadderExponent ladder_of(const ProcessModel& m) {
  return m.modulated() ? LadderExponent::from_process(m) : LadderExponent::from_phi(m.sub.phi);
}

Outcome ladder_kappa(const RunConfig& c, const ProcessModel& m) {
  Outcome o;
  auto& rep = o.report;
  const LadderExponent ladder = ladder_of(m);
  const RatioProfile p = kappa_comparability_check(ladder, m.sub.phi, c.numbers("grid.lambda"));
  rep.columns = {"lambda", "kappa", "kappa_over_sqrt_phi"};
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double l = p.argument[i];
    rep.add_row("kappa", {l, p.ratio[i] * std::sqrt(m.sub.phi(l * l)), p.ratio[i]});
  }
  require_profile(rep, p, c.number("experiment.max_spread"), "kappa");
  return o;
}

Outcome ladder_renewal(const RunConfig& c, const ProcessModel& m) {
  Outcome o;
  auto& rep = o.report;
  const LadderExponent ladder = ladder_of(m);
  const InversionMethod method = parse_inversion_method(c.text("experiment.method"));
  const int order = static_cast<int>(c.count("experiment.order"));
  RatioProfile p;
  p.label = "V*sqrt(phi(r^-2))";
  rep.columns = {"r", "V", "V_sqrt_phi"};
  for (double r : c.numbers("grid.r")) {
    const double v = renewal_V(ladder, r, method, order);
    const double ratio = v * std::sqrt(m.sub.phi(1.0 / (r * r)));
    p.push(r, ratio);
    rep.add_row("renewal", {r, v, ratio});
  }
  require_profile(rep, p, c.number("experiment.max_spread"), "renewal");
  return o;
}

Outcome ladder_interval(const RunConfig& c, const ProcessModel& m) {
  const double r = c.number("experiment.radius");
  if (!(r > 0.0)) throw DomainError("experiment.radius must be positive");
  IntervalCheckParams p;
  p.n = c.count("run.n");
  p.seed = c.count("run.seed");
  p.workers = workers_of(c);
  std::vector<double> xs = list_or(c, "grid.x", {0.1 * r, 0.25 * r, 0.5 * r, 0.75 * r, 0.9 * r});
  Outcome o;
  o.report = interval_exit_bound_check(m, r, xs, p);
  return o;
}

Geometry need_geometry(const std::optional<Geometry>& g) {
  if (!g) throw DomainError("this experiment needs a [geometry] section");
  return *g;
}

Point start_of(const RunConfig& c, const ProcessModel& m, const Geometry& g) {
  if (g.dim() != m.d) throw DomainError("geometry dimension differs from model.d");
  const Point x = c.has("start.x") ? point_or_origin(c, "start.x", m.d) : g.witness();
  if (!g.contains(x)) throw DomainError("start point " + format_point(x) + " is not inside the geometry");
  return x;
}

Outcome sim_exit(const RunConfig& c, const ProcessModel& m, const Geometry& g) {
  const Point x = start_of(c, m, g);
  const ExitSampler sampler(m, g, exit_params_from_config(c, m));
  const ExitBatch batch = run_exit_batch(sampler, x, c.count("run.n"), c.count("run.seed"), workers_of(c));
  Outcome o;
  auto& rep = o.report;
  rep.columns = {"n", "censored", "jump_fraction"};
  rep.add_row("batch", {static_cast<double>(batch.samples.size()), static_cast<double>(batch.censored()),
                        batch.jump_fraction()});
  rep.constants["jump_fraction"] = batch.jump_fraction();
  rep.constants["censored_fraction"] = static_cast<double>(batch.censored()) / std::max<double>(1.0, batch.samples.size());
  if (rep.constants["censored_fraction"] > 0.01) rep.mark_inconclusive("more than 1% of paths hit the step budget");
  o.files["exits.csv"] = to_text(batch);
  return o;
}

Outcome sim_exit_time(const RunConfig& c, const ProcessModel& m, const Geometry& g) {
  const Point x = start_of(c, m, g);
  const ExitTimeEstimate e =
      expected_exit_time(m, g, x, c.count("run.n"), c.count("run.seed"), exit_params_from_config(c, m), workers_of(c));
  Outcome o;
  auto& rep = o.report;
  rep.columns = {"estimate", "stderr", "censored_fraction", "closed_form"};
  double exact = std::nan("");
  const auto* stable = std::get_if<StablePower>(&m.sub.phi.variant());
  if (stable && !m.modulated() && g.type() == "ball") {
    const Point center = parse_point(g.spec().at("center"));
    exact = stable_ball_exit_time(stable->alpha, m.d, std::stod(g.spec().at("radius")), distance(x, center));
    rep.constants["closed_form"] = exact;
    rep.require(std::abs(e.estimate - exact) <= 3.0 * e.stderr_,
                "estimate " + fmt(e.estimate) + " is more than 3 sigma from " + fmt(exact));
  }
  rep.add_row("exit_time", {e.estimate, e.stderr_, e.censored_fraction, exact});
  rep.constants["estimate"] = e.estimate;
  rep.constants["stderr"] = e.stderr_;
  rep.constants["censored_fraction"] = e.censored_fraction;
  if (e.warning) rep.mark_inconclusive("more than 1% of paths hit the step budget");
  return o;
}

template <class P>
void fill_common(P& p, const RunConfig& c) {
  p.n = c.count("run.n");
  p.seed = c.count("run.seed");
  p.workers = workers_of(c);
  p.thresholds = thresholds_from(c);
}

Outcome verify_kernel(const RunConfig& c, const ProcessModel& m) {
  KernelBoundsParams p;
  fill_common(p, c);
  p.r_grid = list_or(c, "grid.radii", p.r_grid);
  p.offsets = list_or(c, "grid.offsets", p.offsets);
  p.a = c.number("experiment.a");
  if (c.has("experiment.n_radial")) p.n_radial = static_cast<int>(c.count("experiment.n_radial"));
  if (c.has("experiment.n_angle")) p.n_angle = static_cast<int>(c.count("experiment.n_angle"));
  Outcome o;
  o.report = kernel_bounds_experiment(m, point_or_origin(c, "experiment.x0", m.d), p);
  return o;
}

Outcome verify_exit_time(const RunConfig& c, const ProcessModel& m) {
  ExitTimeProfileParams p;
  fill_common(p, c);
  p.r_grid = list_or(c, "grid.radii", p.r_grid);
  p.offsets = list_or(c, "grid.offsets", p.offsets);
  p.a = c.number("experiment.a");
  Outcome o;
  o.report = exit_time_profile_check(m, point_or_origin(c, "experiment.x0", m.d), p);
  return o;
}

Outcome verify_harnack(const RunConfig& c, const ProcessModel& m) {
  HarnackParams p;
  fill_common(p, c);
  p.radii = list_or(c, "grid.radii", p.radii);
  p.grid = list_or(c, "grid.harnack", p.grid);
  p.a = c.number("experiment.a");
  for (const auto& t : c.texts("experiment.targets")) p.targets.push_back(TargetSpec::parse(t));
  Outcome o;
  o.report = harnack_experiment(m, point_or_origin(c, "experiment.x0", m.d), p);
  return o;
}

std::vector<NamedGeometry> open_sets(const RunConfig& c, const ProcessModel& m, const std::optional<Geometry>& g,
                                     const Point& z0) {
  if (g) {
    if (g->dim() != m.d) throw DomainError("geometry dimension differs from model.d");
    return {NamedGeometry{"config", *g}};
  }
  const auto all = standard_open_sets(m.d, z0, c.number("experiment.set_radius"), c.number("experiment.aperture"),
                                      c.number("experiment.slit_half_width"));
  return select_open_sets(all, c.texts("experiment.sets"));
}

Outcome verify_factorization(const RunConfig& c, const ProcessModel& m, const std::optional<Geometry>& g) {
  FactorizationParams p;
  fill_common(p, c);
  p.x_grid = list_or(c, "grid.x", p.x_grid);
  const Point z0 = point_or_origin(c, "experiment.z0", m.d);
  Outcome o;
  o.report = factorization_family(m, open_sets(c, m, g, z0), z0, c.number("experiment.radius"), p);
  return o;
}

Outcome verify_bhp(const RunConfig& c, const ProcessModel& m, const std::optional<Geometry>& g) {
  BhpParams p;
  fill_common(p, c);
  p.a1 = TargetSpec::parse(c.text("experiment.a1"));
  p.a2 = TargetSpec::parse(c.text("experiment.a2"));
  if (c.has("experiment.n_radial")) p.n_radial = static_cast<int>(c.count("experiment.n_radial"));
  if (c.has("experiment.n_angle")) p.n_angle = static_cast<int>(c.count("experiment.n_angle"));
  const Point z0 = point_or_origin(c, "experiment.z0", m.d);
  Outcome o;
  o.report = bhp_family(m, open_sets(c, m, g, z0), z0, list_or(c, "grid.radii", {0.1, 0.25, 0.5}), p);
  return o;
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string file_stem(const std::string& experiment) {
  std::string s = experiment;
  for (char& ch : s)
    if (ch == '.') ch = '_';
  return s;
}

void write_file(const fs::path& path, const std::string& body) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os << body;
}

void write_summary(const fs::path& dir, const ExperimentReport& rep, const std::string& error) {
  std::ostringstream os;
  os << "# ubhp run summary\n# written " << timestamp() << '\n';
  rep.write_summary(os);
  if (!error.empty()) os << "error=" << error << '\n';
  write_file(dir / "summary.txt", os.str());
}

RunResult finish_run(const fs::path& dir, Outcome o, const std::string& stem) {
  RunResult res;
  res.out_dir = dir.string();
  write_file(dir / (stem + ".csv"), to_text(o.report));
  for (const auto& [name, body] : o.files) write_file(dir / name, body);
  write_summary(dir, o.report, "");
  fs::remove(dir / "error.txt");
  res.status = o.report.status;
  res.report = std::move(o.report);
  return res;
}

RunResult fail_run(const fs::path& dir, ExperimentReport rep, const std::string& what) {
  RunResult res;
  res.out_dir = dir.string();
  res.error = what;
  res.status = Status::Error;
  rep.status = Status::Error;
  rep.notes.push_back(what);
  try {
    fs::create_directories(dir);
    write_file(dir / "error.txt", what + '\n');
    write_summary(dir, rep, what);
  } catch (const std::exception&) {
    // The diagnostic is still returned to the caller.
  }
  res.report = std::move(rep);
  return res;
}

}  // namespace

ProcessModel model_from_config(const RunConfig& c) {
  KeyValues kv = c.section("model");
  return process_from_kv(kv);
}

ExitParams exit_params_from_config(const RunConfig& c, const ProcessModel& m) {
  ExitParams p = default_exit_params(m);
  if (c.has("experiment.strategy")) p.strategy = parse_exit_strategy(c.text("experiment.strategy"));
  p.c_h = c.number("experiment.c_h");
  p.eps_cut = c.number("experiment.eps_cut");
  p.max_steps = c.count("experiment.max_steps");
  if (!(p.c_h > 0.0)) throw DomainError("experiment.c_h must be positive");
  if (p.eps_cut < 0.0) throw DomainError("experiment.eps_cut must be nonnegative");
  return p;
}

Outcome execute(const RunConfig& c) {
  const std::string& e = c.experiment();
  // Validate everything before any work is done.
  const ProcessModel m = model_from_config(c);
  const std::optional<Geometry> g = geometry_from(c);
  set_workers(workers_of(c));

  Outcome o;
  if (e == "phi.eval") o = phi_eval(c, m);
  else if (e == "phi.cert") o = phi_cert(c, m);
  else if (e == "phi.section6") o = phi_section6(c, m);
  else if (e == "levy.j") o = levy_j(c, m);
  else if (e == "levy.mu") o = levy_mu(c, m);
  else if (e == "levy.asymp") o = levy_asymp(c, m);
  else if (e == "ladder.kappa") o = ladder_kappa(c, m);
  else if (e == "ladder.renewal") o = ladder_renewal(c, m);
  else if (e == "ladder.interval") o = ladder_interval(c, m);
  else if (e == "sim.exit") o = sim_exit(c, m, need_geometry(g));
  else if (e == "sim.exit_time") o = sim_exit_time(c, m, need_geometry(g));
  else if (e == "verify.kernel") o = verify_kernel(c, m);
  else if (e == "verify.exit_time") o = verify_exit_time(c, m);
  else if (e == "verify.harnack") o = verify_harnack(c, m);
  else if (e == "verify.factorization") o = verify_factorization(c, m, g);
  else if (e == "verify.bhp") o = verify_bhp(c, m, g);
  else throw DomainError("unknown experiment '" + e + "'");

  o.report.name = e;
  o.report.seed = c.count("run.seed");
  o.report.parameters["model"] = m.sub.phi.kind();
  o.report.parameters["d"] = std::to_string(m.d);
  o.report.parameters["modulation"] = format_modulation(m.modulation);
  o.report.parameters["n"] = c.text("run.n");
  if (g) o.report.parameters["geometry"] = g->type();
  return o;
}

RunResult run(const RunConfig& c) {
  const fs::path dir = c.text("run.out");
  ExperimentReport stub;
  stub.name = c.experiment();
  stub.seed = c.count("run.seed");
  try {
    fs::create_directories(dir);
    write_file(dir / "config.txt", emit_config(c));
    return finish_run(dir, execute(c), file_stem(c.experiment()));
  } catch (const std::exception& ex) {
    return fail_run(dir, stub, ex.what());
  }
}

std::map<std::string, double> read_summary_constants(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path);
  std::map<std::string, double> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind("constant.", 0) != 0) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string value = line.substr(eq + 1);
    double v = 0.0;
    if (value == "inf") v = kInf;
    else if (value == "-inf") v = -kInf;
    else if (value == "nan") v = std::nan("");
    else v = parse_number(value);
    out[line.substr(9, eq - 9)] = v;
  }
  return out;
}

RunResult compare_summaries(const std::string& first, const std::string& second, double tolerance,
                            const std::string& out_dir) {
  const fs::path dir = out_dir;
  ExperimentReport stub;
  stub.name = "report.seed_stability";
  try {
    fs::create_directories(dir);
    Outcome o;
    o.report = seed_stability(read_summary_constants(first), read_summary_constants(second), tolerance);
    o.report.name = "report.seed_stability";
    o.report.parameters["first"] = first;
    o.report.parameters["second"] = second;
    return finish_run(dir, std::move(o), "seed_stability");
  } catch (const std::exception& ex) {
    return fail_run(dir, stub, ex.what());
  }
}

RunResult run_seed_stability(const RunConfig& config, std::uint64_t second_seed) {
  const fs::path dir = config.text("run.out");
  const std::uint64_t first_seed = config.count("run.seed");
  RunResult results[2];
  const std::uint64_t seeds[2] = {first_seed, second_seed};
  for (int i = 0; i < 2; ++i) {
    RunConfig c = config;
    c.set("run.seed", std::to_string(seeds[i]), "override");
    c.set("run.out", (dir / ("seed_" + std::to_string(seeds[i]))).string(), "override");
    results[i] = run(c);
    if (results[i].status == Status::Error) {
      ExperimentReport stub;
      stub.name = "report.seed_stability";
      return fail_run(dir, stub, "run with seed " + std::to_string(seeds[i]) + " failed: " + results[i].error);
    }
  }
  return compare_summaries((fs::path(results[0].out_dir) / "summary.txt").string(),
                           (fs::path(results[1].out_dir) / "summary.txt").string(),
                           config.number("thresholds.seed_tolerance"), dir.string());
}

}  // namespace ubhp
