#pragma once

#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "ubhp/geometry.hpp"
#include "ubhp/interp.hpp"
#include "ubhp/levy.hpp"

namespace ubhp {

using Rng = std::mt19937_64;

/// Independent stream for sample `index` of a batch seeded with `seed`.
Rng substream(std::uint64_t seed, std::uint64_t index);
/// Mixes a tag into a seed so related batches use disjoint streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

/// S_t with E exp(-lambda S_t) = exp(-t lambda^a), a in (0,1).
double sample_stable_subordinator_increment(double a, double t, Rng& rng);

/// Uniform direction on the unit sphere of R^d.
Point sample_direction(int d, Rng& rng);

/// Draws increments X_{t} - X_0 of a process model. Construction may
/// tabulate Levy measures; sampling is then cheap and thread safe.
class IncrementSampler {
 public:
  enum class Kind { StableExact, MixtureExact, SubordinatedCompoundPoisson, JumpKernelCompoundPoisson };

  IncrementSampler() = default;
  /// eps_cut is the spatial jump truncation. force_kernel selects the
  /// jump-kernel sampler even for unmodulated models.
  IncrementSampler(const ProcessModel& model, double eps_cut, bool force_kernel = false);

  Point sample(double t, Rng& rng) const;
  /// Natural time scale 1 / phi(r^-2).
  double clock(double r) const;
  Kind kind() const { return kind_; }
  int dim() const { return d_; }
  double eps_cut() const { return eps_; }
  /// Total jump rate of the compound Poisson part (0 for exact kinds).
  double jump_rate() const { return rate_; }
  /// Per-coordinate variance rate of the Gaussian part.
  double small_jump_variance() const { return small_var_; }
  /// Deterministic subordinator drift replacing small subordinator jumps.
  double subordinator_drift() const { return drift_; }

 private:
  Kind kind_ = Kind::StableExact;
  int d_ = 1;
  double eps_ = 0.0;
  double alpha_ = 1.0;
  std::vector<MixtureTerm> terms_;
  PhiModel clock_phi_;
  double rate_ = 0.0, small_var_ = 0.0, drift_ = 0.0;
  LogLogInterpolant inverse_tail_;  // tail mass -> jump size

  double sample_subordinator(double t, Rng& rng) const;
};

/// One increment of the subordinate Brownian motion W_{S_t}.
Point sample_sbm_increment(const ProcessModel& model, double t, double eps_cut, Rng& rng);
/// One increment of the process with kernel j m, small jumps replaced by a
/// variance-matched Gaussian.
Point sample_jump_process_increment(const ProcessModel& model, double t, double eps_cut, Rng& rng);

struct ExitSample {
  Point position;
  double time = 0.0;
  bool exited_by_jump = true;
  std::uint64_t steps = 0;
  bool censored = false;
};

/// Exact exit position of the isotropic alpha-stable process from
/// B(center, radius) started at x. Time is left at zero.
ExitSample sample_ball_exit_stable(double alpha, int d, const Point& center, double radius, const Point& x,
                                   Rng& rng);

/// E_x tau_{B(0, radius)} for the isotropic alpha-stable process.
double stable_ball_exit_time(double alpha, int d, double radius, double x_norm);

enum class ExitStrategy { WosStable, Timestep };
ExitStrategy parse_exit_strategy(const std::string& s);
const char* to_string(ExitStrategy s);

struct ExitParams {
  ExitStrategy strategy = ExitStrategy::Timestep;
  double c_h = 0.01;
  double eps_cut = 0.0;  // 0: 1e-3 times the geometry scale
  std::uint64_t max_steps = 1000000;
};

/// Samples first exits of one model from one geometry.
class ExitSampler {
 public:
  ExitSampler(const ProcessModel& model, const Geometry& geometry, const ExitParams& params);

  ExitSample sample(const Point& x, Rng& rng) const;
  const ProcessModel& model() const { return model_; }
  const Geometry& geometry() const { return geometry_; }
  const ExitParams& params() const { return params_; }
  const IncrementSampler& increments() const { return increments_; }

 private:
  ProcessModel model_;
  Geometry geometry_;
  ExitParams params_;
  IncrementSampler increments_;
  double alpha_ = 1.0;
  double scale_ = 1.0;
};

ExitSample sample_exit(const ProcessModel& model, const Geometry& geometry, const Point& x, const ExitParams& params,
                       Rng& rng);

struct ExitBatch {
  Geometry geometry;
  Point start;
  std::string model;
  ExitParams params;
  std::uint64_t seed = 0;
  std::vector<ExitSample> samples;

  std::size_t censored() const;
  double jump_fraction() const;
  void write_csv(std::ostream& os) const;
  void write_metadata(std::ostream& os) const;
};

/// n samples from x; sample i uses substream(seed, i) so the batch does not
/// depend on the number of workers (0 means the OpenMP default).
ExitBatch run_exit_batch(const ExitSampler& sampler, const Point& x, std::uint64_t n, std::uint64_t seed,
                         int workers = 0);

/// Exits of `outer` reached by first leaving `inner` and, when the inner
/// exit lands inside the outer domain, continuing from there. Times add.
ExitBatch run_two_stage_batch(const ExitSampler& inner, const ExitSampler& outer, const Point& x, std::uint64_t n,
                              std::uint64_t seed, int workers = 0);

struct ExitTimeEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
  double censored_fraction = 0.0;
  bool warning = false;
};

ExitTimeEstimate expected_exit_time(const ProcessModel& model, const Geometry& geometry, const Point& x,
                                    std::uint64_t n, std::uint64_t seed, const ExitParams& params = {},
                                    int workers = 0);
ExitTimeEstimate exit_time_stats(const ExitBatch& batch);

/// Sets the OpenMP worker count for subsequent parallel regions (0 keeps
/// the default).
void set_workers(int workers);

}  // namespace ubhp
