#pragma once

#include <map>
#include <string>

#include "ubhp/config.hpp"
#include "ubhp/levy.hpp"
#include "ubhp/report.hpp"
#include "ubhp/sim.hpp"

namespace ubhp {

/// Report of one experiment plus auxiliary CSV files keyed by file name.
struct Outcome {
  ExperimentReport report;
  std::map<std::string, std::string> files;
};

struct RunResult {
  Status status = Status::Error;
  std::string out_dir;
  std::string error;
  ExperimentReport report;
};

ProcessModel model_from_config(const RunConfig& config);
ExitParams exit_params_from_config(const RunConfig& config, const ProcessModel& model);

/// Builds the model and geometry, then runs the named experiment. Throws on
/// invalid input; nothing is sampled before validation succeeds.
Outcome execute(const RunConfig& config);

/// Runs the experiment and writes <group>_<action>.csv, any auxiliary CSVs,
/// config.txt and summary.txt under run.out. Errors become status error with
/// a diagnostic in error.txt.
RunResult run(const RunConfig& config);

/// constant.* entries of a summary file.
std::map<std::string, double> read_summary_constants(const std::string& path);

/// Runs the config with run.seed and with second_seed in sibling
/// directories and compares their constants within thresholds.seed_tolerance.
RunResult run_seed_stability(const RunConfig& config, std::uint64_t second_seed);
/// Compares two existing summary files.
RunResult compare_summaries(const std::string& first, const std::string& second, double tolerance,
                            const std::string& out_dir);

}  // namespace ubhp
