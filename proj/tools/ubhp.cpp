// Command-line front end: ubhp <group> <action> [--config PATH] [--seed N]
// [--workers N] [--out DIR] [--set section.key=value ...].

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ubhp/config.hpp"
#include "ubhp/errors.hpp"
#include "ubhp/runner.hpp"

namespace {

constexpr const char* kOutEnv = "UBHP_OUT";

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> workers;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Override run.seed");
  cmd->add_option("--workers", f.workers, "Cap on worker threads (0: all cores)");
  cmd->add_option("--out", f.out, "Output directory (overrides " + std::string(kOutEnv) + ")");
  cmd->add_option("--set", f.sets, "Override a config value, section.key=value");
}

std::string read_text(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ubhp::Error("cannot read " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

ubhp::RunConfig load(const CommonFlags& f, const std::string& experiment) {
  std::map<std::string, std::string> overrides;
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ubhp::DomainError("--set expects section.key=value, got '" + s + "'");
    overrides[s.substr(0, eq)] = s.substr(eq + 1);
  }
  if (!experiment.empty()) overrides["run.experiment"] = experiment;
  if (f.seed) overrides["run.seed"] = std::to_string(*f.seed);
  if (f.workers) overrides["run.workers"] = std::to_string(*f.workers);
  if (const char* env = std::getenv(kOutEnv); env && *env) overrides["run.out"] = env;
  if (!f.out.empty()) overrides["run.out"] = f.out;
  const std::string text = f.config.empty() ? "" : read_text(f.config);
  return ubhp::parse_config(text, overrides);
}

int report_status(const ubhp::RunResult& r) {
  std::cout << r.report.name << ": " << ubhp::to_string(r.status);
  if (!r.out_dir.empty()) std::cout << " (" << r.out_dir << ")";
  std::cout << '\n';
  if (!r.error.empty()) std::cerr << "error: " << r.error << '\n';
  for (const auto& note : r.report.notes) std::cout << "  " << note << '\n';
  return ubhp::exit_code(r.status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boundary Harnack experiments for subordinate Brownian motions"};
  app.require_subcommand(1);

  const std::map<std::string, std::vector<std::string>> groups{
      {"phi", {"eval", "cert", "section6"}},
      {"levy", {"j", "mu", "asymp"}},
      {"ladder", {"kappa", "renewal", "interval"}},
      {"sim", {"exit", "exit-time"}},
      {"verify", {"kernel", "harnack", "factorization", "bhp", "exit-time"}}};

  CommonFlags flags;
  std::string experiment;
  for (const auto& [group, actions] : groups) {
    CLI::App* g = app.add_subcommand(group, group + " operations");
    g->require_subcommand(1);
    for (const auto& action : actions) {
      CLI::App* a = g->add_subcommand(action);
      add_common(a, flags);
      std::string name = group + "." + action;
      for (char& ch : name)
        if (ch == '-') ch = '_';
      a->callback([&experiment, name] { experiment = name; });
    }
  }

  CLI::App* report = app.add_subcommand("report", "Meta-checks over finished runs");
  report->require_subcommand(1);
  CLI::App* stability = report->add_subcommand("seed-stability", "Compare constants of two seeds");
  add_common(stability, flags);
  std::optional<std::uint64_t> second_seed;
  std::vector<std::string> summaries;
  double tolerance = 0.25;
  stability->add_option("--second-seed", second_seed, "Seed of the second run (default: seed + 1)");
  stability->add_option("--summaries", summaries, "Compare two existing summary files instead")->expected(2);
  stability->add_option("--tolerance", tolerance, "Relative tolerance for --summaries");
  bool stability_run = false;
  stability->callback([&stability_run] { stability_run = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  try {
    if (stability_run) {
      if (!summaries.empty()) {
        std::string out = flags.out;
        if (out.empty()) {
          const char* env = std::getenv(kOutEnv);
          out = env && *env ? env : "out";
        }
        return report_status(ubhp::compare_summaries(summaries[0], summaries[1], tolerance, out));
      }
      const ubhp::RunConfig config = load(flags, "");
      const std::uint64_t seed2 = second_seed ? *second_seed : config.count("run.seed") + 1;
      return report_status(ubhp::run_seed_stability(config, seed2));
    }
    return report_status(ubhp::run(load(flags, experiment)));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
