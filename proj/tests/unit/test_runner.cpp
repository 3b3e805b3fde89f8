#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ubhp/config.hpp"
#include "ubhp/runner.hpp"

using namespace ubhp;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ubhp_unit_" + name);
  fs::remove_all(p);
  return p;
}

/// Summary text without the comment header that carries the timestamp.
std::string summary_body(const fs::path& p) {
  std::istringstream is(slurp(p));
  std::string line, out;
  while (std::getline(is, line))
    if (line.rfind("#", 0) != 0) out += line + "\n";
  return out;
}

}  // namespace

TEST(Runner, TrivialHarnackPasses) {
  const fs::path out = scratch("harnack");
  const RunConfig c = make_config({{"run.experiment", "verify.harnack"},
                                   {"run.n", "2000"},
                                   {"run.out", out.string()},
                                   {"model.d", "2"},
                                   {"experiment.targets", "complement"}});
  const RunResult r = run(c);
  EXPECT_EQ(r.status, Status::Pass) << r.error;
  EXPECT_EQ(r.report.constants.at("harnack_max"), 1.0);
  EXPECT_TRUE(fs::exists(out / "verify_harnack.csv"));
  EXPECT_TRUE(fs::exists(out / "summary.txt"));
  EXPECT_EQ(parse_config(slurp(out / "config.txt")), c);
}

TEST(Runner, InvalidGeometryFailsBeforeSampling) {
  const fs::path out = scratch("invalid");
  const RunConfig c = make_config({{"run.experiment", "sim.exit"},
                                   {"run.out", out.string()},
                                   {"geometry.type", "ball"},
                                   {"geometry.center", "0"},
                                   {"geometry.radius", "-1"}});
  const RunResult r = run(c);
  EXPECT_EQ(r.status, Status::Error);
  EXPECT_EQ(exit_code(r.status), 3);
  EXPECT_NE(r.error.find("radius"), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "error.txt"));
  EXPECT_FALSE(fs::exists(out / "sim_exit.csv"));
  EXPECT_FALSE(fs::exists(out / "exits.csv"));
}

TEST(Runner, RepeatedRunsAreByteIdentical) {
  std::string csv[2], exits[2], summary[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path out = scratch("repeat" + std::to_string(i));
    const RunConfig c = make_config({{"run.experiment", "sim.exit"},
                                     {"run.n", "2000"},
                                     {"run.seed", "5"},
                                     {"run.workers", i == 0 ? "1" : "3"},
                                     {"run.out", out.string()},
                                     {"model.phi", "mixture"},
                                     {"model.terms", "1:1,1:0.6"},
                                     {"model.d", "2"},
                                     {"geometry.type", "ball"},
                                     {"geometry.center", "0,0"},
                                     {"geometry.radius", "1"}});
    ASSERT_NE(run(c).status, Status::Error);
    csv[i] = slurp(out / "sim_exit.csv");
    exits[i] = slurp(out / "exits.csv");
    summary[i] = summary_body(out / "summary.txt");
  }
  EXPECT_EQ(csv[0], csv[1]);
  EXPECT_EQ(exits[0], exits[1]);
  // Summaries differ only in the worker setting.
  EXPECT_NE(summary[0].find("seed=5"), std::string::npos);
  for (const auto& s : csv) EXPECT_EQ(s.rfind("# columns:", 0), 0u);
}

TEST(Runner, PhiEvalAndSummaryConstants) {
  const fs::path out = scratch("phi");
  const RunResult r = run(make_config({{"run.experiment", "phi.eval"}, {"run.out", out.string()}}));
  EXPECT_EQ(r.status, Status::Pass) << r.error;
  const auto constants = read_summary_constants((out / "summary.txt").string());
  EXPECT_EQ(constants, r.report.constants);
  const RunResult same = compare_summaries((out / "summary.txt").string(), (out / "summary.txt").string(), 0.0,
                                           (out / "cmp").string());
  if (!constants.empty()) EXPECT_EQ(same.status, Status::Pass);
}

TEST(Runner, ModelFromConfig) {
  const RunConfig c = make_config({{"run.experiment", "phi.eval"},
                                   {"model.phi", "mixture"},
                                   {"model.terms", "1:0.5,2:1.5"},
                                   {"model.d", "3"},
                                   {"model.gamma", "2"},
                                   {"model.modulation", "constant:1.5"}});
  const ProcessModel m = model_from_config(c);
  EXPECT_EQ(m.d, 3);
  EXPECT_EQ(m.modulation(0.3), 1.5);
  EXPECT_NEAR(m.sub.phi(4.0), std::pow(4.0, 0.25) + 2.0 * std::pow(4.0, 0.75), 1e-12);
  EXPECT_EQ(exit_params_from_config(c, m).strategy, ExitStrategy::Timestep);
}

TEST(Runner, WrongModelForExperimentIsAnError) {
  const fs::path out = scratch("s6");
  const RunResult r = run(make_config({{"run.experiment", "phi.section6"}, {"run.out", out.string()}}));
  EXPECT_EQ(r.status, Status::Error);
}
