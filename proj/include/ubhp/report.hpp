#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace ubhp {

enum class Status { Pass, Fail, Inconclusive, Error };

const char* to_string(Status s);
/// 0 pass, 1 fail, 2 inconclusive, 3 error.
int exit_code(Status s);

/// Tabular result of one experiment plus its empirical constants.
struct ExperimentReport {
  struct Row {
    std::string tag;
    std::vector<double> values;
  };

  std::string name;
  std::map<std::string, std::string> parameters;
  std::vector<std::string> columns;  // names of Row::values
  std::vector<Row> rows;
  std::map<std::string, double> constants;
  Status status = Status::Pass;
  std::vector<std::string> notes;
  std::uint64_t seed = 0;

  void add_row(std::string tag, std::vector<double> values);
  /// Pass stays pass only if ok; Fail dominates Inconclusive.
  void require(bool ok, const std::string& why);
  void mark_inconclusive(const std::string& why);
  void write_csv(std::ostream& os) const;
  /// key=value lines, no timestamps.
  void write_summary(std::ostream& os) const;
};

}  // namespace ubhp
