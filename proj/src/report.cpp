#include "ubhp/report.hpp"

#include <iomanip>

namespace ubhp {

const char* to_string(Status s) {
  switch (s) {
    case Status::Pass: return "pass";
    case Status::Fail: return "fail";
    case Status::Inconclusive: return "inconclusive";
    case Status::Error: return "error";
  }
  return "error";
}

int exit_code(Status s) {
  switch (s) {
    case Status::Pass: return 0;
    case Status::Fail: return 1;
    case Status::Inconclusive: return 2;
    case Status::Error: return 3;
  }
  return 3;
}

void ExperimentReport::add_row(std::string tag, std::vector<double> values) {
  rows.push_back({std::move(tag), std::move(values)});
}

void ExperimentReport::require(bool ok, const std::string& why) {
  if (ok) return;
  notes.push_back("fail: " + why);
  if (status != Status::Error) status = Status::Fail;
}

void ExperimentReport::mark_inconclusive(const std::string& why) {
  notes.push_back("inconclusive: " + why);
  if (status == Status::Pass) status = Status::Inconclusive;
}

void ExperimentReport::write_csv(std::ostream& os) const {
  os << "# columns: tag";
  for (const auto& c : columns) os << ',' << c;
  os << "\ntag";
  for (const auto& c : columns) os << ',' << c;
  os << '\n' << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.tag;
    for (double v : r.values) os << ',' << v;
    os << '\n';
  }
}

void ExperimentReport::write_summary(std::ostream& os) const {
  os << std::setprecision(17);
  os << "experiment=" << name << '\n';
  os << "status=" << to_string(status) << '\n';
  os << "seed=" << seed << '\n';
  for (const auto& [k, v] : parameters) os << "param." << k << '=' << v << '\n';
  for (const auto& [k, v] : constants) os << "constant." << k << '=' << v << '\n';
  for (std::size_t i = 0; i < notes.size(); ++i) os << "note." << i << '=' << notes[i] << '\n';
}

}  // namespace ubhp
