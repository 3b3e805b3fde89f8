#pragma once

#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace ubhp {

/// Grid of (argument, ratio) pairs used as evidence for two-sided
/// comparability claims.
struct RatioProfile {
  std::string label;
  std::vector<double> argument;
  std::vector<double> argument2;  // empty unless the grid is two-dimensional
  std::vector<double> ratio;
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();

  void push(double arg, double value);
  void push(double arg, double arg2, double value);
  std::size_t size() const { return ratio.size(); }
  /// max / min; infinite when the profile is empty or min is zero.
  double spread() const;
  double median() const;
  /// True when every ratio is finite and strictly positive.
  bool well_formed() const;
  void write_csv(std::ostream& os) const;
};

}  // namespace ubhp
