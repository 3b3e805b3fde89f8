#pragma once

#include <memory>
#include <vector>

namespace ubhp {

/// Monotone cubic interpolation of a positive function in (log x, log y),
/// continued outside the table by the power laws of the end segments.
class LogLogInterpolant {
 public:
  LogLogInterpolant() = default;
  LogLogInterpolant(const std::vector<double>& x, const std::vector<double>& y);

  double operator()(double x) const;
  bool empty() const { return !impl_; }
  bool in_hull(double x) const;
  double lo() const;
  double hi() const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

}  // namespace ubhp
