#include "ubhp/ratio_profile.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

namespace ubhp {

void RatioProfile::push(double arg, double value) {
  argument.push_back(arg);
  ratio.push_back(value);
  min = std::min(min, value);
  max = std::max(max, value);
}

void RatioProfile::push(double arg, double arg2, double value) {
  argument2.push_back(arg2);
  push(arg, value);
}

double RatioProfile::spread() const {
  if (ratio.empty() || !(min > 0.0)) return std::numeric_limits<double>::infinity();
  return max / min;
}

double RatioProfile::median() const {
  if (ratio.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> v = ratio;
  auto mid = v.begin() + static_cast<long>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

bool RatioProfile::well_formed() const {
  return std::all_of(ratio.begin(), ratio.end(), [](double r) { return std::isfinite(r) && r > 0.0; });
}

void RatioProfile::write_csv(std::ostream& os) const {
  const bool two = argument2.size() == ratio.size() && !ratio.empty();
  os << "# columns: label,argument" << (two ? ",argument2" : "") << ",ratio\n";
  os << "label,argument" << (two ? ",argument2" : "") << ",ratio\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < ratio.size(); ++i) {
    os << label << ',' << argument[i];
    if (two) os << ',' << argument2[i];
    os << ',' << ratio[i] << '\n';
  }
}

}  // namespace ubhp
