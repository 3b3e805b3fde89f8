#pragma once

#include <array>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ubhp/levy.hpp"

namespace ubhp {

/// Point of R^d, d <= kMaxDim, stored inline.
struct Point {
  std::array<double, kMaxDim> v{};
  int d = 1;

  Point() = default;
  explicit Point(int dim) : d(dim) {}
  Point(std::initializer_list<double> xs);

  double& operator[](int i) { return v[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return v[static_cast<std::size_t>(i)]; }
  double norm() const;
  double dot(const Point& o) const;

  Point& operator+=(const Point& o);
  Point& operator-=(const Point& o);
  Point& operator*=(double s);
  friend Point operator+(Point a, const Point& b) { return a += b; }
  friend Point operator-(Point a, const Point& b) { return a -= b; }
  friend Point operator*(double s, Point a) { return a *= s; }
  bool operator==(const Point& o) const;
};

double distance(const Point& a, const Point& b);
Point unit_vector(int d, int axis);
std::string format_point(const Point& p);
Point parse_point(const std::string& s);

/// Open subset of R^d assembled from balls, half-spaces, cones and slabs.
class Geometry {
 public:
  struct Node;

  static Geometry ball(const Point& center, double radius);
  /// B(c, R) intersected with {x : n.(x - c) > offset}.
  static Geometry halfspace_cap_ball(const Point& center, double radius, const Point& normal, double offset = 0.0);
  /// B(c, R) intersected with the open cone at c around axis with the given
  /// half aperture (radians).
  static Geometry cone_cap_ball(const Point& center, double radius, const Point& axis, double aperture);
  /// B(c, R) minus the closed half strip {x_1 - c_1 <= 0, |x_2 - c_2| <= w}.
  static Geometry slit_ball(const Point& center, double radius, double half_width);
  static Geometry annulus(const Point& center, double inner, double outer);
  static Geometry complement_of_ball(const Point& center, double radius);
  /// {lo < x_axis < hi}.
  static Geometry slab(int d, int axis, double lo, double hi);
  /// {n.x > offset}.
  static Geometry halfspace(const Point& normal, double offset);
  static Geometry from_spec(const std::map<std::string, std::string>& spec);

  /// this intersected with B(center, radius).
  Geometry intersect_ball(const Point& center, double radius) const;

  bool contains(const Point& x) const;
  /// Lower bound for dist(x, complement) when x is inside, 0 otherwise.
  double dist_to_complement(const Point& x) const;
  /// Lower bound for dist(x, closure of this set) when x is outside.
  double dist_to_domain(const Point& x) const;
  double bounding_radius() const { return bound_radius_; }
  const Point& bounding_center() const { return bound_center_; }
  const Point& witness() const { return witness_; }
  int dim() const { return d_; }
  const std::string& type() const { return type_; }
  const std::map<std::string, std::string>& spec() const { return spec_; }

 private:
  std::shared_ptr<const Node> root_;
  int d_ = 1;
  Point witness_;
  Point bound_center_;
  double bound_radius_ = std::numeric_limits<double>::infinity();
  std::string type_;
  std::map<std::string, std::string> spec_;
};

}  // namespace ubhp
