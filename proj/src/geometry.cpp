#include "ubhp/geometry.hpp"

#include <algorithm>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace ubhp {

// --- Point -------------------------------------------------------------------

Point::Point(std::initializer_list<double> xs) : d(static_cast<int>(xs.size())) {
  if (xs.size() < 1 || xs.size() > kMaxDim) throw DomainError("point dimension out of range");
  std::copy(xs.begin(), xs.end(), v.begin());
}

double Point::norm() const { return std::sqrt(dot(*this)); }

double Point::dot(const Point& o) const {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += v[static_cast<std::size_t>(i)] * o.v[static_cast<std::size_t>(i)];
  return s;
}

Point& Point::operator+=(const Point& o) {
  for (int i = 0; i < d; ++i) v[static_cast<std::size_t>(i)] += o.v[static_cast<std::size_t>(i)];
  return *this;
}

Point& Point::operator-=(const Point& o) {
  for (int i = 0; i < d; ++i) v[static_cast<std::size_t>(i)] -= o.v[static_cast<std::size_t>(i)];
  return *this;
}

Point& Point::operator*=(double s) {
  for (int i = 0; i < d; ++i) v[static_cast<std::size_t>(i)] *= s;
  return *this;
}

bool Point::operator==(const Point& o) const {
  if (d != o.d) return false;
  for (int i = 0; i < d; ++i)
    if (v[static_cast<std::size_t>(i)] != o.v[static_cast<std::size_t>(i)]) return false;
  return true;
}

double distance(const Point& a, const Point& b) { return (a - b).norm(); }

Point unit_vector(int d, int axis) {
  Point p(d);
  p[axis] = 1.0;
  return p;
}

std::string format_point(const Point& p) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (int i = 0; i < p.d; ++i) os << (i ? "," : "") << p[i];
  return os.str();
}

Point parse_point(const std::string& s) {
  Point p(0);
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (p.d >= kMaxDim) throw DomainError("point has too many coordinates: " + s);
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(item, &used);
    } catch (const std::exception&) {
      throw DomainError("malformed point '" + s + "'");
    }
    if (used != item.size()) throw DomainError("malformed point '" + s + "'");
    p[p.d++] = value;
  }
  if (p.d == 0) throw DomainError("empty point");
  return p;
}

// --- nodes -------------------------------------------------------------------

struct Geometry::Node {
  enum class Kind { Ball, HalfSpace, Cone, Slab, Whole, Intersection, Difference };
  Kind kind = Kind::Whole;
  Point c, n;
  double r = 0.0, b = 0.0, aperture = 0.0, lo = 0.0, hi = 0.0;
  int axis = 0;
  std::vector<std::shared_ptr<const Node>> kids;
};

namespace {

using Node = Geometry::Node;
using Kind = Geometry::Node::Kind;
using NodePtr = std::shared_ptr<const Node>;

constexpr double kHalfPi = std::numbers::pi / 2.0;

NodePtr make_ball(const Point& c, double r) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Ball;
  n->c = c;
  n->r = r;
  return n;
}

NodePtr make_halfspace(const Point& normal, double offset) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::HalfSpace;
  n->n = (1.0 / normal.norm()) * normal;
  n->b = offset;
  return n;
}

NodePtr make_cone(const Point& apex, const Point& axis, double aperture) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Cone;
  n->c = apex;
  n->n = (1.0 / axis.norm()) * axis;
  n->aperture = aperture;
  return n;
}

NodePtr make_slab(int axis, double lo, double hi) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Slab;
  n->axis = axis;
  n->lo = lo;
  n->hi = hi;
  return n;
}

NodePtr make_combo(Kind kind, std::vector<NodePtr> kids) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->kids = std::move(kids);
  return n;
}

double cone_angle(const Node& n, const Point& x, double& len) {
  const Point v = x - n.c;
  len = v.norm();
  if (len == 0.0) return 0.0;
  return std::acos(std::clamp(n.n.dot(v) / len, -1.0, 1.0));
}

bool inside(const Node& n, const Point& x, bool closed) {
  switch (n.kind) {
    case Kind::Ball: {
      const double d = distance(x, n.c);
      return closed ? d <= n.r : d < n.r;
    }
    case Kind::HalfSpace: return closed ? n.n.dot(x) >= n.b : n.n.dot(x) > n.b;
    case Kind::Cone: {
      double len = 0.0;
      const double ang = cone_angle(n, x, len);
      if (len == 0.0) return closed;
      return closed ? ang <= n.aperture : ang < n.aperture;
    }
    case Kind::Slab: {
      const double t = x[n.axis];
      return closed ? (t >= n.lo && t <= n.hi) : (t > n.lo && t < n.hi);
    }
    case Kind::Whole: return true;
    case Kind::Intersection:
      return std::all_of(n.kids.begin(), n.kids.end(), [&](const NodePtr& k) { return inside(*k, x, closed); });
    case Kind::Difference: return inside(*n.kids[0], x, closed) && !inside(*n.kids[1], x, !closed);
  }
  return false;
}

double dist_in(const Node& n, const Point& x);

// Distance from an inside point to the complement of n (lower bound).
double dist_out(const Node& n, const Point& x) {
  switch (n.kind) {
    case Kind::Ball: return n.r - distance(x, n.c);
    case Kind::HalfSpace: return n.n.dot(x) - n.b;
    case Kind::Cone: {
      double len = 0.0;
      const double gap = n.aperture - cone_angle(n, x, len);
      return gap >= kHalfPi ? len : len * std::sin(gap);
    }
    case Kind::Slab: return std::min(x[n.axis] - n.lo, n.hi - x[n.axis]);
    case Kind::Whole: return std::numeric_limits<double>::infinity();
    case Kind::Intersection: {
      double m = std::numeric_limits<double>::infinity();
      for (const auto& k : n.kids) m = std::min(m, dist_out(*k, x));
      return m;
    }
    case Kind::Difference: return std::min(dist_out(*n.kids[0], x), dist_in(*n.kids[1], x));
  }
  return 0.0;
}

// Distance from an outside point to the closure of n (lower bound).
double dist_in(const Node& n, const Point& x) {
  switch (n.kind) {
    case Kind::Ball: return std::max(0.0, distance(x, n.c) - n.r);
    case Kind::HalfSpace: return std::max(0.0, n.b - n.n.dot(x));
    case Kind::Cone: {
      double len = 0.0;
      const double gap = cone_angle(n, x, len) - n.aperture;
      if (gap <= 0.0) return 0.0;
      return gap >= kHalfPi ? len : len * std::sin(gap);
    }
    case Kind::Slab: {
      const double t = x[n.axis];
      return t < n.lo ? n.lo - t : (t > n.hi ? t - n.hi : 0.0);
    }
    case Kind::Whole: return 0.0;
    case Kind::Intersection: {
      double m = 0.0;
      for (const auto& k : n.kids) m = std::max(m, dist_in(*k, x));
      return m;
    }
    case Kind::Difference: return dist_in(*n.kids[0], x);
  }
  return 0.0;
}

double get_double(const std::map<std::string, std::string>& spec, const std::string& key) {
  auto it = spec.find(key);
  if (it == spec.end()) throw ModelError("geometry spec is missing '" + key + "'");
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(it->second, &used);
  } catch (const std::exception&) {
    throw ModelError("geometry key '" + key + "' is not a number");
  }
  if (used != it->second.size()) throw ModelError("geometry key '" + key + "' is not a number");
  return v;
}

double get_double(const std::map<std::string, std::string>& spec, const std::string& key, double fallback) {
  return spec.count(key) ? get_double(spec, key) : fallback;
}

Point get_point(const std::map<std::string, std::string>& spec, const std::string& key) {
  auto it = spec.find(key);
  if (it == spec.end()) throw ModelError("geometry spec is missing '" + key + "'");
  try {
    return parse_point(it->second);
  } catch (const DomainError& e) {
    throw ModelError(std::string("geometry key '") + key + "': " + e.what());
  }
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void require_radius(double r) {
  if (!(r > 0.0) || !std::isfinite(r)) throw ModelError("geometry radius must be positive");
}

}  // namespace

// --- named constructors ------------------------------------------------------

Geometry Geometry::ball(const Point& center, double radius) {
  require_radius(radius);
  Geometry g;
  g.root_ = make_ball(center, radius);
  g.d_ = center.d;
  g.witness_ = center;
  g.bound_center_ = center;
  g.bound_radius_ = radius;
  g.type_ = "ball";
  g.spec_ = {{"type", "ball"}, {"center", format_point(center)}, {"radius", num(radius)}};
  return g;
}

Geometry Geometry::halfspace_cap_ball(const Point& center, double radius, const Point& normal, double offset) {
  require_radius(radius);
  if (!(normal.norm() > 0.0) || normal.d != center.d) throw ModelError("half-space normal must be nonzero");
  if (!(offset > -radius && offset < radius)) throw ModelError("half-space offset must lie in (-R, R)");
  const Point nn = (1.0 / normal.norm()) * normal;
  Geometry g;
  g.root_ = make_combo(Kind::Intersection, {make_ball(center, radius), make_halfspace(nn, nn.dot(center) + offset)});
  g.d_ = center.d;
  g.witness_ = center + (0.5 * (offset + radius)) * nn;
  g.bound_center_ = center;
  g.bound_radius_ = radius;
  g.type_ = "halfspace_cap_ball";
  g.spec_ = {{"type", g.type_},          {"center", format_point(center)}, {"radius", num(radius)},
             {"normal", format_point(nn)}, {"offset", num(offset)}};
  return g;
}

Geometry Geometry::cone_cap_ball(const Point& center, double radius, const Point& axis, double aperture) {
  require_radius(radius);
  if (!(axis.norm() > 0.0) || axis.d != center.d) throw ModelError("cone axis must be nonzero");
  if (!(aperture > 0.0 && aperture < std::numbers::pi)) throw ModelError("cone aperture must lie in (0, pi)");
  const Point a = (1.0 / axis.norm()) * axis;
  Geometry g;
  g.root_ = make_combo(Kind::Intersection, {make_ball(center, radius), make_cone(center, a, aperture)});
  g.d_ = center.d;
  g.witness_ = center + (0.5 * radius) * a;
  g.bound_center_ = center;
  g.bound_radius_ = radius;
  g.type_ = "cone_cap_ball";
  g.spec_ = {{"type", g.type_},            {"center", format_point(center)}, {"radius", num(radius)},
             {"direction", format_point(a)}, {"aperture", num(aperture)}};
  return g;
}

Geometry Geometry::slit_ball(const Point& center, double radius, double half_width) {
  require_radius(radius);
  if (center.d < 2) throw ModelError("a slit ball needs d >= 2");
  if (!(half_width >= 0.0 && half_width < radius)) throw ModelError("slit half width must lie in [0, R)");
  Point minus_e1 = unit_vector(center.d, 0);
  minus_e1 *= -1.0;
  // Closed strip {x_1 - c_1 <= 0} x {|x_2 - c_2| <= w}.
  NodePtr strip = make_combo(Kind::Intersection, {make_halfspace(minus_e1, -center[0]),
                                                  make_slab(1, center[1] - half_width, center[1] + half_width)});
  Geometry g;
  g.root_ = make_combo(Kind::Difference, {make_ball(center, radius), strip});
  g.d_ = center.d;
  g.witness_ = center + (0.5 * radius) * unit_vector(center.d, 0);
  g.bound_center_ = center;
  g.bound_radius_ = radius;
  g.type_ = "slit_ball";
  g.spec_ = {{"type", g.type_}, {"center", format_point(center)}, {"radius", num(radius)},
             {"half_width", num(half_width)}};
  return g;
}

Geometry Geometry::annulus(const Point& center, double inner, double outer) {
  require_radius(inner);
  require_radius(outer);
  if (!(inner < outer)) throw ModelError("annulus needs inner < outer");
  Geometry g;
  g.root_ = make_combo(Kind::Difference, {make_ball(center, outer), make_ball(center, inner)});
  g.d_ = center.d;
  g.witness_ = center + (0.5 * (inner + outer)) * unit_vector(center.d, 0);
  g.bound_center_ = center;
  g.bound_radius_ = outer;
  g.type_ = "annulus";
  g.spec_ = {{"type", g.type_}, {"center", format_point(center)}, {"inner", num(inner)}, {"outer", num(outer)}};
  return g;
}

Geometry Geometry::complement_of_ball(const Point& center, double radius) {
  require_radius(radius);
  Geometry g;
  auto whole = std::make_shared<Node>();
  g.root_ = make_combo(Kind::Difference, {whole, make_ball(center, radius)});
  g.d_ = center.d;
  g.witness_ = center + (2.0 * radius) * unit_vector(center.d, 0);
  g.bound_center_ = center;
  g.type_ = "complement_ball";
  g.spec_ = {{"type", g.type_}, {"center", format_point(center)}, {"radius", num(radius)}};
  return g;
}

Geometry Geometry::slab(int d, int axis, double lo, double hi) {
  if (d < 1 || d > kMaxDim || axis < 0 || axis >= d) throw ModelError("slab axis out of range");
  if (!(lo < hi)) throw ModelError("slab needs lo < hi");
  Geometry g;
  g.root_ = make_slab(axis, lo, hi);
  g.d_ = d;
  g.witness_ = Point(d);
  g.witness_[axis] = 0.5 * (lo + hi);
  g.bound_center_ = g.witness_;
  g.type_ = "slab";
  g.spec_ = {{"type", g.type_}, {"d", std::to_string(d)}, {"axis", std::to_string(axis)},
             {"lo", num(lo)},   {"hi", num(hi)}};
  return g;
}

Geometry Geometry::halfspace(const Point& normal, double offset) {
  if (!(normal.norm() > 0.0)) throw ModelError("half-space normal must be nonzero");
  const Point nn = (1.0 / normal.norm()) * normal;
  Geometry g;
  g.root_ = make_halfspace(nn, offset);
  g.d_ = normal.d;
  g.witness_ = (offset + 1.0) * nn;
  g.bound_center_ = g.witness_;
  g.type_ = "halfspace";
  g.spec_ = {{"type", g.type_}, {"normal", format_point(nn)}, {"offset", num(offset)}};
  return g;
}

Geometry Geometry::from_spec(const std::map<std::string, std::string>& spec) {
  auto it = spec.find("type");
  if (it == spec.end()) throw ModelError("geometry spec is missing 'type'");
  const std::string& t = it->second;
  Geometry g;
  if (t == "ball") {
    g = ball(get_point(spec, "center"), get_double(spec, "radius"));
  } else if (t == "halfspace_cap_ball") {
    const Point c = get_point(spec, "center");
    const Point n = spec.count("normal") ? get_point(spec, "normal") : unit_vector(c.d, 0);
    g = halfspace_cap_ball(c, get_double(spec, "radius"), n, get_double(spec, "offset", 0.0));
  } else if (t == "cone_cap_ball") {
    const Point c = get_point(spec, "center");
    const Point a = spec.count("direction") ? get_point(spec, "direction") : unit_vector(c.d, 0);
    g = cone_cap_ball(c, get_double(spec, "radius"), a, get_double(spec, "aperture"));
  } else if (t == "slit_ball") {
    g = slit_ball(get_point(spec, "center"), get_double(spec, "radius"), get_double(spec, "half_width", 0.0));
  } else if (t == "annulus") {
    g = annulus(get_point(spec, "center"), get_double(spec, "inner"), get_double(spec, "outer"));
  } else if (t == "complement_ball") {
    g = complement_of_ball(get_point(spec, "center"), get_double(spec, "radius"));
  } else if (t == "slab") {
    g = slab(static_cast<int>(get_double(spec, "d")), static_cast<int>(get_double(spec, "axis", 0.0)),
             get_double(spec, "lo"), get_double(spec, "hi"));
  } else if (t == "halfspace") {
    g = halfspace(get_point(spec, "normal"), get_double(spec, "offset", 0.0));
  } else {
    throw ModelError("unknown geometry type '" + t + "'");
  }
  if (spec.count("clip_center") || spec.count("clip_radius"))
    g = g.intersect_ball(get_point(spec, "clip_center"), get_double(spec, "clip_radius"));
  for (const auto& [k, v] : spec)
    if (!g.spec_.count(k)) throw ModelError("geometry key '" + k + "' does not apply to type " + t);
  if (g.spec_.at("type") != t) throw ModelError("geometry spec mismatch");
  return g;
}

Geometry Geometry::intersect_ball(const Point& center, double radius) const {
  require_radius(radius);
  if (center.d != d_) throw ModelError("clip ball dimension mismatch");
  Geometry g = *this;
  g.root_ = make_combo(Kind::Intersection, {root_, make_ball(center, radius)});
  if (radius < bound_radius_) {
    g.bound_center_ = center;
    g.bound_radius_ = radius;
  }
  g.type_ = type_ + "&ball";
  g.spec_["clip_center"] = format_point(center);
  g.spec_["clip_radius"] = num(radius);
  std::vector<Point> candidates{center, witness_};
  const Point toward = witness_ - center;
  const double len = toward.norm();
  if (len > 0.0)
    for (double f : {0.5, 0.25, 0.75, 0.1, 0.9}) candidates.push_back(center + (f * radius / len) * toward);
  for (const Point& p : candidates)
    if (g.contains(p)) {
      g.witness_ = p;
      return g;
    }
  throw ModelError("clipped geometry appears to be empty");
}

bool Geometry::contains(const Point& x) const { return inside(*root_, x, false); }

double Geometry::dist_to_complement(const Point& x) const {
  if (!contains(x)) return 0.0;
  return std::max(0.0, dist_out(*root_, x));
}

double Geometry::dist_to_domain(const Point& x) const {
  if (contains(x)) return 0.0;
  return dist_in(*root_, x);
}

}  // namespace ubhp
