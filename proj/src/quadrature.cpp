#include "ubhp/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

namespace ubhp {

namespace {

// Gauss-Kronrod 21-point abscissae and weights (QUADPACK qk21).
constexpr std::array<double, 11> kXgk = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.000000000000000000000000000000000};
constexpr std::array<double, 11> kWgk = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077208980029646, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
constexpr std::array<double, 5> kWg = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

struct Panel {
  double a, b, value, error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

Panel gk21(const Integrand& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double resk = fc * kWgk[10];
  double resabs = std::abs(resk);
  double resg = 0.0;
  std::array<double, 10> f1{}, f2{};
  for (int j = 0; j < 10; ++j) {
    const double dx = half * kXgk[j];
    f1[j] = f(center - dx);
    f2[j] = f(center + dx);
    const double sum = f1[j] + f2[j];
    resk += kWgk[j] * sum;
    resabs += kWgk[j] * (std::abs(f1[j]) + std::abs(f2[j]));
    if (j % 2 == 1) resg += kWg[j / 2] * sum;
  }
  const double reskh = resk * 0.5;
  double resasc = kWgk[10] * std::abs(fc - reskh);
  for (int j = 0; j < 10; ++j) resasc += kWgk[j] * (std::abs(f1[j] - reskh) + std::abs(f2[j] - reskh));

  const double value = resk * half;
  resabs *= std::abs(half);
  resasc *= std::abs(half);
  double err = std::abs((resk - resg) * half);
  if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  const double eps = std::numeric_limits<double>::epsilon();
  if (resabs > std::numeric_limits<double>::min() / (50.0 * eps)) err = std::max(50.0 * eps * resabs, err);
  if (!std::isfinite(value)) err = std::numeric_limits<double>::infinity();
  return {a, b, value, err};
}

}  // namespace

double QuadResult::relative_error() const {
  if (value == 0.0) return error == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return error / std::abs(value);
}

QuadResult& QuadResult::operator+=(const QuadResult& other) {
  value += other.value;
  error += other.error;
  evaluations += other.evaluations;
  converged = converged && other.converged;
  return *this;
}

QuadResult integrate(const Integrand& f, double a, double b, const QuadSpec& spec) {
  QuadResult out;
  if (a == b) return out;
  std::priority_queue<Panel> heap;
  Panel first = gk21(f, a, b);
  heap.push(first);
  double total = first.value;
  double total_err = first.error;
  out.evaluations = 21;
  const double eps = std::numeric_limits<double>::epsilon();
  int panels = 1;
  while (total_err > std::max(spec.abs_tol, spec.rel_tol * std::abs(total))) {
    if (panels >= spec.max_intervals) {
      out.converged = false;
      break;
    }
    Panel worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    // Panel is below floating-point resolution; nothing further to gain.
    if (std::abs(worst.b - worst.a) <= 4.0 * eps * std::max(std::abs(worst.a), std::abs(worst.b))) {
      out.converged = total_err <= 10.0 * std::max(spec.abs_tol, spec.rel_tol * std::abs(total));
      break;
    }
    heap.pop();
    Panel left = gk21(f, worst.a, mid);
    Panel right = gk21(f, mid, worst.b);
    out.evaluations += 42;
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++panels;
  }
  // Re-sum to shed accumulated cancellation from the running updates.
  double sum = 0.0, err = 0.0;
  while (!heap.empty()) {
    sum += heap.top().value;
    err += heap.top().error;
    heap.pop();
  }
  out.value = sum;
  out.error = err;
  if (!std::isfinite(sum)) out.converged = false;
  return out;
}

QuadResult integrate(const Integrand& f, std::span<const double> breaks, const QuadSpec& spec) {
  QuadResult out;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) out += integrate(f, breaks[i], breaks[i + 1], spec);
  return out;
}

QuadResult integrate_log(const Integrand& f, double a, double b, const QuadSpec& spec) {
  if (!(a > 0.0) || !(b >= a)) throw DomainError("integrate_log requires 0 < a <= b");
  auto g = [&f](double u) {
    const double x = std::exp(u);
    return f(x) * x;
  };
  return integrate(g, std::log(a), std::log(b), spec);
}

namespace {

QuadResult chunked(const Integrand& f, double start, int direction, const QuadSpec& spec) {
  QuadResult out;
  auto g = [&f](double u) {
    const double x = std::exp(u);
    if (x == 0.0 || !std::isfinite(x)) return 0.0;
    return f(x) * x;
  };
  double u = std::log(start);
  int quiet = 0;
  const double u_limit = direction > 0 ? 700.0 : -740.0;
  for (int k = 0; k < spec.max_chunks; ++k) {
    const double next = u + direction * spec.log_chunk;
    const double lo = std::min(u, next), hi = std::max(u, next);
    QuadSpec chunk_spec = spec;
    chunk_spec.abs_tol = std::max(spec.abs_tol, 1e-3 * spec.rel_tol * std::abs(out.value));
    QuadResult piece = integrate(g, lo, hi, chunk_spec);
    out += piece;
    const double scale = std::abs(out.value);
    if (std::abs(piece.value) <= 1e-3 * spec.rel_tol * scale || (scale == 0.0 && piece.value == 0.0 && k > 8)) {
      if (++quiet >= 2) return out;
    } else {
      quiet = 0;
    }
    u = next;
    if ((direction > 0 && u >= u_limit) || (direction < 0 && u <= u_limit)) return out;
  }
  out.converged = false;
  return out;
}

}  // namespace

QuadResult integrate_from_zero(const Integrand& f, double b, const QuadSpec& spec) {
  if (!(b > 0.0)) throw DomainError("integrate_from_zero requires b > 0");
  return chunked(f, b, -1, spec);
}

QuadResult integrate_to_infinity(const Integrand& f, double a, const QuadSpec& spec) {
  if (!(a > 0.0)) throw DomainError("integrate_to_infinity requires a > 0");
  return chunked(f, a, +1, spec);
}

double require_converged(const QuadResult& r, const std::string& what, double tol) {
  const double rel = r.relative_error();
  if (!std::isfinite(r.value) || !(rel <= tol)) throw QuadratureError(what, rel);
  return r.value;
}

}  // namespace ubhp
