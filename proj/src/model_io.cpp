#include "ubhp/model_io.hpp"

#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "ubhp/errors.hpp"

namespace ubhp {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

const std::string& need(const KeyValues& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ModelError("model spec is missing '" + key + "'");
  return it->second;
}

double number_or(const KeyValues& kv, const std::string& key, double fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : parse_number(it->second);
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_number(const std::string& text) {
  const std::string s = trim(text);
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  auto res = std::from_chars(first, s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
    throw DomainError("malformed number '" + text + "'");
  return v;
}

std::vector<double> parse_number_list(const std::string& text) {
  const std::string s = trim(text);
  if (s.rfind("log:", 0) == 0) {
    const auto parts = split(s.substr(4), ':');
    if (parts.size() != 3) throw DomainError("log grid needs log:lo:hi:per_decade, got '" + text + "'");
    const double lo = parse_number(parts[0]), hi = parse_number(parts[1]), ppd = parse_number(parts[2]);
    if (!(lo > 0.0 && hi > lo && ppd >= 1.0 && ppd == std::floor(ppd)))
      throw DomainError("invalid log grid '" + text + "'");
    return log_grid(lo, hi, static_cast<int>(ppd));
  }
  std::vector<double> out;
  if (s.empty()) return out;
  for (const auto& p : split(s, ',')) out.push_back(parse_number(p));
  return out;
}

std::string format_number_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_number(v[i]);
  return s;
}

Modulation parse_modulation(const std::string& text) {
  const auto parts = split(trim(text), ':');
  Modulation m;
  const std::string& kind = parts.front();
  auto arg = [&](std::size_t i) {
    if (i >= parts.size()) throw DomainError("modulation '" + text + "' has too few parameters");
    return parse_number(parts[i]);
  };
  std::size_t expected = 1;
  if (kind == "unit") {
    m.kind = Modulation::Kind::Unit;
  } else if (kind == "constant") {
    m.kind = Modulation::Kind::Constant;
    m.value = arg(1);
    expected = 2;
  } else if (kind == "step") {
    m.kind = Modulation::Kind::Step;
    m.value = arg(1);
    m.outer = arg(2);
    m.radius = arg(3);
    expected = 4;
  } else if (kind == "logperiodic") {
    m.kind = Modulation::Kind::LogPeriodic;
    m.amplitude = arg(1);
    m.period = arg(2);
    expected = 3;
  } else {
    throw DomainError("unknown modulation '" + text + "'");
  }
  if (parts.size() != expected) throw DomainError("modulation '" + text + "' has too many parameters");
  return m;
}

std::string format_modulation(const Modulation& m) {
  switch (m.kind) {
    case Modulation::Kind::Unit: return "unit";
    case Modulation::Kind::Constant: return "constant:" + format_number(m.value);
    case Modulation::Kind::Step:
      return "step:" + format_number(m.value) + ":" + format_number(m.outer) + ":" + format_number(m.radius);
    case Modulation::Kind::LogPeriodic:
      return "logperiodic:" + format_number(m.amplitude) + ":" + format_number(m.period);
  }
  return "unit";
}

KeyValues phi_to_kv(const PhiModel& phi) {
  KeyValues kv;
  kv["phi"] = phi.kind();
  const auto& v = phi.variant();
  if (const auto* s = std::get_if<StablePower>(&v)) {
    kv["alpha"] = format_number(s->alpha);
  } else if (const auto* m = std::get_if<Mixture>(&v)) {
    std::string t;
    for (std::size_t i = 0; i < m->terms.size(); ++i)
      t += (i ? "," : "") + format_number(m->terms[i].weight) + ":" + format_number(m->terms[i].alpha);
    kv["terms"] = t;
  } else if (const auto* x = std::get_if<SectionSix>(&v)) {
    kv["exponents"] = format_number_list(x->schedule.exponents);
    kv["breakpoints"] = format_number_list(x->schedule.breakpoints);
    kv["offsets"] = format_number_list(x->schedule.offsets);
    kv["epsilon"] = format_number(x->schedule.epsilon);
    kv["form"] = x->form == Section6Form::LambdaG ? "lambda_g" : "inverse_g";
  } else if (const auto* tb = std::get_if<Tabulated>(&v)) {
    kv["lambda"] = format_number_list(tb->lambda());
    kv["values"] = format_number_list(tb->value());
  }
  return kv;
}

PhiModel phi_from_kv(const KeyValues& kv) {
  static const std::map<std::string, std::set<std::string>> allowed{
      {"stable", {"alpha"}},
      {"mixture", {"terms"}},
      {"section6", {"pieces", "epsilon", "form", "exponents", "breakpoints", "offsets"}},
      {"tabulated", {"lambda", "values"}}};
  const std::string kind = kv.count("phi") ? kv.at("phi") : "stable";
  auto it = allowed.find(kind);
  if (it == allowed.end()) throw ModelError("unknown phi variant '" + kind + "'");
  for (const auto& [k, v] : kv)
    if (k != "phi" && k != "d" && k != "gamma" && k != "modulation" && !it->second.count(k))
      throw ModelError("model key '" + k + "' does not apply to phi=" + kind);

  if (kind == "stable") return PhiModel(StablePower{number_or(kv, "alpha", 1.0)});
  if (kind == "mixture") {
    Mixture m;
    for (const auto& term : split(need(kv, "terms"), ',')) {
      const auto wa = split(trim(term), ':');
      if (wa.size() != 2) throw ModelError("mixture term '" + term + "' must be weight:alpha");
      m.terms.push_back({parse_number(wa[0]), parse_number(wa[1])});
    }
    return PhiModel(m);
  }
  if (kind == "section6") {
    SectionSix s;
    const std::string form = kv.count("form") ? kv.at("form") : "lambda_g";
    if (form == "lambda_g")
      s.form = Section6Form::LambdaG;
    else if (form == "inverse_g")
      s.form = Section6Form::InverseG;
    else
      throw ModelError("unknown section6 form '" + form + "'");
    const double eps = number_or(kv, "epsilon", 0.05);
    if (kv.count("exponents")) {
      s.schedule.exponents = parse_number_list(kv.at("exponents"));
      s.schedule.breakpoints = parse_number_list(need(kv, "breakpoints"));
      s.schedule.offsets = parse_number_list(need(kv, "offsets"));
      s.schedule.epsilon = eps;
      s.schedule.validate();
    } else {
      const double pieces = number_or(kv, "pieces", 4.0);
      if (pieces != std::floor(pieces)) throw ModelError("pieces must be an integer");
      s.schedule = section6_build_f(static_cast<int>(pieces), eps);
    }
    return PhiModel(s);
  }
  return PhiModel(Tabulated(parse_number_list(need(kv, "lambda")), parse_number_list(need(kv, "values"))));
}

KeyValues process_to_kv(const ProcessModel& model) {
  KeyValues kv = phi_to_kv(model.sub.phi);
  kv["d"] = std::to_string(model.d);
  kv["gamma"] = format_number(model.gamma);
  kv["modulation"] = format_modulation(model.modulation);
  return kv;
}

ProcessModel process_from_kv(const KeyValues& kv) {
  ProcessModel m;
  m.sub.phi = phi_from_kv(kv);
  const double d = number_or(kv, "d", 1.0);
  if (d != std::floor(d)) throw ModelError("d must be an integer");
  m.d = static_cast<int>(d);
  m.gamma = number_or(kv, "gamma", 1.0);
  if (kv.count("modulation")) m.modulation = parse_modulation(kv.at("modulation"));
  m.validate();
  return m;
}

void write_kv(std::ostream& os, const KeyValues& kv) {
  for (const auto& [k, v] : kv) os << k << '=' << v << '\n';
}

KeyValues read_kv(std::istream& is) {
  KeyValues kv;
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(n, "expected key=value");
    const std::string key = trim(t.substr(0, eq));
    if (kv.count(key)) throw ParseError(n, "duplicate key '" + key + "'");
    kv[key] = trim(t.substr(eq + 1));
  }
  return kv;
}

}  // namespace ubhp
