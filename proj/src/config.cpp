#include "ubhp/config.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "ubhp/errors.hpp"
#include "ubhp/model_io.hpp"

namespace ubhp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

ConfigKey key(ConfigType t, const std::string& fallback = "", bool has_default = true) {
  return ConfigKey{t, false, has_default, fallback};
}
ConfigKey optional(ConfigType t) { return ConfigKey{t, false, false, ""}; }

std::uint64_t parse_count(const std::string& text) {
  const std::string s = trim(text);
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    // Accept integral scientific notation such as 1e5.
    double d = 0.0;
    try {
      d = parse_number(s);
    } catch (const DomainError&) {
      throw DomainError("malformed count '" + text + "'");
    }
    if (d < 0.0 || d != static_cast<double>(static_cast<std::uint64_t>(d)) || d > 9.0e15)
      throw DomainError("malformed count '" + text + "'");
    v = static_cast<std::uint64_t>(d);
  }
  return v;
}

std::string canonical(ConfigType type, const std::string& raw) {
  const std::string s = trim(raw);
  switch (type) {
    case ConfigType::Text:
      if (s.empty()) throw DomainError("empty value");
      return s;
    case ConfigType::Number: return format_number(parse_number(s));
    case ConfigType::Count: return std::to_string(parse_count(s));
    case ConfigType::NumberList:
      if (s.rfind("log:", 0) == 0) {
        parse_number_list(s);
        return s;
      }
      return format_number_list(parse_number_list(s));
    case ConfigType::PointValue: {
      std::vector<double> v;
      for (const auto& item : split_list(s)) v.push_back(parse_number(item));
      if (v.empty() || static_cast<int>(v.size()) > kMaxDim) throw DomainError("malformed point '" + raw + "'");
      return format_number_list(v);
    }
    case ConfigType::TextList: {
      const auto items = split_list(s);
      if (items.empty()) throw DomainError("empty list");
      std::string out;
      for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
      return out;
    }
  }
  return s;
}

void finish(RunConfig& c, int last_line) {
  for (const auto& [k, spec] : config_schema()) {
    if (c.has(k)) continue;
    if (spec.required) throw ParseError(last_line, "missing required key '" + k + "'");
    if (spec.has_default) c.set(k, spec.fallback, "default");
  }
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), c.experiment()) == names.end())
    throw ParseError(last_line, "unknown experiment '" + c.experiment() + "'");
}

}  // namespace

const std::map<std::string, ConfigKey>& config_schema() {
  using T = ConfigType;
  static const std::map<std::string, ConfigKey> schema = [] {
    std::map<std::string, ConfigKey> s{
        {"run.experiment", ConfigKey{T::Text, true, false, ""}},
        {"run.seed", key(T::Count, "1")},
        {"run.n", key(T::Count, "100000")},
        {"run.workers", key(T::Count, "0")},
        {"run.out", key(T::Text, "out")},

        {"model.phi", key(T::Text, "stable")},
        {"model.d", key(T::Count, "1")},
        {"model.gamma", key(T::Number, "1")},
        {"model.modulation", key(T::Text, "unit")},
        {"model.alpha", optional(T::Number)},
        {"model.terms", optional(T::Text)},
        {"model.pieces", optional(T::Count)},
        {"model.epsilon", optional(T::Number)},
        {"model.form", optional(T::Text)},
        {"model.exponents", optional(T::NumberList)},
        {"model.breakpoints", optional(T::NumberList)},
        {"model.offsets", optional(T::NumberList)},
        {"model.lambda", optional(T::NumberList)},
        {"model.values", optional(T::NumberList)},

        {"start.x", optional(T::PointValue)},

        {"grid.lambda", key(T::NumberList, "log:0.001:1000:4")},
        {"grid.t", key(T::NumberList, "log:0.001:1000:4")},
        {"grid.r", key(T::NumberList, "log:0.001:100:4")},
        {"grid.l", key(T::NumberList, "log:1:1000:4")},
        {"grid.x", optional(T::NumberList)},
        {"grid.offsets", optional(T::NumberList)},
        {"grid.radii", optional(T::NumberList)},
        {"grid.harnack", optional(T::NumberList)},

        {"experiment.kind", key(T::Text, "j")},
        {"experiment.method", key(T::Text, "gaver_stehfest")},
        {"experiment.order", key(T::Count, "12")},
        {"experiment.strategy", optional(T::Text)},
        {"experiment.c_h", key(T::Number, "0.01")},
        {"experiment.eps_cut", key(T::Number, "0")},
        {"experiment.max_steps", key(T::Count, "1000000")},
        {"experiment.R0", key(T::Number, "1")},
        {"experiment.lambda_max", key(T::Number, "10000")},
        {"experiment.r_max", key(T::Number, "1000000")},
        {"experiment.per_decade", key(T::Count, "50")},
        {"experiment.a", key(T::Number, "0.5")},
        {"experiment.targets", key(T::TextList, "complement,right,far:2")},
        {"experiment.a1", key(T::Text, "right_far:1")},
        {"experiment.a2", key(T::Text, "left_far:1")},
        {"experiment.sets", key(T::TextList, "halfspace_cap,cone_cap,slit_ball")},
        {"experiment.z0", optional(T::PointValue)},
        {"experiment.x0", optional(T::PointValue)},
        {"experiment.radius", key(T::Number, "1")},
        {"experiment.set_radius", key(T::Number, "1")},
        {"experiment.aperture", key(T::Number, "0.78539816339744828")},
        {"experiment.slit_half_width", key(T::Number, "0.01")},
        {"experiment.n_radial", optional(T::Count)},
        {"experiment.n_angle", optional(T::Count)},
        {"experiment.max_spread", key(T::Number, "10")},

        {"thresholds.stability", key(T::Number, "2")},
        {"thresholds.harnack_max", key(T::Number, "1000000")},
        {"thresholds.seed_tolerance", key(T::Number, "0.25")},
        {"thresholds.max_rel_stderr", key(T::Number, "0.2")},
        {"thresholds.max_excluded", key(T::Number, "0.5")},
    };
    for (const char* g : {"type", "center", "radius", "normal", "offset", "direction", "aperture", "half_width",
                          "inner", "outer", "d", "axis", "lo", "hi", "clip_center", "clip_radius"})
      s["geometry." + std::string(g)] = optional(T::Text);
    return s;
  }();
  return schema;
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{
      "phi.eval",     "phi.cert",        "phi.section6",    "levy.j",          "levy.mu",
      "levy.asymp",   "ladder.kappa",    "ladder.renewal",  "ladder.interval", "sim.exit",
      "sim.exit_time", "verify.kernel",  "verify.harnack",  "verify.factorization",
      "verify.bhp",   "verify.exit_time"};
  return names;
}

const std::string& RunConfig::text(const std::string& k) const {
  auto it = values_.find(k);
  if (it == values_.end()) throw DomainError("config key '" + k + "' is not set");
  return it->second;
}

double RunConfig::number(const std::string& k) const { return parse_number(text(k)); }
std::uint64_t RunConfig::count(const std::string& k) const { return parse_count(text(k)); }
std::vector<double> RunConfig::numbers(const std::string& k) const { return parse_number_list(text(k)); }
Point RunConfig::point(const std::string& k) const { return parse_point(text(k)); }
std::vector<std::string> RunConfig::texts(const std::string& k) const { return split_list(text(k)); }

std::map<std::string, std::string> RunConfig::section(const std::string& name) const {
  std::map<std::string, std::string> out;
  const std::string prefix = name + ".";
  for (const auto& [k, v] : values_)
    if (k.rfind(prefix, 0) == 0) out[k.substr(prefix.size())] = v;
  return out;
}

void RunConfig::set(const std::string& k, const std::string& value, const std::string& provenance) {
  auto it = config_schema().find(k);
  if (it == config_schema().end()) throw DomainError("unknown key '" + k + "'");
  std::string v;
  try {
    v = canonical(it->second.type, value);
  } catch (const DomainError& e) {
    throw DomainError("key '" + k + "': " + e.what());
  }
  values_[k] = v;
  provenance_[k] = provenance;
}

void RunConfig::erase(const std::string& k) {
  values_.erase(k);
  provenance_.erase(k);
}

RunConfig parse_config(const std::string& text) { return parse_config(text, {}); }

RunConfig parse_config(const std::string& text, const std::map<std::string, std::string>& overrides) {
  RunConfig c;
  std::istringstream is(text);
  std::string line, section;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#' || t.front() == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ParseError(n, "malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      bool known = false;
      for (const auto& [k, spec] : config_schema()) known = known || k.rfind(section + ".", 0) == 0;
      if (!known) throw ParseError(n, "unknown section '" + section + "'");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(n, "expected key=value");
    std::string k = trim(t.substr(0, eq));
    if (k.empty()) throw ParseError(n, "empty key");
    // Dotted keys at top level name their section directly.
    if (!section.empty()) k = section + "." + k;
    if (!config_schema().count(k)) throw ParseError(n, "unknown key '" + k + "'");
    if (c.has(k)) throw ParseError(n, "duplicate key '" + k + "'");
    try {
      c.set(k, t.substr(eq + 1), "line " + std::to_string(n));
    } catch (const DomainError& e) {
      throw ParseError(n, e.what());
    }
  }
  for (const auto& [k, v] : overrides) {
    c.set(k, v, "override");
  }
  finish(c, n);
  return c;
}

std::string emit_config(const RunConfig& config) {
  std::ostringstream os;
  std::string current;
  for (const auto& [k, v] : config.values()) {
    const auto dot = k.find('.');
    const std::string section = k.substr(0, dot);
    if (section != current) {
      os << (current.empty() ? "" : "\n") << '[' << section << "]\n";
      current = section;
    }
    os << k.substr(dot + 1) << " = " << v << '\n';
  }
  return os.str();
}

RunConfig make_config(const std::map<std::string, std::string>& values) {
  RunConfig c;
  for (const auto& [k, v] : values) c.set(k, v, "override");
  if (!c.has("run.experiment")) throw ParseError(0, "missing required key 'run.experiment'");
  finish(c, 0);
  return c;
}

}  // namespace ubhp
