#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ubhp/geometry.hpp"

namespace ubhp {

/// Value type of a config key.
enum class ConfigType { Text, Number, Count, NumberList, PointValue, TextList };

struct ConfigKey {
  ConfigType type = ConfigType::Text;
  bool required = false;
  bool has_default = false;
  std::string fallback;
};

/// Every key accepted in a config file, as "section.key".
const std::map<std::string, ConfigKey>& config_schema();
/// Names accepted by run.experiment, as "group.action".
const std::vector<std::string>& experiment_names();

/// Effective settings of one run. Values are kept as canonical text keyed by
/// "section.key"; provenance records where each value came from
/// ("line N", "default" or "override").
class RunConfig {
 public:
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::string& text(const std::string& key) const;
  double number(const std::string& key) const;
  std::uint64_t count(const std::string& key) const;
  std::vector<double> numbers(const std::string& key) const;
  Point point(const std::string& key) const;
  std::vector<std::string> texts(const std::string& key) const;
  /// Keys of one section with the section prefix removed.
  std::map<std::string, std::string> section(const std::string& name) const;

  /// Validates and canonicalizes the value; throws DomainError on a bad
  /// value or unknown key.
  void set(const std::string& key, const std::string& value, const std::string& provenance);
  void erase(const std::string& key);

  const std::map<std::string, std::string>& values() const { return values_; }
  const std::map<std::string, std::string>& provenance() const { return provenance_; }
  const std::string& experiment() const { return text("run.experiment"); }

  /// Equal effective values; provenance is ignored.
  bool operator==(const RunConfig& o) const { return values_ == o.values_; }

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> provenance_;
};

/// Parses line-oriented key=value text with [section] headers. Throws
/// ParseError naming the line for unknown sections or keys, malformed
/// values and duplicates, and for a missing required key.
RunConfig parse_config(const std::string& text);
/// As above, with "section.key" overrides applied on top of the file before
/// defaults are filled in.
RunConfig parse_config(const std::string& text, const std::map<std::string, std::string>& overrides);
/// Text that parses back to an equal RunConfig. Defaulted values are
/// written too, so the file alone reproduces the run.
std::string emit_config(const RunConfig& config);
/// Fills defaults and checks required keys without a source file.
RunConfig make_config(const std::map<std::string, std::string>& values);

}  // namespace ubhp
