#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "ubhp/levy.hpp"

namespace ubhp {

using KeyValues = std::map<std::string, std::string>;

/// Shortest decimal text that reads back to the same double.
std::string format_number(double v);
/// Strict parse of a whole string as a finite double; throws DomainError.
double parse_number(const std::string& s);
/// "a,b,c" or "log:lo:hi:per_decade".
std::vector<double> parse_number_list(const std::string& s);
std::string format_number_list(const std::vector<double>& v);

Modulation parse_modulation(const std::string& s);
std::string format_modulation(const Modulation& m);

/// Keys: phi, alpha, terms (weight:alpha,...), pieces, epsilon, form,
/// exponents, breakpoints, offsets, lambda, values.
KeyValues phi_to_kv(const PhiModel& phi);
PhiModel phi_from_kv(const KeyValues& kv);
/// phi keys plus d, gamma, modulation.
KeyValues process_to_kv(const ProcessModel& model);
ProcessModel process_from_kv(const KeyValues& kv);

/// One key=value per line; '#' starts a comment line.
void write_kv(std::ostream& os, const KeyValues& kv);
KeyValues read_kv(std::istream& is);

}  // namespace ubhp
