#pragma once

#include <array>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "wpt/errors.hpp"
#include "wpt/params.hpp"

namespace wpt {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(std::string_view text, const std::string& context) {
  const std::string buf(text);
  char* end = nullptr;
  const double v = std::strtod(buf.c_str(), &end);
  if (end == buf.c_str() || *end != '\0')
    throw InputError("invalid numeric value '" + buf + "' for " + context);
  return v;
}

}  // namespace detail

/// Parses the `key = value` configuration format. One assignment per line,
/// SI units, `#` starts a comment line. The key set is closed: every key
/// below must appear exactly once and nothing else is accepted.
inline SystemParams parse_config(std::istream& in) {
  static constexpr std::array<const char*, 11> keys = {
      "omega_s", "L1", "L2", "C1", "C2", "R1", "R2", "M", "Cf", "RL", "V1"};

  std::map<std::string, double> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos)
      throw InputError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key{detail::trim(t.substr(0, eq))};
    const std::string_view val = detail::trim(t.substr(eq + 1));
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) throw InputError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (seen.count(key))
      throw InputError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    seen[key] = detail::parse_double(val, "key '" + key + "'");
  }

  for (const char* k : keys)
    if (!seen.count(k)) throw InputError(std::string("config missing key '") + k + "'");

  SystemParams p;
  p.omega_s = seen["omega_s"];
  p.L1 = seen["L1"];
  p.L2 = seen["L2"];
  p.C1 = seen["C1"];
  p.C2 = seen["C2"];
  p.R1 = seen["R1"];
  p.R2 = seen["R2"];
  p.M = seen["M"];
  p.Cf = seen["Cf"];
  p.RL = seen["RL"];
  p.V1 = seen["V1"];
  validate(p);
  return p;
}

inline SystemParams load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file '" + path + "'");
  return parse_config(in);
}

}  // namespace wpt
