#pragma once

#include <cmath>
#include <cstdio>
#include <string>

#include <json.hpp>

namespace tubelink::io {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;
inline constexpr int kFloatDigits = 6;

/// Fixed 6-decimal rendering. printf rounds the exact binary value to nearest,
/// ties to even, so output does not depend on the platform.
inline std::string format_fixed(double v, int digits = kFloatDigits) {
  if (!std::isfinite(v)) return "null";
  if (v == 0.0) v = 0.0;  // drop negative zero
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s(buf);
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

/// Value as it reads back after a 6-decimal write.
inline double quantize(double v) { return std::stod(format_fixed(v)); }

namespace detail {

inline bool is_scalar(const Json& j) { return !j.is_array() && !j.is_object(); }

inline bool is_flat_array(const Json& j) {
  if (!j.is_array()) return false;
  for (const auto& e : j)
    if (!is_scalar(e)) return false;
  return true;
}

inline void dump_to(const Json& j, std::string& out, int indent, int depth) {
  const bool pretty = indent > 0;
  auto newline = [&](int d) {
    if (!pretty) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case Json::value_t::number_float: out += format_fixed(j.get<double>()); return;
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += Json(it.key()).dump();
        out += pretty ? ": " : ":";
        dump_to(it.value(), out, indent, depth + 1);
      }
      newline(depth);
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      const bool inline_array = !pretty || is_flat_array(j);
      out += '[';
      bool first = true;
      for (const auto& e : j) {
        if (!first) out += inline_array && pretty ? ", " : ",";
        first = false;
        if (!inline_array) newline(depth + 1);
        dump_to(e, out, indent, depth + 1);
      }
      if (!inline_array) newline(depth);
      out += ']';
      return;
    }
    default: out += j.dump(); return;
  }
}

}  // namespace detail

/// Serializes with fixed-precision floats; indent 0 gives a single line.
inline std::string dump(const Json& j, int indent = 0) {
  std::string out;
  detail::dump_to(j, out, indent, 0);
  return out;
}

}  // namespace tubelink::io
