#pragma once

#include <cmath>
#include <cstdio>
#include <string>

#include <json.hpp>

#include "polaudit/errors.hpp"

namespace polaudit {

namespace detail {

inline void canonical_dump(const nlohmann::json& j, std::string& out) {
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      out.push_back('{');
      bool first = true;
      // nlohmann::json objects iterate in sorted key order already.
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out.push_back(',');
        first = false;
        out += nlohmann::json(it.key()).dump();
        out.push_back(':');
        canonical_dump(it.value(), out);
      }
      out.push_back('}');
      break;
    }
    case nlohmann::json::value_t::array: {
      out.push_back('[');
      bool first = true;
      for (const auto& el : j) {
        if (!first) out.push_back(',');
        first = false;
        canonical_dump(el, out);
      }
      out.push_back(']');
      break;
    }
    case nlohmann::json::value_t::number_float: {
      double v = j.get<double>();
      if (!std::isfinite(v))
        throw InputError("canonical JSON cannot encode non-finite numbers");
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out += buf;
      break;
    }
    default:
      out += j.dump();
  }
}

}  // namespace detail

// Deterministic encoding: sorted keys, no whitespace, floats at 17
// significant digits. Byte-for-byte stable for hash comparisons.
inline std::string canonical_json(const nlohmann::json& j) {
  std::string out;
  detail::canonical_dump(j, out);
  out.push_back('\n');
  return out;
}

}  // namespace polaudit
