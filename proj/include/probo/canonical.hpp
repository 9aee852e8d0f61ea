#pragma once

// Canonical byte encoding of structured values. Two values that compare equal
// always encode to the same bytes, so hashes computed by independent parties
// over the same logical content agree.
//
// Rules: object keys in ascending byte order, no whitespace, UTF-8 strings with
// JSON escaping, integers in plain decimal, and non-integral numbers as the
// shortest decimal string that parses back to the same double. Integral
// doubles (|x| < 2^53) are written as integers so that 1 and 1.0 agree.

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>

#include "probo/errors.hpp"
#include "probo/hash.hpp"

namespace probo {

using Json = nlohmann::json;

inline std::string format_decimal(double value) {
  if (!std::isfinite(value)) {
    fail(ErrorKind::NonCanonicalizable, "non-finite number cannot be canonicalized");
  }
  constexpr double kExactIntLimit = 9007199254740992.0;  // 2^53
  if (value == 0.0) return "0";
  if (std::trunc(value) == value && std::fabs(value) < kExactIntLimit) {
    return std::to_string(static_cast<std::int64_t>(value));
  }
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace detail {

inline void append_string(std::string& out, const std::string& s) {
  try {
    out += Json(s).dump();
  } catch (const Json::type_error& e) {
    fail(ErrorKind::NonCanonicalizable, std::string("invalid UTF-8 in string: ") + e.what());
  }
}

inline void append_canonical(std::string& out, const Json& value) {
  switch (value.type()) {
    case Json::value_t::object: {
      out.push_back('{');
      bool first = true;
      // object_t is a std::map, so iteration is already in byte order.
      for (const auto& [key, item] : value.items()) {
        if (!first) out.push_back(',');
        first = false;
        append_string(out, key);
        out.push_back(':');
        append_canonical(out, item);
      }
      out.push_back('}');
      break;
    }
    case Json::value_t::array: {
      out.push_back('[');
      bool first = true;
      for (const auto& item : value) {
        if (!first) out.push_back(',');
        first = false;
        append_canonical(out, item);
      }
      out.push_back(']');
      break;
    }
    case Json::value_t::string:
      append_string(out, value.get_ref<const std::string&>());
      break;
    case Json::value_t::boolean:
      out += value.get<bool>() ? "true" : "false";
      break;
    case Json::value_t::number_integer:
      out += std::to_string(value.get<std::int64_t>());
      break;
    case Json::value_t::number_unsigned:
      out += std::to_string(value.get<std::uint64_t>());
      break;
    case Json::value_t::number_float:
      out += format_decimal(value.get<double>());
      break;
    case Json::value_t::null:
      fail(ErrorKind::NonCanonicalizable, "null has no canonical form");
    case Json::value_t::binary:
    case Json::value_t::discarded:
      fail(ErrorKind::NonCanonicalizable, "unsupported value type");
  }
}

}  // namespace detail

inline std::string canonical_bytes(const Json& value) {
  std::string out;
  detail::append_canonical(out, value);
  return out;
}

inline HashDigest canonical_digest(const Json& value) { return digest(canonical_bytes(value)); }

}  // namespace probo
