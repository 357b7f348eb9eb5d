#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

namespace stormlog {

// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LogLevel { Fatal, Error, Warn, Warning, Info, Debug };

std::string_view to_string(LogLevel level);
std::optional<LogLevel> parse_log_level(std::string_view text);

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// A value stored in an indexed document. Timestamps are int64 epoch millis,
/// IP addresses and log levels are carried as text.
using FieldValue = std::variant<std::int64_t, double, std::string, GeoPoint>;

/// Ordered by field name, so documents list their fields alphabetically.
using FieldMap = std::map<std::string, FieldValue, std::less<>>;

inline bool is_numeric(const FieldValue& v) {
  return std::holds_alternative<std::int64_t>(v) ||
         std::holds_alternative<double>(v);
}

inline double as_double(const FieldValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  return std::get<double>(v);
}

/// Shortest decimal text that parses back to the same double. Always
/// contains a decimal point ("150.0", never "150" or "1.5e+02").
std::string format_double(double value);

/// Stable textual form used for term aggregation keys.
std::string to_key_string(const FieldValue& v);

}  // namespace stormlog
