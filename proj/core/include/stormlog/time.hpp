#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

// Epoch-millisecond helpers. Everything is UTC.
namespace stormlog::time {

inline constexpr std::int64_t kMillisPerSecond = 1000;
inline constexpr std::int64_t kMillisPerMinute = 60 * kMillisPerSecond;
inline constexpr std::int64_t kMillisPerHour = 60 * kMillisPerMinute;
inline constexpr std::int64_t kMillisPerDay = 24 * kMillisPerHour;

constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

constexpr std::int64_t floor_to(std::int64_t value, std::int64_t step) {
  return floor_div(value, step) * step;
}

constexpr std::int64_t day_start(std::int64_t epoch_ms) {
  return floor_to(epoch_ms, kMillisPerDay);
}

std::int64_t from_civil(int year, unsigned month, unsigned day);

// Accepts `YYYY-MM-DD[T ]HH:MM:SS[.fraction][Z|+HH:MM|+HHMM]`; no zone
// means UTC. Fractions beyond milliseconds are truncated.
std::optional<std::int64_t> parse_iso8601(std::string_view text);

// `YYYY-MM-DDTHH:MM:SS.mmmZ`
std::string format_iso8601(std::int64_t epoch_ms);

// `HH:mm:ss.SSS` to milliseconds since midnight.
std::optional<std::int64_t> parse_time_of_day(std::string_view text);
std::string format_time_of_day(std::int64_t epoch_ms);

// `YYYY-MM-DD` to the epoch millis of that UTC midnight.
std::optional<std::int64_t> parse_date(std::string_view text);
std::string format_date(std::int64_t epoch_ms);         // YYYY-MM-DD
std::string format_date_dotted(std::int64_t epoch_ms);  // YYYY.MM.DD

// Accepts an ISO-8601 timestamp, a bare date, or an integer epoch-millis.
std::optional<std::int64_t> parse_instant(std::string_view text);

}  // namespace stormlog::time
