#include "stormlog/time.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

#include "stormlog/value.hpp"

namespace stormlog {

std::string_view to_string(LogLevel level) {
  switch (level) {
    case LogLevel::Fatal: return "FATAL";
    case LogLevel::Error: return "ERROR";
    case LogLevel::Warn: return "WARN";
    case LogLevel::Warning: return "WARNING";
    case LogLevel::Info: return "INFO";
    case LogLevel::Debug: return "DEBUG";
  }
  return "INFO";
}

std::optional<LogLevel> parse_log_level(std::string_view text) {
  if (text == "FATAL") return LogLevel::Fatal;
  if (text == "ERROR") return LogLevel::Error;
  if (text == "WARN") return LogLevel::Warn;
  if (text == "WARNING") return LogLevel::Warning;
  if (text == "INFO") return LogLevel::Info;
  if (text == "DEBUG") return LogLevel::Debug;
  return std::nullopt;
}

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed);
  if (res.ec != std::errc{}) {
    res = std::to_chars(buf, buf + sizeof(buf), value);
  }
  std::string out(buf, res.ptr);
  if (out.find_first_of(".eEn") == std::string::npos) out += ".0";
  return out;
}

std::string to_key_string(const FieldValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&v)) return format_double(*d);
  const auto& g = std::get<GeoPoint>(v);
  return format_double(g.lat) + "," + format_double(g.lon);
}

namespace time {
namespace {

bool read_digits(std::string_view text, std::size_t pos, std::size_t count, int& out) {
  if (pos + count > text.size()) return false;
  int value = 0;
  for (std::size_t i = 0; i < count; ++i) {
    char c = text[pos + i];
    if (c < '0' || c > '9') return false;
    value = value * 10 + (c - '0');
  }
  out = value;
  return true;
}

bool valid_date(int y, int m, int d) {
  using namespace std::chrono;
  return year_month_day{year{y}, month{static_cast<unsigned>(m)},
                        day{static_cast<unsigned>(d)}}
      .ok();
}

}  // namespace

std::int64_t from_civil(int y, unsigned m, unsigned d) {
  using namespace std::chrono;
  sys_days days{year{y} / month{m} / day{d}};
  return static_cast<std::int64_t>(days.time_since_epoch().count()) * kMillisPerDay;
}

std::optional<std::int64_t> parse_date(std::string_view text) {
  int y, m, d;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  if (!read_digits(text, 0, 4, y) || !read_digits(text, 5, 2, m) ||
      !read_digits(text, 8, 2, d) || !valid_date(y, m, d)) {
    return std::nullopt;
  }
  return from_civil(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
}

std::optional<std::int64_t> parse_time_of_day(std::string_view text) {
  int h, mi, s, ms;
  if (text.size() != 12 || text[2] != ':' || text[5] != ':' || text[8] != '.') {
    return std::nullopt;
  }
  if (!read_digits(text, 0, 2, h) || !read_digits(text, 3, 2, mi) ||
      !read_digits(text, 6, 2, s) || !read_digits(text, 9, 3, ms)) {
    return std::nullopt;
  }
  if (h > 23 || mi > 59 || s > 59) return std::nullopt;
  return ((h * 60LL + mi) * 60LL + s) * 1000LL + ms;
}

std::optional<std::int64_t> parse_iso8601(std::string_view text) {
  if (text.size() < 19) return std::nullopt;
  auto day = parse_date(text.substr(0, 10));
  if (!day || (text[10] != 'T' && text[10] != ' ')) return std::nullopt;
  int h, mi, s;
  if (text[13] != ':' || text[16] != ':' || !read_digits(text, 11, 2, h) ||
      !read_digits(text, 14, 2, mi) || !read_digits(text, 17, 2, s) || h > 23 ||
      mi > 59 || s > 60) {
    return std::nullopt;
  }
  std::int64_t ms = 0;
  std::size_t pos = 19;
  if (pos < text.size() && (text[pos] == '.' || text[pos] == ',')) {
    ++pos;
    std::size_t digits = 0;
    std::int64_t scale = 100;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      ms += (text[pos] - '0') * scale;
      scale /= 10;
      ++pos;
      ++digits;
    }
    if (digits == 0) return std::nullopt;
  }
  std::int64_t offset_ms = 0;
  if (pos < text.size()) {
    char z = text[pos];
    if (z == 'Z') {
      ++pos;
    } else if (z == '+' || z == '-') {
      int oh, om;
      if (!read_digits(text, pos + 1, 2, oh)) return std::nullopt;
      std::size_t mpos = pos + 3;
      if (mpos < text.size() && text[mpos] == ':') ++mpos;
      if (!read_digits(text, mpos, 2, om) || oh > 23 || om > 59) return std::nullopt;
      offset_ms = (oh * 60LL + om) * kMillisPerMinute * (z == '+' ? 1 : -1);
      pos = mpos + 2;
    } else {
      return std::nullopt;
    }
  }
  if (pos != text.size()) return std::nullopt;
  return *day + ((h * 60LL + mi) * 60LL + s) * 1000LL + ms - offset_ms;
}

std::string format_date(std::int64_t epoch_ms) {
  using namespace std::chrono;
  year_month_day ymd{sys_days{days{floor_div(epoch_ms, kMillisPerDay)}}};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string format_date_dotted(std::int64_t epoch_ms) {
  std::string s = format_date(epoch_ms);
  s[4] = '.';
  s[7] = '.';
  return s;
}

std::string format_time_of_day(std::int64_t epoch_ms) {
  std::int64_t t = epoch_ms - day_start(epoch_ms);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02d:%02d:%02d.%03d",
                static_cast<int>(t / kMillisPerHour),
                static_cast<int>(t / kMillisPerMinute % 60),
                static_cast<int>(t / kMillisPerSecond % 60),
                static_cast<int>(t % 1000));
  return buf;
}

std::string format_iso8601(std::int64_t epoch_ms) {
  return format_date(epoch_ms) + "T" + format_time_of_day(epoch_ms) + "Z";
}

std::optional<std::int64_t> parse_instant(std::string_view text) {
  if (auto t = parse_iso8601(text)) return t;
  if (auto d = parse_date(text)) return d;
  std::int64_t v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec == std::errc{} && res.ptr == text.data() + text.size() && !text.empty()) {
    return v;
  }
  return std::nullopt;
}

}  // namespace time
}  // namespace stormlog
