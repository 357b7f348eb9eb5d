#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "stormlog/value.hpp"

// Line grammars for the five StoRM service logs. See docs/formats.md for the
// exact layouts; render_line() and parse_line() are inverses.
namespace stormlog::storm {

enum class LogKind { FrontendServer, Monitoring, Backend, Heartbeat, BackendMetrics };

inline constexpr LogKind kAllKinds[] = {LogKind::FrontendServer, LogKind::Monitoring,
                                        LogKind::Backend, LogKind::Heartbeat,
                                        LogKind::BackendMetrics};

class UnknownLogKind : public Error {
 public:
  using Error::Error;
};

// Canonical file name, e.g. "heartbeat.log".
std::string_view file_name(LogKind kind);
// Short name used in index names and routing: frontend, monitoring, backend,
// heartbeat, metrics.
std::string_view slug(LogKind kind);
std::optional<LogKind> parse_slug(std::string_view slug);

// Heartbeat and backend-metrics lines carry only a time of day.
bool has_calendar_date(LogKind kind);

// Classifies by basename; rotation suffixes (`.1`, `-2019-06-26`,
// `.2019-06-26`, `.gz`) are ignored. Throws UnknownLogKind.
LogKind classify_file(std::string_view path);

// Date (UTC midnight, epoch millis) carried by a `-YYYY-MM-DD` or
// `.YYYY-MM-DD` rotation suffix, if any.
std::optional<std::int64_t> rotation_date(std::string_view path);

struct RoundStats {
  std::int64_t performed = 0;
  std::int64_t success = 0;
  std::int64_t failed = 0;
  std::int64_t errored = 0;
  double avg_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;

  friend bool operator==(const RoundStats&, const RoundStats&) = default;
};

struct BunchStats {
  std::int64_t count = 0;
  std::int64_t ok = 0;
  double mean_duration_ms = 0.0;

  friend bool operator==(const BunchStats&, const BunchStats&) = default;
};

struct FrontendEvent {
  std::int64_t timestamp = 0;
  LogLevel level = LogLevel::Info;
  std::string request_id;
  std::string operation;
  std::string client_ip;
  std::string user_dn;
  std::vector<std::string> fqans;
  std::optional<std::string> surl;
  std::string message;

  friend bool operator==(const FrontendEvent&, const FrontendEvent&) = default;
};

struct MonitoringEvent {
  std::int64_t timestamp = 0;
  std::int64_t round_seconds = 60;
  RoundStats sync;
  RoundStats async;
  RoundStats aggregate_sync;
  RoundStats aggregate_async;

  friend bool operator==(const MonitoringEvent&, const MonitoringEvent&) = default;
};

struct BackendEvent {
  std::int64_t timestamp = 0;
  LogLevel level = LogLevel::Info;
  std::string request_id;
  std::string operation;
  std::optional<std::string> user_dn;
  std::vector<std::string> surls;
  std::string result;

  friend bool operator==(const BackendEvent&, const BackendEvent&) = default;
};

struct HeartbeatEvent {
  std::int64_t timestamp = 0;
  std::int64_t seq = 0;
  std::int64_t lifetime_seconds = 0;
  std::int64_t heap_free_bytes = 0;
  std::int64_t synch_last_beat = 0;
  std::int64_t ptg_total = 0;
  std::int64_t ptp_total = 0;
  BunchStats ptg_last;
  BunchStats ptp_last;

  friend bool operator==(const HeartbeatEvent&, const HeartbeatEvent&) = default;
};

struct BackendMetricsEvent {
  std::int64_t timestamp = 0;
  std::string operation;
  std::int64_t m1_count = 0;
  std::int64_t total_count = 0;
  double max_ms = 0.0;
  double min_ms = 0.0;
  double mean_ms = 0.0;
  double p95_ms = 0.0;
  double p99_ms = 0.0;

  friend bool operator==(const BackendMetricsEvent&, const BackendMetricsEvent&) = default;
};

using Event = std::variant<FrontendEvent, MonitoringEvent, BackendEvent, HeartbeatEvent,
                           BackendMetricsEvent>;

LogKind kind_of(const Event& event);
std::int64_t timestamp_of(const Event& event);

class LineParseError : public Error {
 public:
  enum class Code { GrammarMismatch, FieldRange };

  LineParseError(Code code, std::string line, std::string reason);

  Code code() const noexcept { return code_; }
  const std::string& line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  Code code_;
  std::string line_;
  std::string reason_;
};

class InvariantViolation : public Error {
 public:
  using Error::Error;
};

// Throws InvariantViolation naming the first violated constraint.
void validate(const Event& event);

// `context_day_ms` is the UTC midnight to attach to time-of-day-only lines;
// ignored for kinds whose lines carry a calendar date. Throws LineParseError.
Event parse_line(LogKind kind, std::string_view line, std::int64_t context_day_ms = 0);

// Throws InvariantViolation when the event cannot be rendered faithfully.
std::string render_line(const Event& event);

struct FieldSpec {
  std::string_view name;
  bool required;
};

// Field names produced by event_to_document() for a kind, alphabetically.
std::span<const FieldSpec> document_schema(LogKind kind);

// Flattens an event into indexable fields plus `message` (the raw line) and
// `@timestamp`.
FieldMap event_to_document(const Event& event, std::string_view raw_line);

}  // namespace stormlog::storm
