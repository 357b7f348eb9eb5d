#include "stormlog/storm_codecs.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include "stormlog/pattern_engine.hpp"
#include "stormlog/time.hpp"

namespace stormlog::storm {
namespace {

constexpr double kMaxMillis = 1e12;

// Sequential reader over one line. Every failure throws GrammarMismatch.
class Cursor {
 public:
  explicit Cursor(std::string_view line) : line_(line), rest_(line) {}

  [[noreturn]] void fail(const std::string& reason) const {
    throw LineParseError(LineParseError::Code::GrammarMismatch, std::string(line_),
                         reason + " at column " + std::to_string(column()));
  }

  std::size_t column() const { return line_.size() - rest_.size() + 1; }
  bool done() const { return rest_.empty(); }

  void expect(std::string_view literal) {
    if (!rest_.starts_with(literal)) fail("expected '" + std::string(literal) + "'");
    rest_.remove_prefix(literal.size());
  }

  bool accept(std::string_view literal) {
    if (!rest_.starts_with(literal)) return false;
    rest_.remove_prefix(literal.size());
    return true;
  }

  std::string_view take(std::size_t n) {
    if (rest_.size() < n) fail("line truncated");
    auto out = rest_.substr(0, n);
    rest_.remove_prefix(n);
    return out;
  }

  // Everything up to (not including) the next occurrence of `stop`.
  std::string_view until(char stop) {
    auto p = rest_.find(stop);
    if (p == std::string_view::npos) fail(std::string("missing '") + stop + "'");
    auto out = rest_.substr(0, p);
    rest_.remove_prefix(p);
    return out;
  }

  std::string_view upper_word() {
    std::size_t n = 0;
    while (n < rest_.size() && rest_[n] >= 'A' && rest_[n] <= 'Z') ++n;
    if (n == 0) fail("expected log level");
    return take(n);
  }

  std::string_view token() {
    std::size_t n = 0;
    while (n < rest_.size() && rest_[n] != ' ') ++n;
    if (n == 0) fail("expected token");
    return take(n);
  }

  std::int64_t integer() {
    std::int64_t v = 0;
    auto res = std::from_chars(rest_.data(), rest_.data() + rest_.size(), v);
    if (res.ec != std::errc{} || v < 0 || rest_.front() == '-') fail("expected integer");
    rest_.remove_prefix(static_cast<std::size_t>(res.ptr - rest_.data()));
    return v;
  }

  double decimal() {
    // digits '.' digits
    std::size_t n = 0;
    while (n < rest_.size() && std::isdigit(static_cast<unsigned char>(rest_[n]))) ++n;
    if (n == 0 || n >= rest_.size() || rest_[n] != '.') fail("expected decimal");
    ++n;
    std::size_t frac = n;
    while (n < rest_.size() && std::isdigit(static_cast<unsigned char>(rest_[n]))) ++n;
    if (n == frac) fail("expected decimal");
    double v = 0;
    auto res = std::from_chars(rest_.data(), rest_.data() + n, v);
    if (res.ec != std::errc{}) fail("expected decimal");
    rest_.remove_prefix(n);
    return v;
  }

  std::string_view quoted() {
    expect("'");
    auto body = until('\'');
    expect("'");
    return body;
  }

 private:
  std::string_view line_;
  std::string_view rest_;
};

[[noreturn]] void range_error(std::string_view line, const std::string& reason) {
  throw LineParseError(LineParseError::Code::FieldRange, std::string(line), reason);
}

bool frontend_level(LogLevel l) {
  return l == LogLevel::Error || l == LogLevel::Warning || l == LogLevel::Info ||
         l == LogLevel::Debug;
}

bool backend_level(LogLevel l) {
  return l == LogLevel::Fatal || l == LogLevel::Error || l == LogLevel::Info ||
         l == LogLevel::Warn || l == LogLevel::Debug;
}

bool valid_millis(double v) { return std::isfinite(v) && v >= 0.0 && v < kMaxMillis; }

bool quotable(std::string_view s) {
  return s.find_first_of("'\n\r") == std::string_view::npos;
}

bool valid_token(std::string_view s, std::string_view forbidden = "") {
  if (s.empty()) return false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\'' ||
        forbidden.find(c) != std::string_view::npos) {
      return false;
    }
  }
  return true;
}

bool valid_operation(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
           return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
         });
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::size_t pos = 0;
  while (true) {
    auto p = s.find(sep, pos);
    out.emplace_back(s.substr(pos, p == std::string_view::npos ? s.npos : p - pos));
    if (p == std::string_view::npos) break;
    pos = p + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// Returns a description of the first violated constraint, or empty.
std::string check_round(const RoundStats& r, std::string_view name) {
  std::string n(name);
  if (r.performed < 0 || r.success < 0 || r.failed < 0 || r.errored < 0) {
    return n + ": negative count";
  }
  if (r.success + r.failed + r.errored > r.performed) {
    return n + ": success + failed + errored exceeds performed";
  }
  if (!valid_millis(r.avg_ms) || !valid_millis(r.min_ms) || !valid_millis(r.max_ms)) {
    return n + ": duration out of range";
  }
  if (r.performed > 0 && !(r.min_ms <= r.avg_ms && r.avg_ms <= r.max_ms)) {
    return n + ": min <= avg <= max violated";
  }
  return {};
}

std::string check_bunch(const BunchStats& b, std::string_view name) {
  std::string n(name);
  if (b.count < 0 || b.ok < 0) return n + ": negative count";
  if (b.ok > b.count) return n + ": ok exceeds count";
  if (!valid_millis(b.mean_duration_ms)) return n + ": duration out of range";
  return {};
}

std::string check(const FrontendEvent& e) {
  if (!frontend_level(e.level)) return "frontend level must be ERROR, WARNING, INFO or DEBUG";
  if (!valid_token(e.request_id, "[]")) return "invalid request_id";
  if (!valid_operation(e.operation)) return "operation must be a non-empty identifier";
  if (!grok::parse_ip(e.client_ip)) return "client_ip is not an IP address";
  if (!quotable(e.user_dn)) return "user_dn contains a quote or newline";
  for (const auto& f : e.fqans) {
    if (f.empty() || !quotable(f) || f.find(',') != std::string::npos) return "invalid fqan";
  }
  if (e.surl && (!quotable(*e.surl))) return "surl contains a quote or newline";
  if (!quotable(e.message)) return "message contains a quote or newline";
  return {};
}

std::string check(const MonitoringEvent& e) {
  if (e.round_seconds <= 0) return "round_seconds must be positive";
  for (auto msg : {check_round(e.sync, "sync"), check_round(e.async, "async"),
                   check_round(e.aggregate_sync, "aggregate_sync"),
                   check_round(e.aggregate_async, "aggregate_async")}) {
    if (!msg.empty()) return msg;
  }
  return {};
}

std::string check(const BackendEvent& e) {
  if (!backend_level(e.level)) return "backend level must be FATAL, ERROR, INFO, WARN or DEBUG";
  if (!valid_token(e.request_id, "[]")) return "invalid request_id";
  if (!valid_operation(e.operation)) return "operation must be a non-empty identifier";
  if (e.user_dn && !quotable(*e.user_dn)) return "user_dn contains a quote or newline";
  for (const auto& s : e.surls) {
    if (s.empty() || !quotable(s) || s.find(';') != std::string::npos) return "invalid surl";
  }
  if (!valid_token(e.result)) return "invalid result";
  return {};
}

std::string check(const HeartbeatEvent& e) {
  if (e.seq < 0 || e.lifetime_seconds < 0 || e.heap_free_bytes < 0 || e.synch_last_beat < 0 ||
      e.ptg_total < 0 || e.ptp_total < 0) {
    return "negative counter";
  }
  if (auto m = check_bunch(e.ptg_last, "ptg_last"); !m.empty()) return m;
  if (auto m = check_bunch(e.ptp_last, "ptp_last"); !m.empty()) return m;
  return {};
}

std::string check(const BackendMetricsEvent& e) {
  if (!valid_operation(e.operation)) return "operation must be a non-empty identifier";
  if (e.m1_count < 0 || e.total_count < 0) return "negative counter";
  if (e.m1_count > e.total_count) return "m1_count exceeds count";
  for (double v : {e.max_ms, e.min_ms, e.mean_ms, e.p95_ms, e.p99_ms}) {
    if (!valid_millis(v)) return "duration out of range";
  }
  if (!(e.min_ms <= e.mean_ms && e.mean_ms <= e.max_ms)) return "min <= mean <= max violated";
  if (!(e.min_ms <= e.p95_ms && e.p95_ms <= e.p99_ms && e.p99_ms <= e.max_ms)) {
    return "min <= p95 <= p99 <= max violated";
  }
  return {};
}

std::string check_time(std::int64_t ts) {
  // Years 0000..9999 render with four digits.
  if (ts < time::from_civil(0, 1, 1) || ts >= time::from_civil(10000, 1, 1)) {
    return "timestamp out of range";
  }
  return {};
}

std::string violation(const Event& event) {
  auto t = check_time(timestamp_of(event));
  if (!t.empty()) return t;
  return std::visit([](const auto& e) { return check(e); }, event);
}

LogLevel read_level(Cursor& c) {
  auto word = c.upper_word();
  auto level = parse_log_level(word);
  if (!level) c.fail("unknown log level '" + std::string(word) + "'");
  return *level;
}

std::int64_t read_iso(Cursor& c) {
  auto text = c.take(24);
  auto t = time::parse_iso8601(text);
  if (!t || text[23] != 'Z') c.fail("expected ISO-8601 timestamp");
  return *t;
}

std::int64_t read_tod(Cursor& c, std::int64_t context_day_ms) {
  auto t = time::parse_time_of_day(c.take(12));
  if (!t) c.fail("expected HH:mm:ss.SSS");
  return context_day_ms + *t;
}

RoundStats read_round(Cursor& c) {
  RoundStats r;
  c.expect("(performed=");
  r.performed = c.integer();
  c.expect(" ok=");
  r.success = c.integer();
  c.expect(" fail=");
  r.failed = c.integer();
  c.expect(" error=");
  r.errored = c.integer();
  c.expect(" avg=");
  r.avg_ms = c.decimal();
  c.expect(" min=");
  r.min_ms = c.decimal();
  c.expect(" max=");
  r.max_ms = c.decimal();
  c.expect(")");
  return r;
}

BunchStats read_bunch(Cursor& c, std::string_view label) {
  BunchStats b;
  c.expect("[#");
  c.expect(label);
  c.expect("=");
  b.count = c.integer();
  c.expect(" OK=");
  b.ok = c.integer();
  c.expect(" M.Dur.=");
  b.mean_duration_ms = c.decimal();
  c.expect("]");
  return b;
}

FrontendEvent parse_frontend(Cursor& c) {
  FrontendEvent e;
  e.timestamp = read_iso(c);
  c.expect(" [");
  e.request_id = std::string(c.until(']'));
  c.expect("] ");
  e.level = read_level(c);
  c.expect(": ");
  e.operation = std::string(c.token());
  c.expect(" client=");
  e.client_ip = std::string(c.token());
  c.expect(" user=");
  e.user_dn = std::string(c.quoted());
  c.expect(" fqans=");
  e.fqans = split(c.quoted(), ',');
  c.expect(" ");
  if (c.accept("surl=")) {
    e.surl = std::string(c.quoted());
    c.expect(" ");
  }
  c.expect("msg=");
  e.message = std::string(c.quoted());
  return e;
}

MonitoringEvent parse_monitoring(Cursor& c) {
  MonitoringEvent e;
  e.timestamp = read_iso(c);
  c.expect(" - round=");
  e.round_seconds = c.integer();
  c.expect("s Synch ");
  e.sync = read_round(c);
  c.expect(" ASynch ");
  e.async = read_round(c);
  c.expect(" AggSynch ");
  e.aggregate_sync = read_round(c);
  c.expect(" AggASynch ");
  e.aggregate_async = read_round(c);
  return e;
}

BackendEvent parse_backend(Cursor& c) {
  BackendEvent e;
  e.timestamp = read_iso(c);
  c.expect(" - ");
  e.level = read_level(c);
  c.expect(" [");
  e.request_id = std::string(c.until(']'));
  c.expect("]: ");
  e.operation = std::string(c.token());
  c.expect(" ");
  if (c.accept("user=")) {
    e.user_dn = std::string(c.quoted());
    c.expect(" ");
  }
  c.expect("surls=");
  e.surls = split(c.quoted(), ';');
  c.expect(" result=");
  e.result = std::string(c.token());
  return e;
}

HeartbeatEvent parse_heartbeat(Cursor& c, std::int64_t day) {
  HeartbeatEvent e;
  e.timestamp = read_tod(c, day);
  c.expect(" - [#");
  e.seq = c.integer();
  c.expect(" lifetime=");
  std::int64_t h = c.integer();
  c.expect(":");
  auto mm = c.take(2);
  c.expect(".");
  auto ss = c.take(2);
  auto two = [&](std::string_view d) {
    if (!std::isdigit(static_cast<unsigned char>(d[0])) ||
        !std::isdigit(static_cast<unsigned char>(d[1]))) {
      c.fail("expected two digits");
    }
    return (d[0] - '0') * 10 + (d[1] - '0');
  };
  int m = two(mm), s = two(ss);
  if (m > 59 || s > 59) c.fail("lifetime minutes/seconds out of range");
  e.lifetime_seconds = h * 3600 + m * 60 + s;
  c.expect("] Heap Free:");
  e.heap_free_bytes = c.integer();
  c.expect(" SYNCH [");
  e.synch_last_beat = c.integer();
  c.expect("] ASynch [PTG:");
  e.ptg_total = c.integer();
  c.expect(" PTP:");
  e.ptp_total = c.integer();
  c.expect("] Last:( ");
  e.ptg_last = read_bunch(c, "PTG");
  c.expect(" ");
  e.ptp_last = read_bunch(c, "PTP");
  c.expect(" )");
  return e;
}

BackendMetricsEvent parse_metrics(Cursor& c, std::int64_t day) {
  BackendMetricsEvent e;
  e.timestamp = read_tod(c, day);
  c.expect(" - ");
  e.operation = std::string(c.token());
  c.expect(" [(m1_count=");
  e.m1_count = c.integer();
  c.expect(", count=");
  e.total_count = c.integer();
  c.expect(") (max=");
  e.max_ms = c.decimal();
  c.expect(", min=");
  e.min_ms = c.decimal();
  c.expect(", mean=");
  e.mean_ms = c.decimal();
  c.expect(", p95=");
  e.p95_ms = c.decimal();
  c.expect(", p99=");
  e.p99_ms = c.decimal();
  c.expect(") duration_units=milliseconds]");
  return e;
}

std::string fmt_round(const RoundStats& r) {
  return "(performed=" + std::to_string(r.performed) + " ok=" + std::to_string(r.success) +
         " fail=" + std::to_string(r.failed) + " error=" + std::to_string(r.errored) +
         " avg=" + format_double(r.avg_ms) + " min=" + format_double(r.min_ms) +
         " max=" + format_double(r.max_ms) + ")";
}

std::string fmt_bunch(const BunchStats& b, std::string_view label) {
  return "[#" + std::string(label) + "=" + std::to_string(b.count) +
         " OK=" + std::to_string(b.ok) + " M.Dur.=" + format_double(b.mean_duration_ms) + "]";
}

std::string two_digits(std::int64_t v) {
  return (v < 10 ? "0" : "") + std::to_string(v);
}

std::string render(const FrontendEvent& e) {
  std::string out = time::format_iso8601(e.timestamp) + " [" + e.request_id + "] " +
                    std::string(to_string(e.level)) + ": " + e.operation +
                    " client=" + e.client_ip + " user='" + e.user_dn + "' fqans='" +
                    join(e.fqans, ',') + "' ";
  if (e.surl) out += "surl='" + *e.surl + "' ";
  out += "msg='" + e.message + "'";
  return out;
}

std::string render(const MonitoringEvent& e) {
  return time::format_iso8601(e.timestamp) + " - round=" + std::to_string(e.round_seconds) +
         "s Synch " + fmt_round(e.sync) + " ASynch " + fmt_round(e.async) + " AggSynch " +
         fmt_round(e.aggregate_sync) + " AggASynch " + fmt_round(e.aggregate_async);
}

std::string render(const BackendEvent& e) {
  std::string out = time::format_iso8601(e.timestamp) + " - " +
                    std::string(to_string(e.level)) + " [" + e.request_id + "]: " +
                    e.operation + " ";
  if (e.user_dn) out += "user='" + *e.user_dn + "' ";
  out += "surls='" + join(e.surls, ';') + "' result=" + e.result;
  return out;
}

std::string render(const HeartbeatEvent& e) {
  std::int64_t h = e.lifetime_seconds / 3600;
  std::int64_t m = e.lifetime_seconds / 60 % 60;
  std::int64_t s = e.lifetime_seconds % 60;
  return time::format_time_of_day(e.timestamp) + " - [#" + std::to_string(e.seq) +
         " lifetime=" + std::to_string(h) + ":" + two_digits(m) + "." + two_digits(s) +
         "] Heap Free:" + std::to_string(e.heap_free_bytes) + " SYNCH [" +
         std::to_string(e.synch_last_beat) + "] ASynch [PTG:" + std::to_string(e.ptg_total) +
         " PTP:" + std::to_string(e.ptp_total) + "] Last:( " + fmt_bunch(e.ptg_last, "PTG") +
         " " + fmt_bunch(e.ptp_last, "PTP") + " )";
}

std::string render(const BackendMetricsEvent& e) {
  return time::format_time_of_day(e.timestamp) + " - " + e.operation +
         " [(m1_count=" + std::to_string(e.m1_count) + ", count=" +
         std::to_string(e.total_count) + ") (max=" + format_double(e.max_ms) +
         ", min=" + format_double(e.min_ms) + ", mean=" + format_double(e.mean_ms) +
         ", p95=" + format_double(e.p95_ms) + ", p99=" + format_double(e.p99_ms) +
         ") duration_units=milliseconds]";
}

void put_round(FieldMap& doc, std::string_view prefix, const RoundStats& r) {
  std::string p(prefix);
  doc[p + "_performed"] = r.performed;
  doc[p + "_success"] = r.success;
  doc[p + "_failed"] = r.failed;
  doc[p + "_errored"] = r.errored;
  doc[p + "_avg_ms"] = r.avg_ms;
  doc[p + "_min_ms"] = r.min_ms;
  doc[p + "_max_ms"] = r.max_ms;
}

void flatten(FieldMap& doc, const FrontendEvent& e) {
  doc["status"] = std::string(to_string(e.level));
  doc["request_id"] = e.request_id;
  doc["action"] = e.operation;
  doc["client_ip"] = e.client_ip;
  doc["user_dn"] = e.user_dn;
  doc["fqans"] = join(e.fqans, ',');
  if (e.surl) doc["surl"] = *e.surl;
  doc["msg"] = e.message;
}

void flatten(FieldMap& doc, const MonitoringEvent& e) {
  doc["round_seconds"] = e.round_seconds;
  put_round(doc, "sync", e.sync);
  put_round(doc, "async", e.async);
  put_round(doc, "agg_sync", e.aggregate_sync);
  put_round(doc, "agg_async", e.aggregate_async);
}

void flatten(FieldMap& doc, const BackendEvent& e) {
  doc["status"] = std::string(to_string(e.level));
  doc["request_id"] = e.request_id;
  doc["action"] = e.operation;
  if (e.user_dn) doc["user_dn"] = *e.user_dn;
  doc["surls"] = join(e.surls, ';');
  doc["result"] = e.result;
}

void flatten(FieldMap& doc, const HeartbeatEvent& e) {
  doc["seq"] = e.seq;
  doc["lifetime_seconds"] = e.lifetime_seconds;
  doc["heap_free_bytes"] = e.heap_free_bytes;
  doc["synch_last_beat"] = e.synch_last_beat;
  doc["ptg_total"] = e.ptg_total;
  doc["ptp_total"] = e.ptp_total;
  doc["ptg_last_count"] = e.ptg_last.count;
  doc["ptg_last_ok"] = e.ptg_last.ok;
  doc["ptg_last_mean_duration_ms"] = e.ptg_last.mean_duration_ms;
  doc["ptp_last_count"] = e.ptp_last.count;
  doc["ptp_last_ok"] = e.ptp_last.ok;
  doc["ptp_last_mean_duration_ms"] = e.ptp_last.mean_duration_ms;
}

void flatten(FieldMap& doc, const BackendMetricsEvent& e) {
  doc["action"] = e.operation;
  doc["m1_count"] = e.m1_count;
  doc["total_count"] = e.total_count;
  doc["max_ms"] = e.max_ms;
  doc["min_ms"] = e.min_ms;
  doc["mean_ms"] = e.mean_ms;
  doc["p95_ms"] = e.p95_ms;
  doc["p99_ms"] = e.p99_ms;
}

constexpr FieldSpec kFrontendSchema[] = {
    {"@timestamp", true}, {"action", true},  {"client_ip", true},  {"fqans", true},
    {"message", true},    {"msg", true},     {"request_id", true}, {"status", true},
    {"surl", false},      {"user_dn", true},
};

constexpr FieldSpec kMonitoringSchema[] = {
    {"@timestamp", true},          {"agg_async_avg_ms", true},   {"agg_async_errored", true},
    {"agg_async_failed", true},    {"agg_async_max_ms", true},   {"agg_async_min_ms", true},
    {"agg_async_performed", true}, {"agg_async_success", true},  {"agg_sync_avg_ms", true},
    {"agg_sync_errored", true},    {"agg_sync_failed", true},    {"agg_sync_max_ms", true},
    {"agg_sync_min_ms", true},     {"agg_sync_performed", true}, {"agg_sync_success", true},
    {"async_avg_ms", true},        {"async_errored", true},      {"async_failed", true},
    {"async_max_ms", true},        {"async_min_ms", true},       {"async_performed", true},
    {"async_success", true},       {"message", true},            {"round_seconds", true},
    {"sync_avg_ms", true},         {"sync_errored", true},       {"sync_failed", true},
    {"sync_max_ms", true},         {"sync_min_ms", true},        {"sync_performed", true},
    {"sync_success", true},
};

constexpr FieldSpec kBackendSchema[] = {
    {"@timestamp", true}, {"action", true}, {"message", true}, {"request_id", true},
    {"result", true},     {"status", true}, {"surls", true},   {"user_dn", false},
};

constexpr FieldSpec kHeartbeatSchema[] = {
    {"@timestamp", true},
    {"heap_free_bytes", true},
    {"lifetime_seconds", true},
    {"message", true},
    {"ptg_last_count", true},
    {"ptg_last_mean_duration_ms", true},
    {"ptg_last_ok", true},
    {"ptg_total", true},
    {"ptp_last_count", true},
    {"ptp_last_mean_duration_ms", true},
    {"ptp_last_ok", true},
    {"ptp_total", true},
    {"seq", true},
    {"synch_last_beat", true},
};

constexpr FieldSpec kMetricsSchema[] = {
    {"@timestamp", true}, {"action", true},  {"m1_count", true}, {"max_ms", true},
    {"mean_ms", true},    {"message", true}, {"min_ms", true},   {"p95_ms", true},
    {"p99_ms", true},     {"total_count", true},
};

}  // namespace

LineParseError::LineParseError(Code code, std::string line, std::string reason)
    : Error((code == Code::GrammarMismatch ? "grammar mismatch: " : "field out of range: ") +
            reason),
      code_(code),
      line_(std::move(line)),
      reason_(std::move(reason)) {}

std::string_view file_name(LogKind kind) {
  switch (kind) {
    case LogKind::FrontendServer: return "storm-frontend-server.log";
    case LogKind::Monitoring: return "monitoring.log";
    case LogKind::Backend: return "storm-backend.log";
    case LogKind::Heartbeat: return "heartbeat.log";
    case LogKind::BackendMetrics: return "storm-backend-metrics.log";
  }
  return {};
}

std::string_view slug(LogKind kind) {
  switch (kind) {
    case LogKind::FrontendServer: return "frontend";
    case LogKind::Monitoring: return "monitoring";
    case LogKind::Backend: return "backend";
    case LogKind::Heartbeat: return "heartbeat";
    case LogKind::BackendMetrics: return "metrics";
  }
  return {};
}

std::optional<LogKind> parse_slug(std::string_view s) {
  for (auto k : kAllKinds) {
    if (slug(k) == s) return k;
  }
  return std::nullopt;
}

bool has_calendar_date(LogKind kind) {
  return kind != LogKind::Heartbeat && kind != LogKind::BackendMetrics;
}

namespace {

std::string_view basename(std::string_view path) {
  auto p = path.find_last_of('/');
  return p == std::string_view::npos ? path : path.substr(p + 1);
}

bool is_date(std::string_view s) { return s.size() == 10 && time::parse_date(s).has_value(); }

bool all_digits(std::string_view s) {
  return !s.empty() &&
         std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// Suffix after a canonical name: any sequence of `.N`, `-YYYY-MM-DD`,
// `.YYYY-MM-DD`, optionally ending in `.gz`.
bool rotation_suffix(std::string_view s, std::optional<std::int64_t>* date) {
  if (s.ends_with(".gz")) s.remove_suffix(3);
  while (!s.empty()) {
    if (s[0] != '.' && s[0] != '-') return false;
    s.remove_prefix(1);
    if (s.size() >= 10 && is_date(s.substr(0, 10)) &&
        (s.size() == 10 || s[10] == '.' || s[10] == '-')) {
      if (date) *date = time::parse_date(s.substr(0, 10));
      s.remove_prefix(10);
      continue;
    }
    std::size_t n = 0;
    while (n < s.size() && s[n] >= '0' && s[n] <= '9') ++n;
    if (!all_digits(s.substr(0, n))) return false;
    s.remove_prefix(n);
  }
  return true;
}

}  // namespace

LogKind classify_file(std::string_view path) {
  auto base = basename(path);
  for (auto k : kAllKinds) {
    auto canonical = file_name(k);
    if (base.starts_with(canonical) &&
        rotation_suffix(base.substr(canonical.size()), nullptr)) {
      return k;
    }
  }
  throw UnknownLogKind("unknown log kind for '" + std::string(path) + "'");
}

std::optional<std::int64_t> rotation_date(std::string_view path) {
  auto base = basename(path);
  for (auto k : kAllKinds) {
    auto canonical = file_name(k);
    std::optional<std::int64_t> date;
    if (base.starts_with(canonical) && rotation_suffix(base.substr(canonical.size()), &date)) {
      return date;
    }
  }
  return std::nullopt;
}

LogKind kind_of(const Event& event) {
  switch (event.index()) {
    case 0: return LogKind::FrontendServer;
    case 1: return LogKind::Monitoring;
    case 2: return LogKind::Backend;
    case 3: return LogKind::Heartbeat;
    default: return LogKind::BackendMetrics;
  }
}

std::int64_t timestamp_of(const Event& event) {
  return std::visit([](const auto& e) { return e.timestamp; }, event);
}

void validate(const Event& event) {
  if (auto v = violation(event); !v.empty()) throw InvariantViolation(v);
}

Event parse_line(LogKind kind, std::string_view line, std::int64_t context_day_ms) {
  Cursor c(line);
  Event event;
  switch (kind) {
    case LogKind::FrontendServer: event = parse_frontend(c); break;
    case LogKind::Monitoring: event = parse_monitoring(c); break;
    case LogKind::Backend: event = parse_backend(c); break;
    case LogKind::Heartbeat: event = parse_heartbeat(c, context_day_ms); break;
    case LogKind::BackendMetrics: event = parse_metrics(c, context_day_ms); break;
  }
  if (!c.done()) c.fail("trailing characters");
  if (auto v = violation(event); !v.empty()) range_error(line, v);
  return event;
}

std::string render_line(const Event& event) {
  validate(event);
  return std::visit([](const auto& e) { return render(e); }, event);
}

std::span<const FieldSpec> document_schema(LogKind kind) {
  switch (kind) {
    case LogKind::FrontendServer: return kFrontendSchema;
    case LogKind::Monitoring: return kMonitoringSchema;
    case LogKind::Backend: return kBackendSchema;
    case LogKind::Heartbeat: return kHeartbeatSchema;
    case LogKind::BackendMetrics: return kMetricsSchema;
  }
  return {};
}

FieldMap event_to_document(const Event& event, std::string_view raw_line) {
  FieldMap doc;
  doc["@timestamp"] = timestamp_of(event);
  doc["message"] = std::string(raw_line);
  std::visit([&](const auto& e) { flatten(doc, e); }, event);
  return doc;
}

}  // namespace stormlog::storm
