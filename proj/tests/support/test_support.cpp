#include "test_support.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "stormlog/time.hpp"

namespace stormlog::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  std::string tmpl = (fs::temp_directory_path() / "stormlog-test-XXXXXX").string();
  if (mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void append_file(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("cannot append to " + path.string());
}

namespace {

using storm::LogKind;

std::int64_t uniform_int(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

double uniform_real(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

bool coin(std::mt19937_64& rng, double p = 0.5) {
  return std::bernoulli_distribution(p)(rng);
}

template <typename T, std::size_t N>
const T& pick(std::mt19937_64& rng, const std::array<T, N>& items) {
  return items[static_cast<std::size_t>(uniform_int(rng, 0, N - 1))];
}

// Printable ASCII minus the characters in `forbidden`.
std::string random_text(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len,
                        std::string_view forbidden) {
  auto len = static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(min_len),
                                                  static_cast<std::int64_t>(max_len)));
  std::string out;
  while (out.size() < len) {
    char c = static_cast<char>(uniform_int(rng, 0x20, 0x7e));
    if (forbidden.find(c) == std::string_view::npos) out += c;
  }
  return out;
}

std::string random_identifier(std::mt19937_64& rng) {
  static constexpr std::string_view kChars =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.";
  auto len = uniform_int(rng, 1, 24);
  std::string out;
  for (std::int64_t i = 0; i < len; ++i) {
    out += kChars[static_cast<std::size_t>(uniform_int(rng, 0, kChars.size() - 1))];
  }
  return out;
}

std::string random_operation(std::mt19937_64& rng) {
  static const std::array<std::string, 8> kOps = {
      "srmLs",          "srmPing",          "srmPrepareToGet", "srmStatusOfGetRequest",
      "srmReleaseFiles", "srmPrepareToPut", "synch.ls",        "Connection"};
  return coin(rng, 0.7) ? pick(rng, kOps) : random_identifier(rng);
}

std::string random_ip(std::mt19937_64& rng) {
  if (coin(rng, 0.1)) {
    static const std::array<std::string, 4> kV6 = {"::1", "2001:db8::7", "fe80::1:2",
                                                   "2001:760:4200::42"};
    return pick(rng, kV6);
  }
  return std::to_string(uniform_int(rng, 0, 255)) + "." + std::to_string(uniform_int(rng, 0, 255)) +
         "." + std::to_string(uniform_int(rng, 0, 255)) + "." +
         std::to_string(uniform_int(rng, 0, 255));
}

std::vector<std::string> random_list(std::mt19937_64& rng, std::string_view forbidden,
                                     int max_items) {
  std::vector<std::string> out(static_cast<std::size_t>(uniform_int(rng, 0, max_items)));
  for (auto& s : out) s = random_text(rng, 1, 30, forbidden);
  return out;
}

// A duration with a random number of decimals, so renderings vary in length.
double random_millis(std::mt19937_64& rng, double hi = 1e6) {
  double v = uniform_real(rng, 0.0, hi);
  switch (uniform_int(rng, 0, 3)) {
    case 0:
      return std::floor(v);
    case 1:
      return std::round(v * 10) / 10;
    case 2:
      return std::round(v * 1000) / 1000;
    default:
      return v;
  }
}

std::int64_t random_instant(std::mt19937_64& rng) {
  return uniform_int(rng, time::from_civil(2000, 1, 1), time::from_civil(2040, 1, 1));
}

storm::RoundStats random_round(std::mt19937_64& rng) {
  storm::RoundStats r;
  r.performed = uniform_int(rng, 0, 1'000'000);
  r.success = uniform_int(rng, 0, r.performed);
  r.failed = uniform_int(rng, 0, r.performed - r.success);
  r.errored = uniform_int(rng, 0, r.performed - r.success - r.failed);
  std::array<double, 3> v = {random_millis(rng), random_millis(rng), random_millis(rng)};
  std::sort(v.begin(), v.end());
  r.min_ms = v[0];
  r.avg_ms = v[1];
  r.max_ms = v[2];
  return r;
}

storm::BunchStats random_bunch(std::mt19937_64& rng) {
  storm::BunchStats b;
  b.count = uniform_int(rng, 0, 100'000);
  b.ok = uniform_int(rng, 0, b.count);
  b.mean_duration_ms = random_millis(rng, 1e5);
  return b;
}

}  // namespace

storm::Event random_event(storm::LogKind kind, std::mt19937_64& rng) {
  switch (kind) {
    case LogKind::FrontendServer: {
      static const std::array<LogLevel, 4> kLevels = {LogLevel::Error, LogLevel::Warning,
                                                      LogLevel::Info, LogLevel::Debug};
      storm::FrontendEvent e;
      e.timestamp = random_instant(rng);
      e.level = pick(rng, kLevels);
      e.request_id = random_text(rng, 1, 36, " '[]\t");
      e.operation = random_operation(rng);
      e.client_ip = random_ip(rng);
      e.user_dn = random_text(rng, 0, 80, "'");
      e.fqans = random_list(rng, "',", 3);
      if (coin(rng)) e.surl = random_text(rng, 0, 90, "'");
      e.message = random_text(rng, 0, 60, "'");
      return e;
    }
    case LogKind::Monitoring: {
      storm::MonitoringEvent e;
      e.timestamp = random_instant(rng);
      e.round_seconds = uniform_int(rng, 1, 3600);
      e.sync = random_round(rng);
      e.async = random_round(rng);
      e.aggregate_sync = random_round(rng);
      e.aggregate_async = random_round(rng);
      return e;
    }
    case LogKind::Backend: {
      static const std::array<LogLevel, 5> kLevels = {LogLevel::Fatal, LogLevel::Error,
                                                      LogLevel::Info, LogLevel::Warn,
                                                      LogLevel::Debug};
      storm::BackendEvent e;
      e.timestamp = random_instant(rng);
      e.level = pick(rng, kLevels);
      e.request_id = random_text(rng, 1, 36, " '[]\t");
      e.operation = random_operation(rng);
      if (coin(rng, 0.8)) e.user_dn = random_text(rng, 0, 80, "'");
      e.surls = random_list(rng, "';", 4);
      e.result = random_text(rng, 1, 24, " '\t");
      return e;
    }
    case LogKind::Heartbeat: {
      storm::HeartbeatEvent e;
      e.timestamp = random_instant(rng);
      e.seq = uniform_int(rng, 0, 10'000'000);
      e.lifetime_seconds = uniform_int(rng, 0, 100'000'000);
      e.heap_free_bytes = uniform_int(rng, 0, std::int64_t{1} << 40);
      e.synch_last_beat = uniform_int(rng, 0, 100'000);
      e.ptg_total = uniform_int(rng, 0, 1'000'000'000);
      e.ptp_total = uniform_int(rng, 0, 1'000'000'000);
      e.ptg_last = random_bunch(rng);
      e.ptp_last = random_bunch(rng);
      return e;
    }
    case LogKind::BackendMetrics: {
      storm::BackendMetricsEvent e;
      e.timestamp = random_instant(rng);
      e.operation = random_operation(rng);
      e.total_count = uniform_int(rng, 0, 1'000'000'000);
      e.m1_count = uniform_int(rng, 0, e.total_count);
      std::array<double, 5> v{};
      for (auto& x : v) x = random_millis(rng);
      std::sort(v.begin(), v.end());
      e.min_ms = v[0];
      e.max_ms = v[4];
      e.mean_ms = v[static_cast<std::size_t>(uniform_int(rng, 1, 3))];
      e.p95_ms = v[2];
      e.p99_ms = v[3];
      return e;
    }
  }
  throw std::logic_error("unreachable");
}

// ---------------------------------------------------------------------------
// Random documents and queries

namespace {

const std::array<std::string, 4> kStatuses = {"INFO", "WARN", "ERROR", "DEBUG"};
const std::array<std::string, 8> kActions = {
    "srmLs",           "Connection",      "srmStatusOfGetRequest", "srmStatusOfPutRequest",
    "srmPrepareToGet", "srmPrepareToPut", "srmReleaseFiles",       "srmPing"};
const std::array<std::string, 12> kWords = {"request", "Ready",   "failed",  "SURL",
                                            "storage", "timeout", "token",   "GPFS",
                                            "tape",    "space",   "granted", "a1b2"};
const std::array<std::string, 5> kSeparators = {" ", ", ", ": ", "/", "-"};

std::int64_t corpus_start() { return time::from_civil(2019, 6, 25); }

}  // namespace

std::vector<Document> random_documents(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Document> docs;
  docs.reserve(count);
  const std::int64_t start = corpus_start();
  for (std::size_t i = 0; i < count; ++i) {
    Document d;
    std::int64_t ts = start + uniform_int(rng, 0, 3 * time::kMillisPerDay - 1);
    // Ties on @timestamp exercise the id tie-break.
    if (coin(rng, 0.05)) ts = time::floor_to(ts, time::kMillisPerHour);
    std::string kind = coin(rng, 0.6) ? "frontend" : "backend";
    d.id = "doc-" + std::to_string(uniform_int(rng, 0, 999)) + "-" + std::to_string(i);
    d.index_name = "storm-" + kind + "-" + time::format_date_dotted(ts);
    d.fields["@timestamp"] = ts;
    d.fields["kind"] = kind;
    d.fields["status"] = pick(rng, kStatuses);
    d.fields["action"] = pick(rng, kActions);
    std::string msg;
    for (auto n = uniform_int(rng, 1, 6); n > 0; --n) {
      if (!msg.empty()) msg += pick(rng, kSeparators);
      msg += pick(rng, kWords);
    }
    d.fields["message"] = msg;
    if (coin(rng, 0.8)) d.fields["latency_ms"] = static_cast<double>(uniform_int(rng, 0, 400)) / 2;
    if (coin(rng, 0.9)) d.fields["count"] = uniform_int(rng, 0, 20);
    if (coin(rng, 0.5)) {
      d.fields["geo"] = GeoPoint{uniform_real(rng, -60.0, 70.0), uniform_real(rng, -180.0, 180.0)};
    }
    docs.push_back(std::move(d));
  }
  return docs;
}

index::Query random_query(std::mt19937_64& rng, int depth) {
  using index::Query;
  if (depth > 0 && coin(rng, 0.6)) {
    std::vector<Query> children(static_cast<std::size_t>(uniform_int(rng, 0, 3)));
    for (auto& c : children) c = random_query(rng, depth - 1);
    switch (uniform_int(rng, 0, 2)) {
      case 0:
        return Query::all_of(std::move(children));
      case 1:
        return Query::any_of(std::move(children));
      default:
        return Query::negate(random_query(rng, depth - 1));
    }
  }
  const std::int64_t start = corpus_start();
  switch (uniform_int(rng, 0, 9)) {
    case 0:
      return Query::match_all();
    case 1:
      return Query::term("status", pick(rng, kStatuses));
    case 2:
      return Query::term("action", pick(rng, kActions));
    case 3: {
      // Text terms match case-insensitively.
      std::string w = pick(rng, kWords);
      if (coin(rng)) {
        for (auto& c : w) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      }
      return Query::term("message", w);
    }
    case 4:
      return Query::term("latency_ms", static_cast<double>(uniform_int(rng, 0, 400)) / 2);
    case 5:
      return Query::term("count", uniform_int(rng, 0, 20));
    case 6:
      return coin(rng) ? Query::term("no_such_field", std::string("x"))
                       : Query::term("status", std::string("info"));
    case 7: {
      auto a = start + uniform_int(rng, 0, 3 * time::kMillisPerDay);
      auto b = start + uniform_int(rng, 0, 3 * time::kMillisPerDay);
      if (a > b) std::swap(a, b);
      return Query::range("@timestamp", coin(rng, 0.8) ? std::optional<double>(a) : std::nullopt,
                          coin(rng, 0.8) ? std::optional<double>(b) : std::nullopt, coin(rng),
                          coin(rng));
    }
    case 8: {
      double a = static_cast<double>(uniform_int(rng, 0, 400)) / 2;
      double b = static_cast<double>(uniform_int(rng, 0, 400)) / 2;
      if (a > b) std::swap(a, b);
      return Query::range("latency_ms", a, b, coin(rng), coin(rng));
    }
    default: {
      double a = static_cast<double>(uniform_int(rng, 0, 20));
      return Query::range("count", a, std::nullopt, coin(rng), false);
    }
  }
}

namespace {

std::vector<std::string> lowercase_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

bool numeric_value(const FieldValue& v, double& out) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) {
    out = static_cast<double>(*i);
    return true;
  }
  if (const auto* d = std::get_if<double>(&v)) {
    out = *d;
    return true;
  }
  return false;
}

}  // namespace

bool oracle_matches(const Document& doc, const index::Query& q,
                    const index::StoreOptions& options) {
  using Kind = index::Query::Kind;
  switch (q.kind) {
    case Kind::MatchAll:
      return true;
    case Kind::And:
      return std::all_of(q.children.begin(), q.children.end(),
                         [&](const auto& c) { return oracle_matches(doc, c, options); });
    case Kind::Or:
      return std::any_of(q.children.begin(), q.children.end(),
                         [&](const auto& c) { return oracle_matches(doc, c, options); });
    case Kind::Not:
      return q.children.empty() || !oracle_matches(doc, q.children[0], options);
    case Kind::Term: {
      if (q.field == "id" && std::holds_alternative<std::string>(q.value)) {
        return doc.id == std::get<std::string>(q.value);
      }
      auto it = doc.fields.find(q.field);
      if (it == doc.fields.end()) return false;
      double want = 0, have = 0;
      if (numeric_value(q.value, want)) return numeric_value(it->second, have) && have == want;
      const auto* s = std::get_if<std::string>(&q.value);
      const auto* text = std::get_if<std::string>(&it->second);
      if (s == nullptr || text == nullptr) return false;
      if (options.keyword_fields.count(q.field) > 0) return *s == *text;
      std::string lowered;
      for (char c : *s) lowered += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      auto toks = lowercase_tokens(*text);
      return std::find(toks.begin(), toks.end(), lowered) != toks.end();
    }
    case Kind::Range: {
      auto it = doc.fields.find(q.field);
      double v = 0;
      if (it == doc.fields.end() || !numeric_value(it->second, v)) return false;
      if (q.min && (v < *q.min || (!q.include_min && v == *q.min))) return false;
      if (q.max && (v > *q.max || (!q.include_max && v == *q.max))) return false;
      return true;
    }
  }
  return false;
}

std::vector<Document> oracle_search(const std::vector<Document>& docs,
                                    std::string_view index_pattern, const index::Query& query,
                                    const index::TimeRange& range) {
  auto pattern_ok = [&](const std::string& name) {
    if (!index_pattern.empty() && index_pattern.back() == '*') {
      return name.compare(0, index_pattern.size() - 1, index_pattern, 0,
                          index_pattern.size() - 1) == 0;
    }
    return name == index_pattern;
  };
  std::vector<Document> out;
  for (const auto& d : docs) {
    auto ts = std::get<std::int64_t>(d.fields.at("@timestamp"));
    if (range.from && ts < *range.from) continue;
    if (range.to && ts >= *range.to) continue;
    if (!pattern_ok(d.index_name) || !oracle_matches(d, query)) continue;
    out.push_back(d);
  }
  std::sort(out.begin(), out.end(), [](const Document& a, const Document& b) {
    auto ta = std::get<std::int64_t>(a.fields.at("@timestamp"));
    auto tb = std::get<std::int64_t>(b.fields.at("@timestamp"));
    return ta != tb ? ta < tb : a.id < b.id;
  });
  return out;
}

std::vector<index::TermsBucket> oracle_terms(const std::vector<Document>& hits,
                                             const std::string& field, std::size_t top_n) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& d : hits) {
    auto it = d.fields.find(field);
    if (it != d.fields.end()) ++counts[to_key_string(it->second)];
  }
  std::vector<index::TermsBucket> out;
  for (const auto& [k, c] : counts) out.push_back({k, c});
  // Map order is key-ascending, so a stable count sort leaves ties by key.
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.count > b.count; });
  if (out.size() > top_n) out.resize(top_n);
  return out;
}

std::vector<index::HistogramBucket> oracle_histogram(const std::vector<Document>& hits,
                                                     std::int64_t interval_ms) {
  std::map<std::int64_t, std::uint64_t> buckets;
  for (const auto& d : hits) {
    auto ts = std::get<std::int64_t>(d.fields.at("@timestamp"));
    auto q = ts / interval_ms;
    if (ts % interval_ms < 0) --q;
    ++buckets[q * interval_ms];
  }
  std::vector<index::HistogramBucket> out;
  for (const auto& [k, c] : buckets) out.push_back({k, c});
  return out;
}

index::StatsResult oracle_stats(const std::vector<Document>& hits, const std::string& field) {
  std::vector<double> xs;
  for (const auto& d : hits) {
    auto it = d.fields.find(field);
    double v = 0;
    if (it != d.fields.end() && numeric_value(it->second, v)) xs.push_back(v);
  }
  index::StatsResult r;
  r.count = xs.size();
  if (xs.empty()) return r;
  r.min = *std::min_element(xs.begin(), xs.end());
  r.max = *std::max_element(xs.begin(), xs.end());
  for (double x : xs) r.sum += x;  // hit order, as documented
  r.mean = r.sum / static_cast<double>(r.count);
  return r;
}

std::vector<index::GeoCell> oracle_geo_grid(const std::vector<Document>& hits,
                                            const std::string& field, double cell_degrees) {
  std::map<std::pair<std::int64_t, std::int64_t>, std::uint64_t> cells;
  for (const auto& d : hits) {
    auto it = d.fields.find(field);
    if (it == d.fields.end()) continue;
    const auto* p = std::get_if<GeoPoint>(&it->second);
    if (p == nullptr) continue;
    ++cells[{static_cast<std::int64_t>(std::floor(p->lat / cell_degrees)),
             static_cast<std::int64_t>(std::floor(p->lon / cell_degrees))}];
  }
  std::vector<index::GeoCell> out;
  for (const auto& [key, count] : cells) {
    index::GeoCell c;
    c.lat_index = key.first;
    c.lon_index = key.second;
    c.lat_min = static_cast<double>(key.first) * cell_degrees;
    c.lon_min = static_cast<double>(key.second) * cell_degrees;
    c.lat_center = c.lat_min + cell_degrees / 2;
    c.lon_center = c.lon_min + cell_degrees / 2;
    c.count = count;
    out.push_back(c);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.count > b.count; });
  return out;
}

namespace {
constexpr TailRow kTailTable[] = {
#include "erfc_table.inc"
};
}  // namespace

std::span<const TailRow> normal_tail_table() { return kTailTable; }

}  // namespace stormlog::testing
