#include "stormlog/loggen.hpp"

#include <fcntl.h>
#include <sys/stat.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "stormlog/embedded_config.hpp"
#include "stormlog/geo.hpp"
#include "stormlog/storm_codecs.hpp"
#include "stormlog/time.hpp"

namespace stormlog::loggen {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
using storm::LogKind;

namespace {

constexpr std::int64_t kMinuteMs = 60'000;
constexpr std::string_view kConnection = "Connection";

struct User {
  std::string dn;
  std::vector<std::string> fqans;
  std::string vo;
  std::string ip;
};

enum class Outcome { Success, Failure, Error };

struct Request {
  std::int64_t done_ms = 0;
  std::uint64_t seq = 0;
  std::size_t op = 0;
  double latency_ms = 0.0;
  Outcome outcome = Outcome::Success;
  std::size_t user = 0;
  std::string request_id;
  std::vector<std::string> surls;
};

struct LaterFirst {
  bool operator()(const Request& a, const Request& b) const {
    return std::tie(a.done_ms, a.seq) > std::tie(b.done_ms, b.seq);
  }
};

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

bool has_surl(std::string_view op) {
  return op != kConnection && op != "srmPing" && op != "srmStatusOfPtG" &&
         op != "srmStatusOfPtP";
}

std::string_view result_code(Outcome o) {
  switch (o) {
    case Outcome::Success: return "SRM_SUCCESS";
    case Outcome::Failure: return "SRM_FAILURE";
    case Outcome::Error: return "SRM_INTERNAL_ERROR";
  }
  return "SRM_SUCCESS";
}

std::string ipv4_text(std::uint32_t v) {
  return std::to_string(v >> 24) + "." + std::to_string((v >> 16) & 255) + "." +
         std::to_string((v >> 8) & 255) + "." + std::to_string(v & 255);
}

std::vector<User> make_users(std::mt19937_64& rng, double private_fraction) {
  static constexpr std::string_view kNames[] = {
      "Mario Rossi",   "Giulia Bianchi", "Luca Ferrari",  "Anna Romano",    "Marco Colombo",
      "Sara Ricci",    "Paolo Marino",   "Elena Greco",   "Andrea Bruno",   "Chiara Gallo",
      "Davide Conti",  "Laura Costa",    "Matteo Giordano", "Francesca Mancini", "Simone Rizzo",
      "Valentina Lombardi", "Stefano Moretti", "Martina Barbieri", "Roberto Fontana",
      "Alessia Santoro", "Jean Dupont",  "Claire Martin", "Hans Weber",     "Emily Clarke"};
  static constexpr std::string_view kVos[] = {"atlas", "cms", "lhcb", "dteam", "virgo"};
  static constexpr std::string_view kCities[] = {"CNAF", "Bologna", "Padova", "Roma",
                                                 "Milano", "Geneva", "Lyon"};
  auto table = geo::GeoTable::from_csv(embedded::kGeoCsv);
  std::vector<User> users;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < std::size(kNames); ++i) {
    User u;
    u.vo = std::string(kVos[i % std::size(kVos)]);
    u.dn = "/C=IT/O=INFN/OU=Personal Certificate/L=" +
           std::string(kCities[i % std::size(kCities)]) + "/CN=" + std::string(kNames[i]);
    u.fqans = {"/" + u.vo + "/Role=NULL/Capability=NULL"};
    if (i % 3 == 0) u.fqans.push_back("/" + u.vo + "/production/Role=NULL/Capability=NULL");
    if (unit(rng) < private_fraction) {
      u.ip = (rng() & 1) ? ipv4_text((10u << 24) | static_cast<std::uint32_t>(rng() & 0xFFFFFE) | 1)
                         : ipv4_text((192u << 24) | (168u << 16) |
                                     static_cast<std::uint32_t>(rng() & 0xFFFE) | 1);
    } else {
      const auto& row = table.rows()[rng() % table.rows().size()];
      std::uint32_t hosts = row.cidr.prefix >= 31 ? 1 : (1u << (32 - row.cidr.prefix)) - 2;
      u.ip = ipv4_text(row.cidr.network + 1 + static_cast<std::uint32_t>(rng() % hosts));
    }
    users.push_back(std::move(u));
  }
  return users;
}

std::string hex_id(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct Samples {
  std::vector<double> values;
  std::int64_t ok = 0;
  std::int64_t failed = 0;
  std::int64_t errored = 0;

  void add(double v, Outcome o) {
    values.push_back(v);
    if (o == Outcome::Success) ++ok;
    if (o == Outcome::Failure) ++failed;
    if (o == Outcome::Error) ++errored;
  }
  std::int64_t count() const { return static_cast<std::int64_t>(values.size()); }
  double sum() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  double mean() const { return values.empty() ? 0.0 : sum() / static_cast<double>(count()); }
};

// Cumulative round statistics.
struct Running {
  std::int64_t performed = 0, ok = 0, failed = 0, errored = 0;
  double sum = 0.0, min = 0.0, max = 0.0;

  void add(const Samples& s) {
    for (double v : s.values) {
      min = performed == 0 ? v : std::min(min, v);
      max = performed == 0 ? v : std::max(max, v);
      sum += v;
      ++performed;
    }
    ok += s.ok;
    failed += s.failed;
    errored += s.errored;
  }
  storm::RoundStats stats() const {
    storm::RoundStats r{performed, ok, failed, errored, 0.0, 0.0, 0.0};
    if (performed > 0) {
      r.avg_ms = std::clamp(round3(sum / static_cast<double>(performed)), min, max);
      r.min_ms = min;
      r.max_ms = max;
    }
    return r;
  }
};

storm::RoundStats round_stats(const Samples& s) {
  Running r;
  r.add(s);
  return r.stats();
}

storm::BackendMetricsEvent metrics_line(std::int64_t ts, std::string name, Samples s,
                                        std::int64_t total) {
  std::sort(s.values.begin(), s.values.end());
  storm::BackendMetricsEvent e;
  e.timestamp = ts;
  e.operation = std::move(name);
  e.m1_count = s.count();
  e.total_count = total;
  e.min_ms = s.values.front();
  e.max_ms = s.values.back();
  e.mean_ms = std::clamp(round3(s.mean()), e.min_ms, e.max_ms);
  e.p95_ms = nearest_rank(s.values, 95);
  e.p99_ms = nearest_rank(s.values, 99);
  return e;
}

std::string affected_metric(const AnomalySpec& a) {
  std::string scope = a.operation.empty() ? "all operations" : a.operation;
  switch (a.kind) {
    case AnomalyKind::LatencyScale: return "mean_ms (" + scope + ")";
    case AnomalyKind::ErrorBurst: return "status count (" + scope + ")";
    case AnomalyKind::RateSpike: return "request count (" + scope + ")";
  }
  return {};
}

void validate(const WorkloadSpec& w, const std::vector<AnomalySpec>& anomalies) {
  if (w.duration_seconds < 1) throw LoggenError("duration must be at least one second");
  if (w.start_ms % 1000 != 0) throw LoggenError("start must be a whole second");
  if (!(w.error_rate >= 0.0 && w.error_rate <= 1.0)) {
    throw LoggenError("error_rate must be in [0, 1]");
  }
  if (!(w.private_ip_fraction >= 0.0 && w.private_ip_fraction <= 1.0)) {
    throw LoggenError("private_ip_fraction must be in [0, 1]");
  }
  if (w.heartbeat_period_seconds < 1 || w.monitoring_round_seconds < 1) {
    throw LoggenError("heartbeat and monitoring periods must be positive");
  }
  for (const auto& [op, rate] : w.op_rates) {
    if (!(rate >= 0.0) || !std::isfinite(rate)) throw LoggenError("negative rate for " + op);
    auto it = w.base_latency_ms.find(op);
    if (it == w.base_latency_ms.end()) throw LoggenError("no latency model for " + op);
    if (!(it->second.mean_ms > 0.0) || !(it->second.stddev_ms >= 0.0)) {
      throw LoggenError("invalid latency model for " + op);
    }
    bool identifier = !op.empty() && std::all_of(op.begin(), op.end(), [](char c) {
      return std::isalnum(static_cast<unsigned char>(c)) != 0;
    });
    if (!identifier) throw LoggenError("operation names must be alphanumeric: " + op);
  }
  for (const auto& a : anomalies) {
    if (a.start_seconds < 0 || a.end_seconds <= a.start_seconds ||
        a.end_seconds > w.duration_seconds) {
      throw LoggenError("anomaly window must lie within the duration");
    }
    if (!(a.magnitude > 0.0)) throw LoggenError("anomaly magnitude must be positive");
    if (!a.operation.empty() && !w.op_rates.contains(a.operation)) {
      throw LoggenError("anomaly names unknown operation " + a.operation);
    }
  }
}

void set_mtime(const std::filesystem::path& path, std::int64_t epoch_ms) {
  struct timespec times[2];
  times[0].tv_sec = times[1].tv_sec = static_cast<time_t>(time::floor_div(epoch_ms, 1000));
  times[0].tv_nsec = times[1].tv_nsec = 0;
  if (::utimensat(AT_FDCWD, path.c_str(), times, 0) != 0) {
    throw LoggenError("cannot set mtime on " + path.string());
  }
}

class Writer {
 public:
  Writer(const std::filesystem::path& dir, LogKind kind)
      : path_(dir / std::string(storm::file_name(kind))), out_(path_, std::ios::binary) {
    if (!out_) throw LoggenError("cannot write " + path_.string());
  }
  void line(const storm::Event& e) {
    buffer_ += storm::render_line(e);
    buffer_ += '\n';
    ++count_;
    if (buffer_.size() > (1 << 20)) flush();
  }
  void flush() {
    out_.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
    buffer_.clear();
  }
  void close() {
    flush();
    out_.close();
    if (!out_) throw LoggenError("write failed: " + path_.string());
  }
  std::int64_t count() const { return count_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::string buffer_;
  std::int64_t count_ = 0;
};

}  // namespace

std::string_view to_string(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::LatencyScale: return "latency_scale";
    case AnomalyKind::ErrorBurst: return "error_burst";
    case AnomalyKind::RateSpike: return "rate_spike";
  }
  return "latency_scale";
}

std::optional<AnomalyKind> parse_anomaly_kind(std::string_view name) {
  for (auto k : {AnomalyKind::LatencyScale, AnomalyKind::ErrorBurst, AnomalyKind::RateSpike}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

WorkloadSpec WorkloadSpec::defaults() {
  WorkloadSpec w;
  w.start_ms = time::from_civil(2019, 6, 26) + 8 * time::kMillisPerHour;
  struct Row {
    const char* op;
    double rate;
    double mean;
    double sd;
  };
  static constexpr Row kRows[] = {
      {"Connection", 1.2, 2.0, 0.5},       {"srmLs", 1.5, 25.0, 8.0},
      {"srmStatusOfPtG", 1.0, 8.0, 2.0},   {"srmStatusOfPtP", 0.8, 8.0, 2.0},
      {"srmPrepareToGet", 0.3, 40.0, 10.0}, {"srmPrepareToPut", 0.25, 45.0, 12.0},
      {"srmPing", 0.1, 3.0, 1.0},          {"srmRm", 0.1, 20.0, 6.0},
      {"srmMkdir", 0.05, 15.0, 4.0},       {"srmReleaseFiles", 0.15, 12.0, 3.0},
      {"srmPutDone", 0.15, 18.0, 5.0},
  };
  for (const auto& r : kRows) {
    w.op_rates[r.op] = r.rate;
    w.base_latency_ms[r.op] = LatencyModel{r.mean, r.sd};
  }
  return w;
}

void WorkloadSpec::scale_rates(double factor) {
  for (auto& [op, rate] : op_rates) rate *= factor;
}

AnomalySpec parse_anomaly(std::string_view text) {
  auto fail = [&] {
    throw LoggenError("anomaly must look like kind:start-end[:magnitude[:operation]], got '" +
                      std::string(text) + "'");
  };
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (true) {
    auto p = text.find(':', pos);
    parts.push_back(text.substr(pos, p == text.npos ? text.npos : p - pos));
    if (p == text.npos) break;
    pos = p + 1;
  }
  if (parts.size() < 2 || parts.size() > 4) fail();
  AnomalySpec a;
  auto kind = parse_anomaly_kind(parts[0]);
  if (!kind) fail();
  a.kind = *kind;
  auto dash = parts[1].find('-');
  if (dash == std::string_view::npos) fail();
  auto num = [&](std::string_view s, std::int64_t& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc{} || p != s.data() + s.size()) fail();
  };
  num(parts[1].substr(0, dash), a.start_seconds);
  num(parts[1].substr(dash + 1), a.end_seconds);
  if (parts.size() >= 3) {
    try {
      std::size_t used = 0;
      a.magnitude = std::stod(std::string(parts[2]), &used);
      if (used != parts[2].size()) fail();
    } catch (const std::logic_error&) {
      fail();
    }
  }
  if (parts.size() == 4) a.operation = std::string(parts[3]);
  return a;
}

bool is_async_operation(std::string_view op) {
  return op == "srmPrepareToGet" || op == "srmPrepareToPut";
}

bool is_sync_operation(std::string_view op) {
  return op != kConnection && !is_async_operation(op);
}

std::string metric_name(std::string_view op) {
  std::string name(op.starts_with("srm") ? op.substr(3) : op);
  if (!name.empty()) {
    name[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(name[0])));
  }
  return "synch." + name;
}

double nearest_rank(const std::vector<double>& sorted, int p) {
  if (sorted.empty()) throw LoggenError("percentile of an empty sample");
  auto n = static_cast<std::int64_t>(sorted.size());
  std::int64_t rank = std::max<std::int64_t>(1, (p * n + 99) / 100);
  return sorted[static_cast<std::size_t>(std::min(rank, n) - 1)];
}

GroundTruth generate(const WorkloadSpec& w, const std::vector<AnomalySpec>& anomalies,
                     const std::filesystem::path& out_dir) {
  validate(w, anomalies);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw LoggenError("cannot create " + out_dir.string() + ": " + ec.message());

  std::mt19937_64 rng(w.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> millis(0, 999);

  std::vector<std::string> ops;
  std::vector<double> rates;
  std::vector<LatencyModel> latencies;
  for (const auto& [op, rate] : w.op_rates) {
    ops.push_back(op);
    rates.push_back(rate);
    latencies.push_back(w.base_latency_ms.at(op));
  }
  const auto users = make_users(rng, w.private_ip_fraction);

  GroundTruth truth;
  truth.seed = w.seed;
  truth.start_ms = w.start_ms;
  truth.duration_seconds = w.duration_seconds;
  for (const auto& a : anomalies) {
    truth.anomalies.push_back(AnomalyTruth{a, w.start_ms + a.start_seconds * 1000,
                                           w.start_ms + a.end_seconds * 1000,
                                           affected_metric(a)});
  }
  const std::int64_t end_ms = w.start_ms + w.duration_seconds * 1000;
  truth.minutes.resize(static_cast<std::size_t>((w.duration_seconds + 59) / 60));
  for (std::size_t m = 0; m < truth.minutes.size(); ++m) {
    truth.minutes[m].start_ms = w.start_ms + static_cast<std::int64_t>(m) * kMinuteMs;
  }

  auto factor = [&](AnomalyKind kind, std::int64_t second, std::string_view op) {
    double f = 1.0;
    for (const auto& a : anomalies) {
      if (a.kind == kind && second >= a.start_seconds && second < a.end_seconds &&
          (a.operation.empty() || a.operation == op)) {
        f *= a.magnitude;
      }
    }
    return f;
  };

  Writer frontend(out_dir, LogKind::FrontendServer);
  Writer backend(out_dir, LogKind::Backend);
  Writer heartbeat(out_dir, LogKind::Heartbeat);
  Writer monitoring(out_dir, LogKind::Monitoring);
  Writer metrics(out_dir, LogKind::BackendMetrics);

  std::priority_queue<Request, std::vector<Request>, LaterFirst> pending;
  std::uint64_t seq = 0;

  // Per-period accumulators.
  Samples beat_ptg, beat_ptp;
  std::int64_t beat_sync = 0, ptg_total = 0, ptp_total = 0, beat_seq = 0;
  double heap_free = 512.0 * 1024 * 1024;
  Samples round_sync, round_async;
  Running agg_sync, agg_async;
  Samples minute_sync;
  std::map<std::string, Samples> minute_ops;  // by metric name
  std::map<std::string, std::int64_t> metric_totals;
  std::normal_distribution<double> heap_step(0.0, 8.0 * 1024 * 1024);

  auto complete = [&](const Request& r) {
    const auto& op = ops[r.op];
    const auto& user = users[r.user];
    auto minute = static_cast<std::size_t>((r.done_ms - w.start_ms) / kMinuteMs);
    auto& mt = truth.minutes[minute];

    storm::FrontendEvent fe;
    fe.timestamp = r.done_ms;
    fe.level = r.outcome == Outcome::Success   ? LogLevel::Info
               : r.outcome == Outcome::Failure ? LogLevel::Warning
                                               : LogLevel::Error;
    fe.request_id = r.request_id;
    fe.operation = op;
    fe.client_ip = user.ip;
    fe.user_dn = user.dn;
    fe.fqans = user.fqans;
    if (!r.surls.empty()) fe.surl = r.surls.front();
    fe.message = op == kConnection
                     ? "Connection from " + user.ip + " accepted"
                     : "Result for request " + op + " is " + std::string(result_code(r.outcome));
    frontend.line(fe);
    ++mt.frontend_lines;
    ++truth.operation_counts[op];
    ++truth.status_counts[std::string(to_string(fe.level))];

    auto& om = mt.operations[op];
    om.mean_ms += (r.latency_ms - om.mean_ms) / static_cast<double>(++om.count);
    if (op == kConnection) return;

    storm::BackendEvent be;
    be.timestamp = r.done_ms;
    be.level = r.outcome == Outcome::Success   ? LogLevel::Info
               : r.outcome == Outcome::Failure ? LogLevel::Warn
                                               : LogLevel::Error;
    be.request_id = r.request_id;
    be.operation = op;
    if (op != "srmPing") be.user_dn = user.dn;
    be.surls = r.surls;
    be.result = std::string(result_code(r.outcome));
    backend.line(be);
    ++mt.backend_lines;

    if (is_async_operation(op)) {
      ++mt.async_count;
      round_async.add(r.latency_ms, r.outcome);
      if (op == "srmPrepareToGet") {
        beat_ptg.add(r.latency_ms, r.outcome);
        ++ptg_total;
      } else {
        beat_ptp.add(r.latency_ms, r.outcome);
        ++ptp_total;
      }
    } else {
      mt.sync_mean_ms += (r.latency_ms - mt.sync_mean_ms) / static_cast<double>(++mt.sync_count);
      om.samples.push_back(r.latency_ms);
      round_sync.add(r.latency_ms, r.outcome);
      minute_sync.add(r.latency_ms, r.outcome);
      minute_ops[metric_name(op)].add(r.latency_ms, r.outcome);
      ++beat_sync;
    }
  };

  for (std::int64_t s = 0; s < w.duration_seconds; ++s) {
    const std::int64_t second_ms = w.start_ms + s * 1000;
    for (std::size_t i = 0; i < ops.size(); ++i) {
      const auto& op = ops[i];
      double rate = rates[i] * factor(AnomalyKind::RateSpike, s, op);
      if (rate <= 0.0) continue;
      std::poisson_distribution<int> arrivals(rate);
      int n = arrivals(rng);
      double scale = factor(AnomalyKind::LatencyScale, s, op);
      double err = std::min(1.0, w.error_rate * factor(AnomalyKind::ErrorBurst, s, op));
      for (int k = 0; k < n; ++k) {
        Request r;
        r.seq = seq++;
        r.op = i;
        std::int64_t arrival = second_ms + millis(rng);
        std::normal_distribution<double> lat(latencies[i].mean_ms * scale,
                                             latencies[i].stddev_ms * scale);
        double v = 0.0;
        do {
          v = round3(lat(rng));
        } while (v < 0.001);
        r.latency_ms = v;
        r.done_ms = arrival + static_cast<std::int64_t>(std::llround(v));
        if (op != kConnection) {
          double u = unit(rng);
          r.outcome = u < err * 2.0 / 3.0 ? Outcome::Failure
                      : u < err           ? Outcome::Error
                                          : Outcome::Success;
        }
        r.user = static_cast<std::size_t>(rng() % users.size());
        r.request_id = hex_id(rng());
        if (has_surl(op)) {
          int files = (op == "srmRm" || op == "srmReleaseFiles") ? 1 + static_cast<int>(rng() % 3)
                                                                  : 1;
          const auto& vo = users[r.user].vo;
          for (int f = 0; f < files; ++f) {
            r.surls.push_back("srm://storm-fe.cr.cnaf.infn.it:8444/srm/managerv2?SFN=/" + vo +
                              "/data/run" + std::to_string(rng() % 1000) + "/file_" +
                              std::to_string(rng() % 100000) + ".root");
          }
        }
        if (r.done_ms < end_ms) pending.push(std::move(r));
      }
    }

    const std::int64_t next_ms = second_ms + 1000;
    while (!pending.empty() && pending.top().done_ms < next_ms) {
      complete(pending.top());
      pending.pop();
    }

    const std::int64_t elapsed = s + 1;
    if (elapsed % 60 == 0) {
      std::vector<storm::BackendMetricsEvent> lines;
      if (minute_sync.count() > 0) {
        metric_totals["synch"] += minute_sync.count();
        metrics.line(metrics_line(next_ms, "synch", minute_sync, metric_totals["synch"]));
      }
      for (auto& [name, samples] : minute_ops) {
        if (samples.count() == 0) continue;
        metric_totals[name] += samples.count();
        metrics.line(metrics_line(next_ms, name, samples, metric_totals[name]));
      }
      minute_sync = Samples{};
      minute_ops.clear();
    }
    if (elapsed % w.monitoring_round_seconds == 0) {
      agg_sync.add(round_sync);
      agg_async.add(round_async);
      storm::MonitoringEvent me;
      me.timestamp = next_ms;
      me.round_seconds = w.monitoring_round_seconds;
      me.sync = round_stats(round_sync);
      me.async = round_stats(round_async);
      me.aggregate_sync = agg_sync.stats();
      me.aggregate_async = agg_async.stats();
      monitoring.line(me);
      round_sync = Samples{};
      round_async = Samples{};
    }
    if (elapsed % w.heartbeat_period_seconds == 0) {
      heap_free = std::clamp(heap_free + heap_step(rng), 64.0 * 1024 * 1024,
                             1024.0 * 1024 * 1024);
      storm::HeartbeatEvent he;
      he.timestamp = next_ms;
      he.seq = ++beat_seq;
      he.lifetime_seconds = elapsed;
      he.heap_free_bytes = static_cast<std::int64_t>(heap_free);
      he.synch_last_beat = beat_sync;
      he.ptg_total = ptg_total;
      he.ptp_total = ptp_total;
      he.ptg_last = {beat_ptg.count(), beat_ptg.ok, round3(beat_ptg.mean())};
      he.ptp_last = {beat_ptp.count(), beat_ptp.ok, round3(beat_ptp.mean())};
      heartbeat.line(he);
      beat_ptg = Samples{};
      beat_ptp = Samples{};
      beat_sync = 0;
    }
  }

  for (Writer* wr : {&frontend, &monitoring, &backend, &heartbeat, &metrics}) {
    wr->close();
    set_mtime(wr->path(), w.start_ms);
    truth.line_counts[wr->path().filename().string()] = wr->count();
    truth.total_lines += wr->count();
  }

  auto truth_path = out_dir / "truth.json";
  std::ofstream t(truth_path, std::ios::binary);
  t << truth_to_json(truth) << '\n';
  if (!t) throw LoggenError("cannot write " + truth_path.string());
  return truth;
}

std::string truth_to_json(const GroundTruth& truth) {
  ordered_json j;
  j["seed"] = truth.seed;
  j["start"] = time::format_iso8601(truth.start_ms);
  j["duration_seconds"] = truth.duration_seconds;
  j["anomalies"] = ordered_json::array();
  for (const auto& a : truth.anomalies) {
    ordered_json x;
    x["kind"] = to_string(a.spec.kind);
    x["start"] = time::format_iso8601(a.start_ms);
    x["end"] = time::format_iso8601(a.end_ms);
    x["start_seconds"] = a.spec.start_seconds;
    x["end_seconds"] = a.spec.end_seconds;
    x["magnitude"] = a.spec.magnitude;
    x["operation"] = a.spec.operation;
    x["affected_metric"] = a.affected_metric;
    j["anomalies"].push_back(std::move(x));
  }
  j["line_counts"] = truth.line_counts;
  j["total_lines"] = truth.total_lines;
  j["operation_counts"] = truth.operation_counts;
  j["status_counts"] = truth.status_counts;
  j["minutes"] = ordered_json::array();
  for (const auto& m : truth.minutes) {
    ordered_json x;
    x["start"] = time::format_iso8601(m.start_ms);
    x["frontend_lines"] = m.frontend_lines;
    x["backend_lines"] = m.backend_lines;
    x["sync_count"] = m.sync_count;
    x["sync_mean_ms"] = m.sync_mean_ms;
    x["async_count"] = m.async_count;
    ordered_json ops = ordered_json::object();
    for (const auto& [op, om] : m.operations) {
      ordered_json o;
      o["count"] = om.count;
      o["mean_ms"] = om.mean_ms;
      if (!om.samples.empty()) o["samples"] = om.samples;
      ops[op] = std::move(o);
    }
    x["operations"] = std::move(ops);
    j["minutes"].push_back(std::move(x));
  }
  return j.dump();
}

GroundTruth truth_from_json(std::string_view text) {
  GroundTruth t;
  try {
    auto j = json::parse(text);
    auto instant = [](const json& v) {
      auto ms = time::parse_iso8601(v.get<std::string>());
      if (!ms) throw LoggenError("bad timestamp in truth.json");
      return *ms;
    };
    t.seed = j.at("seed").get<std::uint64_t>();
    t.start_ms = instant(j.at("start"));
    t.duration_seconds = j.at("duration_seconds").get<std::int64_t>();
    for (const auto& x : j.at("anomalies")) {
      AnomalyTruth a;
      auto kind = parse_anomaly_kind(x.at("kind").get<std::string>());
      if (!kind) throw LoggenError("bad anomaly kind in truth.json");
      a.spec.kind = *kind;
      a.spec.start_seconds = x.at("start_seconds").get<std::int64_t>();
      a.spec.end_seconds = x.at("end_seconds").get<std::int64_t>();
      a.spec.magnitude = x.at("magnitude").get<double>();
      a.spec.operation = x.at("operation").get<std::string>();
      a.start_ms = instant(x.at("start"));
      a.end_ms = instant(x.at("end"));
      a.affected_metric = x.at("affected_metric").get<std::string>();
      t.anomalies.push_back(std::move(a));
    }
    t.line_counts = j.at("line_counts").get<std::map<std::string, std::int64_t>>();
    t.total_lines = j.at("total_lines").get<std::int64_t>();
    t.operation_counts = j.at("operation_counts").get<std::map<std::string, std::int64_t>>();
    t.status_counts = j.at("status_counts").get<std::map<std::string, std::int64_t>>();
    for (const auto& x : j.at("minutes")) {
      MinuteTruth m;
      m.start_ms = instant(x.at("start"));
      m.frontend_lines = x.at("frontend_lines").get<std::int64_t>();
      m.backend_lines = x.at("backend_lines").get<std::int64_t>();
      m.sync_count = x.at("sync_count").get<std::int64_t>();
      m.sync_mean_ms = x.at("sync_mean_ms").get<double>();
      m.async_count = x.at("async_count").get<std::int64_t>();
      for (const auto& [op, o] : x.at("operations").items()) {
        OperationMinute om;
        om.count = o.at("count").get<std::int64_t>();
        om.mean_ms = o.at("mean_ms").get<double>();
        if (o.contains("samples")) om.samples = o["samples"].get<std::vector<double>>();
        m.operations[op] = std::move(om);
      }
      t.minutes.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    throw LoggenError(std::string("malformed truth.json: ") + e.what());
  }
  return t;
}

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::vector<std::string> lines;
  if (!in) return lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

ConsistencyReport verify_consistency(const std::filesystem::path& dir) {
  ConsistencyReport report;
  auto issue = [&](std::string file, std::int64_t line, std::string what) {
    report.issues.push_back(Inconsistency{std::move(file), line, std::move(what)});
  };

  GroundTruth truth;
  {
    std::ifstream in(dir / "truth.json", std::ios::binary);
    if (!in) {
      issue("truth.json", 0, "missing");
      return report;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
      truth = truth_from_json(ss.str());
    } catch (const LoggenError& e) {
      issue("truth.json", 0, e.what());
      return report;
    }
  }

  const auto minutes = static_cast<std::int64_t>(truth.minutes.size());
  auto minute_of = [&](std::int64_t ts) { return time::floor_div(ts - truth.start_ms, kMinuteMs); };
  // Sum over the minutes of the round ending at `ts`, or nullopt when the
  // round does not cover whole minutes.
  auto round_sum = [&](std::int64_t ts, std::int64_t round_seconds,
                       auto field) -> std::optional<std::int64_t> {
    if (round_seconds % 60 != 0) return std::nullopt;
    std::int64_t last = minute_of(ts) - 1;
    std::int64_t first = last - round_seconds / 60 + 1;
    if (first < 0 || last >= minutes) return std::nullopt;
    std::int64_t sum = 0;
    for (auto m = first; m <= last; ++m) sum += field(truth.minutes[static_cast<std::size_t>(m)]);
    return sum;
  };

  for (auto kind : storm::kAllKinds) {
    std::string file(storm::file_name(kind));
    auto lines = read_lines(dir / file);
    auto expected = truth.line_counts.find(file);
    if (expected == truth.line_counts.end()) {
      issue(file, 0, "not listed in truth.json");
    } else if (expected->second != static_cast<std::int64_t>(lines.size())) {
      issue(file, 0, "line count " + std::to_string(lines.size()) + " != truth " +
                         std::to_string(expected->second));
    }

    std::int64_t day = time::day_start(truth.start_ms);
    std::int64_t last_tod = -1;
    std::vector<std::int64_t> per_minute(static_cast<std::size_t>(minutes), 0);
    std::int64_t last_ptg = 0, last_ptp = 0, last_seq = 0;
    std::set<std::pair<std::int64_t, std::string>> metric_seen;

    for (std::size_t i = 0; i < lines.size(); ++i) {
      const auto line_no = static_cast<std::int64_t>(i + 1);
      ++report.lines_checked;
      if (!storm::has_calendar_date(kind)) {
        if (auto tod = time::parse_time_of_day(std::string_view(lines[i]).substr(0, 12))) {
          if (last_tod >= 0 && *tod + 12 * time::kMillisPerHour < last_tod) {
            day += time::kMillisPerDay;
          }
          last_tod = *tod;
        }
      }
      storm::Event event;
      try {
        event = storm::parse_line(kind, lines[i], day);
      } catch (const Error& e) {
        ++report.parse_failures;
        issue(file, line_no, std::string("parse failure: ") + e.what());
        continue;
      }
      const std::int64_t ts = storm::timestamp_of(event);
      const std::int64_t minute = minute_of(ts);

      if (std::holds_alternative<storm::FrontendEvent>(event) ||
          std::holds_alternative<storm::BackendEvent>(event)) {
        if (minute >= 0 && minute < minutes) ++per_minute[static_cast<std::size_t>(minute)];
      } else if (const auto* he = std::get_if<storm::HeartbeatEvent>(&event)) {
        if (he->seq <= last_seq) issue(file, line_no, "heartbeat sequence not increasing");
        if (he->ptg_total < last_ptg || he->ptp_total < last_ptp) {
          issue(file, line_no, "heartbeat totals decreased");
        }
        last_seq = he->seq;
        last_ptg = he->ptg_total;
        last_ptp = he->ptp_total;
        auto period = he->lifetime_seconds > 0 && he->seq > 0 ? he->lifetime_seconds / he->seq : 0;
        auto sync = round_sum(ts, period, [](const MinuteTruth& m) { return m.sync_count; });
        if (sync && *sync != he->synch_last_beat) {
          issue(file, line_no, "SYNCH count " + std::to_string(he->synch_last_beat) +
                                   " != truth " + std::to_string(*sync));
        }
      } else if (const auto* me = std::get_if<storm::MonitoringEvent>(&event)) {
        auto sync = round_sum(ts, me->round_seconds,
                              [](const MinuteTruth& m) { return m.sync_count; });
        if (sync && *sync != me->sync.performed) {
          issue(file, line_no, "Synch performed " + std::to_string(me->sync.performed) +
                                   " != truth " + std::to_string(*sync));
        }
        auto async = round_sum(ts, me->round_seconds,
                               [](const MinuteTruth& m) { return m.async_count; });
        if (async && *async != me->async.performed) {
          issue(file, line_no, "ASynch performed " + std::to_string(me->async.performed) +
                                   " != truth " + std::to_string(*async));
        }
      } else if (const auto* mx = std::get_if<storm::BackendMetricsEvent>(&event)) {
        if (!(mx->p95_ms <= mx->p99_ms)) issue(file, line_no, "p95 exceeds p99");
        const std::int64_t m = minute - 1;
        if (m < 0 || m >= minutes) {
          issue(file, line_no, "metrics line outside the generated range");
          continue;
        }
        metric_seen.emplace(m, mx->operation);
        const auto& mt = truth.minutes[static_cast<std::size_t>(m)];
        std::vector<double> samples;
        for (const auto& [op, om] : mt.operations) {
          if (!is_sync_operation(op)) continue;
          if (mx->operation == "synch" || metric_name(op) == mx->operation) {
            samples.insert(samples.end(), om.samples.begin(), om.samples.end());
          }
        }
        if (static_cast<std::int64_t>(samples.size()) != mx->m1_count) {
          issue(file, line_no, "m1_count " + std::to_string(mx->m1_count) + " != truth " +
                                   std::to_string(samples.size()));
          continue;
        }
        std::sort(samples.begin(), samples.end());
        double sum = 0.0;
        for (double v : samples) sum += v;
        double mean = round3(sum / static_cast<double>(samples.size()));
        if (std::fabs(mean - mx->mean_ms) > 1e-9) issue(file, line_no, "mean differs from truth");
        if (nearest_rank(samples, 95) != mx->p95_ms) issue(file, line_no, "p95 differs from truth");
        if (nearest_rank(samples, 99) != mx->p99_ms) issue(file, line_no, "p99 differs from truth");
      }
    }

    if (kind == LogKind::FrontendServer || kind == LogKind::Backend) {
      for (std::int64_t m = 0; m < minutes; ++m) {
        const auto& mt = truth.minutes[static_cast<std::size_t>(m)];
        auto want = kind == LogKind::FrontendServer ? mt.frontend_lines : mt.backend_lines;
        auto got = per_minute[static_cast<std::size_t>(m)];
        if (want != got) {
          issue(file, 0, "minute " + time::format_iso8601(mt.start_ms) + " has " +
                             std::to_string(got) + " lines, truth " + std::to_string(want));
        }
      }
    }
    if (kind == LogKind::BackendMetrics) {
      for (std::int64_t m = 0; m < minutes; ++m) {
        const auto& mt = truth.minutes[static_cast<std::size_t>(m)];
        if (truth.start_ms + (m + 1) * kMinuteMs > truth.start_ms + truth.duration_seconds * 1000) {
          continue;
        }
        for (const auto& [op, om] : mt.operations) {
          if (!is_sync_operation(op) || om.count == 0) continue;
          if (!metric_seen.contains({m, metric_name(op)})) {
            issue(file, 0, "missing " + metric_name(op) + " line for minute " +
                               time::format_iso8601(mt.start_ms));
          }
        }
        if (mt.sync_count > 0 && !metric_seen.contains({m, "synch"})) {
          issue(file, 0, "missing synch line for minute " + time::format_iso8601(mt.start_ms));
        }
      }
    }
  }
  return report;
}

}  // namespace stormlog::loggen
