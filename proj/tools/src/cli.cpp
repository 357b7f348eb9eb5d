#include "stormlog/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stormlog/anomaly.hpp"
#include "stormlog/index_store.hpp"
#include "stormlog/loggen.hpp"
#include "stormlog/metrics.hpp"
#include "stormlog/pipeline.hpp"
#include "stormlog/shipper.hpp"
#include "stormlog/time.hpp"

namespace stormlog::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

// Bad flags, configs or inputs named on the command line.
class UsageError : public Error {
 public:
  using Error::Error;
};

enum class Format { Csv, JsonLines };

struct Globals {
  std::string store = "stormlog-store";
  std::string config;
  std::string format = "csv";

  Format fmt() const { return format == "json-lines" ? Format::JsonLines : Format::Csv; }
  std::string ext() const { return fmt() == Format::Csv ? ".csv" : ".jsonl"; }
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error("cannot write " + path.string());
}

std::int64_t parse_instant_flag(const std::string& text, const char* flag) {
  auto t = time::parse_instant(text);
  if (!t) throw UsageError(std::string(flag) + ": not a valid instant: " + text);
  return *t;
}

index::TimeRange range_from(const std::string& from, const std::string& to) {
  index::TimeRange r;
  if (!from.empty()) r.from = parse_instant_flag(from, "--from");
  if (!to.empty()) r.to = parse_instant_flag(to, "--to");
  return r;
}

template <typename Fn>
auto as_usage(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

index::IndexStore load_store(const fs::path& store) {
  auto dir = indices_dir(store);
  if (!fs::exists(dir)) return index::IndexStore{};
  return index::IndexStore::load(dir);
}

pipeline::Pipeline load_pipeline_config(const std::optional<fs::path>& path) {
  if (!path) return pipeline::default_pipeline();
  return as_usage([&] { return pipeline::load_pipeline_file(*path); });
}

std::string csv_escape(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string value_text(const FieldValue* v) {
  if (!v) return {};
  if (const auto* g = std::get_if<GeoPoint>(v)) {
    return format_double(g->lat) + " " + format_double(g->lon);
  }
  return to_key_string(*v);
}

void print_rows(std::ostream& out, Format fmt, const std::vector<std::string>& header,
                const std::vector<std::vector<ordered_json>>& rows) {
  if (fmt == Format::Csv) {
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        out << (i ? "," : "");
        const auto& v = row[i];
        if (v.is_string()) {
          out << csv_escape(v.get<std::string>());
        } else if (v.is_number_float()) {
          out << format_double(v.get<double>());
        } else if (!v.is_null()) {
          out << v.dump();
        }
      }
      out << '\n';
    }
    return;
  }
  for (const auto& row : rows) {
    ordered_json j;
    for (std::size_t i = 0; i < header.size(); ++i) j[header[i]] = row[i];
    out << j.dump() << '\n';
  }
}

std::string render_rows(Format fmt, const std::vector<std::string>& header,
                        const std::vector<std::vector<ordered_json>>& rows) {
  std::ostringstream ss;
  print_rows(ss, fmt, header, rows);
  return ss.str();
}

void aggregation_rows(const index::AggregationResult& result, std::vector<std::string>& header,
                      std::vector<std::vector<ordered_json>>& rows) {
  if (const auto* terms = std::get_if<std::vector<index::TermsBucket>>(&result)) {
    header = {"key", "count"};
    for (const auto& b : *terms) rows.push_back({b.key, b.count});
  } else if (const auto* hist = std::get_if<std::vector<index::HistogramBucket>>(&result)) {
    header = {"bucket_start", "count"};
    for (const auto& b : *hist) rows.push_back({time::format_iso8601(b.start_ms), b.count});
  } else if (const auto* stats = std::get_if<index::StatsResult>(&result)) {
    header = {"count", "min", "max", "mean", "sum"};
    rows.push_back({stats->count, stats->min, stats->max, stats->mean, stats->sum});
  } else if (const auto* cells = std::get_if<std::vector<index::GeoCell>>(&result)) {
    header = {"lat_index", "lon_index", "lat_center", "lon_center", "count"};
    for (const auto& c : *cells) {
      rows.push_back({c.lat_index, c.lon_index, c.lat_center, c.lon_center, c.count});
    }
  }
}

// ---------------------------------------------------------------- commands

int cmd_loggen(const Globals&, const fs::path& out_dir, std::uint64_t seed, std::int64_t duration,
               const std::string& start, double rate_scale, std::optional<double> error_rate,
               const std::vector<std::string>& anomaly_texts, std::ostream& out) {
  auto workload = loggen::WorkloadSpec::defaults();
  workload.seed = seed;
  workload.duration_seconds = duration;
  if (!start.empty()) workload.start_ms = parse_instant_flag(start, "--start");
  if (!(rate_scale > 0.0)) throw UsageError("--rate-scale must be positive");
  workload.scale_rates(rate_scale);
  if (error_rate) workload.error_rate = *error_rate;
  std::vector<loggen::AnomalySpec> anomalies;
  for (const auto& a : anomaly_texts) {
    anomalies.push_back(as_usage([&] { return loggen::parse_anomaly(a); }));
  }
  auto truth = as_usage([&] { return loggen::generate(workload, anomalies, out_dir); });
  out << "total_lines: " << truth.total_lines << '\n';
  for (const auto& [file, n] : truth.line_counts) out << file << ": " << n << '\n';
  return kExitOk;
}

int cmd_verify(const fs::path& dir, std::ostream& out) {
  if (!fs::is_directory(dir)) throw UsageError("not a directory: " + dir.string());
  auto report = loggen::verify_consistency(dir);
  for (const auto& i : report.issues) {
    out << i.file << ':' << i.line << ": " << i.what << '\n';
  }
  out << "lines_checked: " << report.lines_checked << '\n';
  out << "inconsistencies: " << report.issues.size() << '\n';
  return report.ok() ? kExitOk : kExitDataError;
}

int cmd_ingest(const Globals& g, IngestOptions opts, double threshold, std::ostream& out) {
  if (opts.paths.empty()) throw UsageError("ingest needs at least one path");
  for (const auto& p : opts.paths) {
    if (!fs::is_regular_file(p)) throw UsageError("no such file: " + p);
  }
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw UsageError("--dead-letter-threshold must be in [0, 1]");
  }
  opts.store = g.store;
  if (!g.config.empty()) opts.pipeline_config = g.config;
  auto s = ingest(opts);
  std::string created;
  for (const auto& n : s.indices_created) created += (created.empty() ? "" : ";") + n;
  print_rows(out, g.fmt(),
             {"lines_read", "indexed", "dead_lettered", "dropped", "indices_created"},
             {{s.lines_read, s.indexed, s.dead_lettered, s.dropped, created}});
  double fraction = s.lines_read == 0 ? 0.0
                                      : static_cast<double>(s.dead_lettered) /
                                            static_cast<double>(s.lines_read);
  return fraction > threshold ? kExitDataError : kExitOk;
}

int cmd_query(const Globals& g, const std::string& pattern, const std::string& q,
              const std::string& from, const std::string& to, std::size_t limit,
              const std::vector<std::string>& fields, std::ostream& out) {
  auto query = as_usage([&] { return index::parse_query(q); });
  auto range = range_from(from, to);
  auto store = load_store(g.store);
  auto docs = as_usage([&] { return store.search(pattern, query, range); });
  if (limit > 0 && docs.size() > limit) docs.resize(limit);
  if (g.fmt() == Format::JsonLines) {
    for (const auto& d : docs) out << document_to_json(d) << '\n';
    return kExitOk;
  }
  std::vector<std::string> header = {"id", "index", "@timestamp"};
  header.insert(header.end(), fields.begin(), fields.end());
  std::vector<std::vector<ordered_json>> rows;
  for (const auto& d : docs) {
    std::vector<ordered_json> row = {d.id, d.index_name,
                                     time::format_iso8601(d.timestamp().value_or(0))};
    for (const auto& f : fields) row.emplace_back(value_text(d.find(f)));
    rows.push_back(std::move(row));
  }
  print_rows(out, Format::Csv, header, rows);
  return kExitOk;
}

int cmd_agg(const Globals& g, const std::string& pattern, const std::string& q,
            const std::string& agg_text, const std::string& from, const std::string& to,
            std::ostream& out) {
  auto query = as_usage([&] { return index::parse_query(q); });
  auto agg = as_usage([&] { return index::parse_aggregation(agg_text); });
  auto range = range_from(from, to);
  auto store = load_store(g.store);
  auto result = as_usage([&] { return store.aggregate(pattern, query, agg, range); });
  std::vector<std::string> header;
  std::vector<std::vector<ordered_json>> rows;
  aggregation_rows(result, header, rows);
  print_rows(out, g.fmt(), header, rows);
  return kExitOk;
}

constexpr std::string_view kFrontendIndices = "storm-frontend-*";

int cmd_report(const Globals& g, const std::string& from, const std::string& to,
               const fs::path& out_dir, std::int64_t interval_ms, double cell_degrees,
               std::size_t top_ops, std::ostream& out) {
  if (interval_ms < 1) throw UsageError("--interval-ms must be positive");
  if (!(cell_degrees > 0.0)) throw UsageError("--cell-degrees must be positive");
  auto range = range_from(from, to);
  auto store = load_store(g.store);
  fs::create_directories(out_dir);
  const auto all = index::Query::match_all();
  const std::string pattern(kFrontendIndices);

  // Status gauge.
  auto status = std::get<std::vector<index::TermsBucket>>(
      store.aggregate(pattern, all, index::TermsAgg{"status", 100}, range));
  std::vector<std::vector<ordered_json>> status_rows;
  for (const auto& b : status) status_rows.push_back({b.key, b.count});
  write_file(out_dir / ("status_gauge" + g.ext()),
             render_rows(g.fmt(), {"status", "count"}, status_rows));

  // Per-operation request counts over time, for the busiest operations.
  auto ops = std::get<std::vector<index::TermsBucket>>(
      store.aggregate(pattern, all, index::TermsAgg{"action", top_ops}, range));
  std::vector<std::vector<ordered_json>> series_rows;
  for (const auto& op : ops) {
    auto hist = std::get<std::vector<index::HistogramBucket>>(
        store.aggregate(pattern, index::Query::term("action", op.key),
                        index::DateHistogramAgg{interval_ms}, range));
    for (const auto& b : hist) {
      series_rows.push_back({time::format_iso8601(b.start_ms), op.key, b.count});
    }
  }
  write_file(out_dir / ("request_timeseries" + g.ext()),
             render_rows(g.fmt(), {"bucket_start", "action", "count"}, series_rows));

  // Geo heat map.
  auto cells = std::get<std::vector<index::GeoCell>>(
      store.aggregate(pattern, all, index::GeoGridAgg{"geo", cell_degrees}, range));
  std::vector<std::vector<ordered_json>> geo_rows;
  for (const auto& c : cells) {
    geo_rows.push_back({c.lat_index, c.lon_index, c.lat_center, c.lon_center, c.count});
  }
  write_file(out_dir / ("geo_heatmap" + g.ext()),
             render_rows(g.fmt(), {"lat_index", "lon_index", "lat_center", "lon_center", "count"},
                         geo_rows));

  // The exact requests behind each file.
  ordered_json queries;
  queries["indices"] = pattern;
  queries["from"] = range.from ? ordered_json(time::format_iso8601(*range.from)) : ordered_json();
  queries["to"] = range.to ? ordered_json(time::format_iso8601(*range.to)) : ordered_json();
  queries["status_gauge"] = {{"query", {{"match_all", ordered_json::object()}}},
                             {"aggregation", {{"terms", {{"field", "status"}, {"size", 100}}}}}};
  queries["request_timeseries"] = {
      {"operations", {{"query", {{"match_all", ordered_json::object()}}},
                      {"aggregation", {{"terms", {{"field", "action"}, {"size", top_ops}}}}}}},
      {"per_operation", {{"query", {{"term", {{"field", "action"}, {"value", "<operation>"}}}}},
                         {"aggregation", {{"date_histogram", {{"interval_ms", interval_ms}}}}}}}};
  queries["geo_heatmap"] = {
      {"query", {{"match_all", ordered_json::object()}}},
      {"aggregation", {{"geo_grid", {{"field", "geo"}, {"cell_degrees", cell_degrees}}}}}};
  write_file(out_dir / "report_queries.json", queries.dump(2) + "\n");

  out << "status_gauge: " << status_rows.size() << " rows\n";
  out << "request_timeseries: " << series_rows.size() << " rows\n";
  out << "geo_heatmap: " << geo_rows.size() << " rows\n";
  return kExitOk;
}

struct MlRun {
  anomaly::JobConfig job;
  metrics::MetricSeries series;
  anomaly::Detection detection;
};

MlRun run_job(const Globals& g, const fs::path& job_path) {
  MlRun r;
  r.job = as_usage([&] { return anomaly::parse_job(read_file(job_path)); });
  auto store = load_store(g.store);
  std::int64_t from = 0, to = 0;
  if (r.job.from_ms && r.job.to_ms) {
    from = *r.job.from_ms;
    to = *r.job.to_ms;
  } else {
    index::TimeRange range{r.job.from_ms, r.job.to_ms};
    auto docs = as_usage([&] { return store.search(r.job.metric.indices, r.job.metric.filter, range); });
    if (docs.empty()) throw UsageError("the job's metric matches no documents");
    from = r.job.from_ms.value_or(*docs.front().timestamp());
    to = r.job.to_ms.value_or(*docs.back().timestamp() + 1);
  }
  if (from >= to) throw UsageError("job range is empty");
  r.series = as_usage([&] { return metrics::build_series(store, r.job.metric, from, to); });
  r.series = metrics::gap_fill(std::move(r.series), r.job.gap_fill);
  r.detection = anomaly::detect(r.series, r.job.params);
  return r;
}

int cmd_ml_detect(const Globals& g, const fs::path& job_path, const fs::path& out_dir,
                  std::ostream& out) {
  auto r = run_job(g, job_path);
  fs::create_directories(out_dir);
  bool csv = g.fmt() == Format::Csv;
  write_file(out_dir / ("series" + g.ext()),
             csv ? metrics::series_to_csv(r.series) : metrics::series_to_json_lines(r.series));
  write_file(out_dir / ("bounds" + g.ext()), csv ? anomaly::bounds_to_csv(r.detection.bounds)
                                                 : anomaly::bounds_to_json_lines(r.detection.bounds));
  write_file(out_dir / ("records" + g.ext()),
             csv ? anomaly::records_to_csv(r.detection.records)
                 : anomaly::records_to_json_lines(r.detection.records));
  std::map<anomaly::Level, std::size_t> levels;
  for (const auto& rec : r.detection.records) ++levels[rec.level];
  out << "buckets: " << r.series.size() << '\n';
  out << "scored: " << r.detection.bounds.size() << '\n';
  out << "records: " << r.detection.records.size() << '\n';
  for (auto l : {anomaly::Level::Low, anomaly::Level::Warning, anomaly::Level::Major,
                 anomaly::Level::Critical}) {
    out << to_string(l) << ": " << levels[l] << '\n';
  }
  return kExitOk;
}

int cmd_ml_forecast(const Globals& g, const fs::path& job_path, std::int64_t horizon,
                    const fs::path& out_dir, std::ostream& out) {
  if (horizon < 1) throw UsageError("--horizon must be at least 1");
  auto r = run_job(g, job_path);
  if (!r.detection.model.warmed_up()) {
    throw UsageError("not enough data to leave warmup (" +
                     std::to_string(r.detection.model.observed) + " buckets)");
  }
  auto next = r.series.bucket_start(r.series.size());
  auto points = anomaly::forecast(r.detection.model, horizon, next, r.series.span_ms(),
                                  r.job.params.forecast_beta);
  fs::create_directories(out_dir);
  write_file(out_dir / ("forecast" + g.ext()), g.fmt() == Format::Csv
                                                   ? anomaly::forecast_to_csv(points)
                                                   : anomaly::forecast_to_json_lines(points));
  out << "forecast_points: " << points.size() << '\n';
  out << "predicted: " << format_double(points.front().predicted) << '\n';
  return kExitOk;
}

int cmd_index_ls(const Globals& g, std::ostream& out) {
  auto store = load_store(g.store);
  std::vector<std::vector<ordered_json>> rows;
  for (const auto& name : store.index_names()) rows.push_back({name, store.doc_count(name)});
  print_rows(out, g.fmt(), {"index", "docs"}, rows);
  return kExitOk;
}

int cmd_index_rm(const Globals& g, const std::vector<std::string>& patterns, std::ostream& out) {
  auto store = load_store(g.store);
  std::vector<std::string> removed;
  for (const auto& name : store.index_names()) {
    for (const auto& p : patterns) {
      if (as_usage([&] { return index::matches_index_pattern(p, name); })) {
        removed.push_back(name);
        break;
      }
    }
  }
  for (const auto& name : removed) store.delete_index(name);
  store.save(indices_dir(g.store));
  for (const auto& name : removed) out << "removed: " << name << '\n';
  return kExitOk;
}

int cmd_index_retain(const Globals& g, std::size_t days, std::ostream& out) {
  if (days < 1) throw UsageError("--days must be at least 1");
  auto store = load_store(g.store);
  auto removed = store.retain_latest(days);
  store.save(indices_dir(g.store));
  for (const auto& name : removed) out << "removed: " << name << '\n';
  return kExitOk;
}

}  // namespace

fs::path indices_dir(const fs::path& store) { return store / "indices"; }
fs::path registry_path(const fs::path& store) { return store / "registry.json"; }
fs::path dead_letters_path(const fs::path& store) { return store / "dead_letters.ndjson"; }

IngestSummary ingest(const IngestOptions& options) {
  auto pipe = load_pipeline_config(options.pipeline_config);
  fs::create_directories(options.store);
  auto store = load_store(options.store);
  std::set<std::string, std::less<>> before;
  for (auto& n : store.index_names()) before.insert(std::move(n));

  ship::ShipperConfig sc;
  sc.registry_path = options.registry.value_or(registry_path(options.store));
  sc.tail.beat_name = options.beat_name;
  sc.tail.max_records = std::max<std::size_t>(1, options.batch_size);
  sc.tail.base_day_ms = options.base_day_ms;
  sc.checkpoint_after_delivery = false;
  ship::Shipper shipper(sc);

  IngestSummary summary;
  std::string dead_text;
  const std::size_t workers = std::max<std::size_t>(1, options.workers);
  std::vector<pipeline::Outcome> outcomes;

  shipper.drain(options.paths, [&](const ship::Batch& batch) {
    const auto& recs = batch.records;
    outcomes.assign(recs.size(), pipeline::Dropped{});
    if (workers == 1 || recs.size() < 2 * workers) {
      for (std::size_t i = 0; i < recs.size(); ++i) outcomes[i] = pipe.process(recs[i]);
    } else {
      std::vector<std::thread> threads;
      const std::size_t chunk = (recs.size() + workers - 1) / workers;
      for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
          const std::size_t end = std::min(recs.size(), (w + 1) * chunk);
          for (std::size_t i = w * chunk; i < end; ++i) outcomes[i] = pipe.process(recs[i]);
        });
      }
      for (auto& t : threads) t.join();
    }
    std::vector<Document> docs;
    docs.reserve(recs.size());
    for (auto& o : outcomes) {
      ++summary.lines_read;
      if (auto* d = std::get_if<Document>(&o)) {
        docs.push_back(std::move(*d));
      } else if (auto* dl = std::get_if<pipeline::DeadLetter>(&o)) {
        ++summary.dead_lettered;
        dead_text += pipeline::dead_letter_to_text(*dl);
        dead_text += '\n';
      } else {
        ++summary.dropped;
      }
    }
    summary.indexed += docs.size();
    store.index_documents(std::move(docs));
  });

  store.save(indices_dir(options.store));
  if (!dead_text.empty()) {
    std::ofstream dl(dead_letters_path(options.store), std::ios::binary | std::ios::app);
    dl << dead_text;
    if (!dl) throw Error("cannot append dead letters");
  }
  shipper.commit();

  for (const auto& n : store.index_names()) {
    if (!before.contains(n)) summary.indices_created.push_back(n);
  }
  return summary;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"StoRM log analytics: generate, ingest, search, report and detect anomalies"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--store", g.store, "Store directory")->capture_default_str();
  app.add_option("--config", g.config, "Pipeline config (JSON)");
  app.add_option("--format", g.format, "Output format")
      ->check(CLI::IsMember({"csv", "json-lines"}))
      ->capture_default_str();

  // loggen
  auto* loggen_cmd = app.add_subcommand("loggen", "Generate a synthetic StoRM log corpus");
  std::string lg_out;
  std::uint64_t lg_seed = 42;
  std::int64_t lg_duration = 3600;
  std::string lg_start;
  double lg_rate_scale = 1.0;
  std::optional<double> lg_error_rate;
  std::vector<std::string> lg_anomalies;
  loggen_cmd->add_option("--out", lg_out, "Output directory")->required();
  loggen_cmd->add_option("--seed", lg_seed)->capture_default_str();
  loggen_cmd->add_option("--duration", lg_duration, "Seconds")->capture_default_str();
  loggen_cmd->add_option("--start", lg_start, "Start instant (default 2019-06-26T08:00:00Z)");
  loggen_cmd->add_option("--rate-scale", lg_rate_scale)->capture_default_str();
  loggen_cmd->add_option("--error-rate", lg_error_rate);
  loggen_cmd->add_option("--anomaly", lg_anomalies,
                         "kind:start-end[:magnitude[:operation]], repeatable");

  auto* verify_cmd = app.add_subcommand("verify", "Check a generated corpus against truth.json");
  std::string vf_dir;
  verify_cmd->add_option("dir", vf_dir)->required();

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "Ship, parse and index log files");
  IngestOptions io;
  std::string ig_registry, ig_base_date;
  double ig_threshold = 0.01;
  ingest_cmd->add_option("paths", io.paths, "Log files")->required();
  ingest_cmd->add_option("--registry", ig_registry, "Registry file (default: in the store)");
  ingest_cmd->add_option("--batch-size", io.batch_size)->capture_default_str();
  ingest_cmd->add_option("--beat-name", io.beat_name)->capture_default_str();
  ingest_cmd->add_option("--base-date", ig_base_date, "Date for time-of-day only files");
  ingest_cmd->add_option("--workers", io.workers)->capture_default_str();
  ingest_cmd->add_option("--dead-letter-threshold", ig_threshold)->capture_default_str();

  // query / agg
  auto* query_cmd = app.add_subcommand("query", "Search documents");
  auto* agg_cmd = app.add_subcommand("agg", "Aggregate documents");
  std::string q_index = "*", q_query = R"({"match_all":{}})", q_from, q_to, q_agg;
  std::size_t q_limit = 0;
  std::vector<std::string> q_fields = {"message"};
  for (auto* c : {query_cmd, agg_cmd}) {
    c->add_option("--index", q_index, "Index name or prefix*")->capture_default_str();
    c->add_option("--q", q_query, "Query (JSON)")->capture_default_str();
    c->add_option("--from", q_from);
    c->add_option("--to", q_to);
  }
  query_cmd->add_option("--limit", q_limit, "0 = unlimited");
  query_cmd->add_option("--fields", q_fields, "CSV columns")->delimiter(',');
  agg_cmd->add_option("--agg", q_agg, "Aggregation (JSON)")->required();

  // report
  auto* report_cmd = app.add_subcommand("report", "Write the status, request and geo reports");
  std::string rp_from, rp_to, rp_out;
  std::int64_t rp_interval = 60'000;
  double rp_cell = 1.0;
  std::size_t rp_top = 4;
  report_cmd->add_option("--from", rp_from);
  report_cmd->add_option("--to", rp_to);
  report_cmd->add_option("--out", rp_out)->required();
  report_cmd->add_option("--interval-ms", rp_interval)->capture_default_str();
  report_cmd->add_option("--cell-degrees", rp_cell)->capture_default_str();
  report_cmd->add_option("--top", rp_top, "Operations in the request time series")
      ->capture_default_str();

  // ml
  auto* ml_cmd = app.add_subcommand("ml", "Single-metric anomaly jobs");
  ml_cmd->require_subcommand(1);
  auto* detect_cmd = ml_cmd->add_subcommand("detect", "Score every bucket");
  auto* forecast_cmd = ml_cmd->add_subcommand("forecast", "Project the trained baseline");
  std::string ml_job, ml_out;
  std::int64_t ml_horizon = 60;
  for (auto* c : {detect_cmd, forecast_cmd}) {
    c->add_option("--job", ml_job, "Job config (JSON)")->required();
    c->add_option("--out", ml_out, "Output directory")->required();
  }
  forecast_cmd->add_option("--horizon", ml_horizon, "Buckets ahead")->capture_default_str();

  // index
  auto* index_cmd = app.add_subcommand("index", "Manage indices");
  index_cmd->require_subcommand(1);
  auto* ls_cmd = index_cmd->add_subcommand("ls", "List indices");
  auto* rm_cmd = index_cmd->add_subcommand("rm", "Delete indices");
  auto* retain_cmd = index_cmd->add_subcommand("retain", "Keep the newest days per kind");
  std::vector<std::string> rm_patterns;
  std::size_t retain_days = 7;
  rm_cmd->add_option("names", rm_patterns, "Index names or prefix*")->required();
  retain_cmd->add_option("--days", retain_days)->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*loggen_cmd) {
      return cmd_loggen(g, lg_out, lg_seed, lg_duration, lg_start, lg_rate_scale, lg_error_rate,
                        lg_anomalies, out);
    }
    if (*verify_cmd) return cmd_verify(vf_dir, out);
    if (*ingest_cmd) {
      if (!ig_registry.empty()) io.registry = ig_registry;
      if (!ig_base_date.empty()) {
        auto d = time::parse_date(ig_base_date);
        if (!d) throw UsageError("--base-date must be YYYY-MM-DD");
        io.base_day_ms = *d;
      }
      return cmd_ingest(g, io, ig_threshold, out);
    }
    if (*query_cmd) return cmd_query(g, q_index, q_query, q_from, q_to, q_limit, q_fields, out);
    if (*agg_cmd) return cmd_agg(g, q_index, q_query, q_agg, q_from, q_to, out);
    if (*report_cmd) {
      return cmd_report(g, rp_from, rp_to, rp_out, rp_interval, rp_cell, rp_top, out);
    }
    if (*detect_cmd) return cmd_ml_detect(g, ml_job, ml_out, out);
    if (*forecast_cmd) return cmd_ml_forecast(g, ml_job, ml_horizon, ml_out, out);
    if (*ls_cmd) return cmd_index_ls(g, out);
    if (*rm_cmd) return cmd_index_rm(g, rm_patterns, out);
    if (*retain_cmd) return cmd_index_retain(g, retain_days, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  err << "error: no command\n";
  return kExitUsage;
}

}  // namespace stormlog::cli
