#include "stormlog/cli.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "stormlog/index_store.hpp"
#include "stormlog/loggen.hpp"
#include "stormlog/pipeline.hpp"
#include "stormlog/storm_codecs.hpp"
#include "test_support.hpp"

using namespace stormlog;
namespace st = stormlog::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run stormlog_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "stormlog");
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<std::string> corpus_paths(const fs::path& dir) {
  std::vector<std::string> out;
  for (auto kind : storm::kAllKinds) out.push_back((dir / std::string(storm::file_name(kind))).string());
  return out;
}

// Header row plus data rows, split on commas (report cells never contain one).
std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::istringstream in(st::read_file(path));
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

Run ingest(const fs::path& store, const fs::path& corpus, std::vector<std::string> extra = {}) {
  std::vector<std::string> args = {"--store", store.string(), "ingest", "--base-date",
                                   "2019-06-26"};
  args.insert(args.end(), extra.begin(), extra.end());
  for (const auto& p : corpus_paths(corpus)) args.push_back(p);
  return stormlog_cli(args);
}

// Cells of the one-row ingest summary keyed by header.
std::map<std::string, std::string> summary_of(const std::string& out) {
  std::istringstream in(out);
  std::string header, values;
  std::getline(in, header);
  std::getline(in, values);
  std::map<std::string, std::string> m;
  std::stringstream hs(header), vs(values);
  for (std::string h, v; std::getline(hs, h, ',');) {
    std::getline(vs, v, ',');
    m[h] = v;
  }
  return m;
}

class GeneratedCorpus : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new st::TempDir();
    auto w = loggen::WorkloadSpec::defaults();
    w.duration_seconds = 1800;
    *truth_ = loggen::generate(w, {}, (*dir_) / "corpus");
    auto r = ingest((*dir_) / "store", (*dir_) / "corpus");
    ASSERT_EQ(r.code, 0) << r.err;
    summary_ = summary_of(r.out);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }

  static inline st::TempDir* dir_ = nullptr;
  static inline loggen::GroundTruth* truth_ = new loggen::GroundTruth();
  static inline std::map<std::string, std::string> summary_;
};

}  // namespace

TEST_F(GeneratedCorpus, FreshIngestHasNoDeadLetters) {
  EXPECT_EQ(summary_.at("dead_lettered"), "0");
  EXPECT_EQ(summary_.at("dropped"), "0");
  EXPECT_EQ(std::stoll(summary_.at("lines_read")), truth_->total_lines);
  EXPECT_EQ(std::stoll(summary_.at("indexed")), truth_->total_lines);
  EXPECT_FALSE(fs::exists(cli::dead_letters_path((*dir_) / "store")));
}

TEST_F(GeneratedCorpus, SecondIngestShipsNothing) {
  auto r = ingest((*dir_) / "store", (*dir_) / "corpus");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(summary_of(r.out).at("lines_read"), "0");
}

TEST_F(GeneratedCorpus, ReportMatchesAggregations) {
  auto out = (*dir_) / "report";
  auto r = stormlog_cli({"--store", ((*dir_) / "store").string(), "report", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto store = index::IndexStore::load(cli::indices_dir((*dir_) / "store"));

  auto status = read_csv(out / "status_gauge.csv");
  auto want = std::get<std::vector<index::TermsBucket>>(
      store.aggregate("storm-frontend-*", {}, index::TermsAgg{"status", 100}));
  ASSERT_EQ(status.size(), want.size() + 1);
  EXPECT_EQ(status[0], (std::vector<std::string>{"status", "count"}));
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_EQ(status[i + 1][0], want[i].key);
    EXPECT_EQ(std::stoull(status[i + 1][1]), want[i].count);
    EXPECT_EQ(static_cast<std::int64_t>(want[i].count), truth_->status_counts.at(want[i].key));
  }

  // The busiest generated operations, by truth.json counts.
  std::vector<std::pair<std::int64_t, std::string>> ops;
  for (const auto& [op, n] : truth_->operation_counts) ops.emplace_back(-n, op);
  std::sort(ops.begin(), ops.end());
  std::set<std::string> want_ops;
  for (std::size_t i = 0; i < 4; ++i) want_ops.insert(ops[i].second);
  EXPECT_EQ(want_ops, (std::set<std::string>{"srmLs", "Connection", "srmStatusOfPtG",
                                             "srmStatusOfPtP"}));
  auto series = read_csv(out / "request_timeseries.csv");
  std::set<std::string> got_ops;
  std::map<std::string, std::int64_t> op_totals;
  for (std::size_t i = 1; i < series.size(); ++i) {
    got_ops.insert(series[i][1]);
    op_totals[series[i][1]] += std::stoll(series[i][2]);
  }
  EXPECT_EQ(got_ops, want_ops);
  for (const auto& op : want_ops) EXPECT_EQ(op_totals[op], truth_->operation_counts.at(op));

  auto geo = read_csv(out / "geo_heatmap.csv");
  std::int64_t geo_total = 0;
  for (std::size_t i = 1; i < geo.size(); ++i) geo_total += std::stoll(geo[i][4]);
  std::int64_t with_geo = 0;
  for (const auto& d : store.search("storm-frontend-*", index::Query::match_all())) {
    with_geo += d.fields.count("geo") ? 1 : 0;
  }
  EXPECT_GT(with_geo, 0);
  EXPECT_EQ(geo_total, with_geo);

  auto queries = nlohmann::json::parse(st::read_file(out / "report_queries.json"));
  EXPECT_EQ(queries["status_gauge"]["aggregation"]["terms"]["field"], "status");
}

TEST_F(GeneratedCorpus, EmptyRangeGivesEmptyReports) {
  auto out = (*dir_) / "empty-report";
  auto r = stormlog_cli({"--store", ((*dir_) / "store").string(), "report", "--out", out.string(),
                         "--from", "2001-01-01T00:00:00.000Z", "--to",
                         "2001-01-02T00:00:00.000Z"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_csv(out / "status_gauge.csv").size(), 1u);
  EXPECT_EQ(read_csv(out / "geo_heatmap.csv").size(), 1u);
}

TEST_F(GeneratedCorpus, ForecastHorizonZeroIsUsageError) {
  auto job = (*dir_) / "job.json";
  st::write_file(job, R"({"metric": {"indices": "storm-metrics-*",
      "filter": {"term": {"field": "action", "value": "synch"}}, "detector": "mean",
      "field": "mean_ms", "bucket_span_seconds": 60}})");
  auto store = ((*dir_) / "store").string();
  auto out = ((*dir_) / "ml").string();
  EXPECT_EQ(stormlog_cli({"--store", store, "ml", "forecast", "--job", job.string(), "--out", out,
                          "--horizon", "0"})
                .code,
            1);
  auto ok = stormlog_cli(
      {"--store", store, "ml", "forecast", "--job", job.string(), "--out", out, "--horizon", "5"});
  EXPECT_EQ(ok.code, 0) << ok.err;
  EXPECT_EQ(read_csv(fs::path(out) / "forecast.csv").size(), 6u);
  auto det = stormlog_cli({"--store", store, "ml", "detect", "--job", job.string(), "--out", out});
  EXPECT_EQ(det.code, 0) << det.err;
  auto bad = (*dir_) / "bad-job.json";
  st::write_file(bad, R"({"metric": {"detector": "median"}})");
  EXPECT_EQ(stormlog_cli({"--store", store, "ml", "detect", "--job", bad.string(), "--out", out})
                .code,
            1);
}

TEST_F(GeneratedCorpus, QueryAndAgg) {
  auto store = ((*dir_) / "store").string();
  auto q = stormlog_cli({"--store", store, "--format", "json-lines", "query", "--index",
                         "storm-frontend-*", "--q",
                         R"({"term": {"field": "status", "value": "ERROR"}})"});
  ASSERT_EQ(q.code, 0) << q.err;
  auto lines = std::count(q.out.begin(), q.out.end(), '\n');
  EXPECT_EQ(lines, truth_->status_counts.count("ERROR") ? truth_->status_counts.at("ERROR") : 0);
  auto a = stormlog_cli({"--store", store, "agg", "--index", "storm-frontend-*", "--agg",
                         R"({"terms": {"field": "status", "size": 10}})"});
  EXPECT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out.substr(0, 10), "key,count\n");
  EXPECT_EQ(stormlog_cli({"--store", store, "query", "--q", "{bad"}).code, 1);
}

TEST(Cli, MissingInputIsUsageError) {
  st::TempDir dir;
  auto r = stormlog_cli({"--store", (dir / "s").string(), "ingest", (dir / "nope.log").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(r.err.empty());
  EXPECT_EQ(stormlog_cli({}).code, 1);
  EXPECT_EQ(stormlog_cli({"frobnicate"}).code, 1);
}

TEST(Cli, CorruptedCorpusExceedsThreshold) {
  st::TempDir dir;
  auto w = loggen::WorkloadSpec::defaults();
  w.duration_seconds = 600;
  loggen::generate(w, {}, dir / "corpus");
  std::size_t total = 0, corrupted = 0;
  for (const auto& p : corpus_paths(dir / "corpus")) {
    std::istringstream in(st::read_file(p));
    std::string text;
    for (std::string line; std::getline(in, line);) {
      if (total++ % 20 == 0) {
        line = "#corrupted# " + line;
        ++corrupted;
      }
      text += line + "\n";
    }
    st::write_file(p, text);
  }
  auto r = ingest(dir / "store", dir / "corpus");
  EXPECT_EQ(r.code, 2) << r.out << r.err;
  auto s = summary_of(r.out);
  EXPECT_EQ(std::stoull(s.at("dead_lettered")), corrupted);
  EXPECT_EQ(std::stoull(s.at("lines_read")), total);
  EXPECT_EQ(std::stoull(s.at("indexed")) + corrupted, total);
  // Dead letters keep the raw line.
  std::istringstream dl(st::read_file(cli::dead_letters_path(dir / "store")));
  std::size_t n = 0;
  for (std::string line; std::getline(dl, line);) {
    EXPECT_EQ(pipeline::dead_letter_from_text(line).raw.line.rfind("#corrupted# ", 0), 0u);
    ++n;
  }
  EXPECT_EQ(n, corrupted);
}

TEST(Cli, LoggenAndVerify) {
  st::TempDir dir;
  auto out = (dir / "c").string();
  auto r = stormlog_cli({"loggen", "--out", out, "--duration", "300", "--anomaly",
                         "latency_scale:60-120:10"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(stormlog_cli({"verify", out}).code, 0);
  st::append_file(fs::path(out) / "monitoring.log", "garbage\n");
  EXPECT_EQ(stormlog_cli({"verify", out}).code, 2);
  EXPECT_EQ(stormlog_cli({"loggen", "--out", out, "--anomaly", "bogus"}).code, 1);
}

TEST(Cli, IndexManagement) {
  st::TempDir dir;
  auto w = loggen::WorkloadSpec::defaults();
  w.duration_seconds = 120;
  loggen::generate(w, {}, dir / "corpus");
  ASSERT_EQ(ingest(dir / "store", dir / "corpus").code, 0);
  auto store = (dir / "store").string();
  auto ls = stormlog_cli({"--store", store, "index", "ls"});
  EXPECT_NE(ls.out.find("storm-backend-2019.06.26"), std::string::npos);
  auto rm = stormlog_cli({"--store", store, "index", "rm", "storm-backend-*"});
  EXPECT_EQ(rm.code, 0);
  EXPECT_EQ(stormlog_cli({"--store", store, "index", "ls"}).out.find("storm-backend-"),
            std::string::npos);
}
