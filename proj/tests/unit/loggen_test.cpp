#include "stormlog/loggen.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "stormlog/storm_codecs.hpp"
#include "stormlog/time.hpp"
#include "test_support.hpp"

using namespace stormlog;
using namespace stormlog::loggen;
namespace st = stormlog::testing;

namespace {

std::vector<std::string> lines_of(const std::filesystem::path& path) {
  std::istringstream in(st::read_file(path));
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

WorkloadSpec short_workload(std::int64_t seconds, std::uint64_t seed = 42) {
  auto w = WorkloadSpec::defaults();
  w.duration_seconds = seconds;
  w.seed = seed;
  return w;
}

}  // namespace

TEST(Generate, TwoMinutesGiveTwoHeartbeats) {
  st::TempDir dir;
  auto truth = generate(short_workload(120), {}, dir.path());
  EXPECT_EQ(lines_of(dir / "heartbeat.log").size(), 2u);
  EXPECT_EQ(truth.line_counts.at("heartbeat.log"), 2);
  std::int64_t total = 0;
  for (auto kind : storm::kAllKinds) {
    auto n = static_cast<std::int64_t>(lines_of(dir / std::string(storm::file_name(kind))).size());
    EXPECT_EQ(n, truth.line_counts.at(std::string(storm::file_name(kind))));
    total += n;
  }
  EXPECT_EQ(total, truth.total_lines);
}

TEST(Generate, IdenticalInputsGiveIdenticalBytes) {
  st::TempDir a, b;
  auto w = short_workload(600, 7);
  std::vector<AnomalySpec> anomalies{parse_anomaly("error_burst:120-240:5")};
  generate(w, anomalies, a.path());
  generate(w, anomalies, b.path());
  for (const auto& name : {"heartbeat.log", "storm-frontend-server.log", "monitoring.log",
                           "storm-backend.log", "storm-backend-metrics.log", "truth.json"}) {
    EXPECT_EQ(st::read_file(a / name), st::read_file(b / name)) << name;
  }
  st::TempDir c;
  generate(short_workload(600, 8), anomalies, c.path());
  EXPECT_NE(st::read_file(a / "storm-frontend-server.log"),
            st::read_file(c / "storm-frontend-server.log"));
}

TEST(Generate, FreshCorpusVerifiesClean) {
  for (std::uint64_t seed : {1, 2, 3}) {
    st::TempDir dir;
    generate(short_workload(1200, seed),
             {parse_anomaly("latency_scale:300-600:10"), parse_anomaly("rate_spike:700-800:3")},
             dir.path());
    auto report = verify_consistency(dir.path());
    EXPECT_TRUE(report.ok()) << report.issues.front().file << ":" << report.issues.front().line
                             << " " << report.issues.front().what;
    EXPECT_EQ(report.parse_failures, 0);
    EXPECT_GT(report.lines_checked, 0);
  }
}

TEST(Generate, CorruptedHeartbeatCountIsReportedOnce) {
  st::TempDir dir;
  generate(short_workload(600), {}, dir.path());
  auto path = dir / "heartbeat.log";
  auto text = st::read_file(path);
  auto pos = text.find("SYNCH [");
  ASSERT_NE(pos, std::string::npos);
  auto close = text.find(']', pos);
  char& digit = text[close - 1];
  digit = static_cast<char>('0' + (digit - '0' + 1) % 10);
  st::write_file(path, text);
  auto report = verify_consistency(dir.path());
  ASSERT_EQ(report.issues.size(), 1u);
  EXPECT_EQ(report.issues[0].file, "heartbeat.log");
  EXPECT_EQ(report.issues[0].line, 1);
}

TEST(Generate, TenfoldLatencyIsVisibleInMetricsLog) {
  st::TempDir dir;
  auto w = short_workload(3600);
  auto truth = generate(w, {parse_anomaly("latency_scale:1200-1800:10")}, dir.path());
  ASSERT_EQ(truth.anomalies.size(), 1u);
  const auto a_start = w.start_ms + 1200 * 1000, a_end = w.start_ms + 1800 * 1000;
  EXPECT_EQ(truth.anomalies[0].start_ms, a_start);
  EXPECT_EQ(truth.anomalies[0].end_ms, a_end);

  double in_sum = 0, out_sum = 0;
  int in_n = 0, out_n = 0;
  for (const auto& line : lines_of(dir / "storm-backend-metrics.log")) {
    auto e = std::get<storm::BackendMetricsEvent>(
        storm::parse_line(storm::LogKind::BackendMetrics, line, time::day_start(w.start_ms)));
    if (e.operation != "synch") continue;
    // Lines are stamped at the end of the minute they summarize.
    auto minute = e.timestamp - 60'000;
    if (minute >= a_start && minute < a_end) {
      in_sum += e.mean_ms;
      ++in_n;
    } else {
      out_sum += e.mean_ms;
      ++out_n;
    }
  }
  ASSERT_EQ(in_n, 10);
  ASSERT_GT(out_n, 40);
  double ratio = (in_sum / in_n) / (out_sum / out_n);
  EXPECT_GT(ratio, 8.0);
  EXPECT_LT(ratio, 12.0);
}

TEST(Generate, InvalidSpecsAreRejected) {
  st::TempDir dir;
  auto w = short_workload(0);
  EXPECT_THROW(generate(w, {}, dir.path()), LoggenError);
  EXPECT_THROW(parse_anomaly("latency_scale:10"), LoggenError);
  EXPECT_THROW(parse_anomaly("meteor:0-10"), LoggenError);
  EXPECT_THROW(generate(short_workload(60), {parse_anomaly("rate_spike:30-120:2")}, dir.path()),
               LoggenError);
}

TEST(Truth, JsonRoundTrip) {
  st::TempDir dir;
  auto truth = generate(short_workload(300), {parse_anomaly("latency_scale:60-120:4:srmLs")},
                        dir.path());
  auto text = truth_to_json(truth);
  EXPECT_EQ(truth_to_json(truth_from_json(text)), text);
  EXPECT_EQ(st::read_file(dir / "truth.json"), text + "\n");
}

// Smallest sample value with at least p% of the sample at or below it.
TEST(NearestRank, MatchesCountingDefinition) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> v(1 + rng() % 200);
    for (auto& x : v) x = static_cast<double>(rng() % 50);
    std::sort(v.begin(), v.end());
    for (int p : {1, 50, 95, 99, 100}) {
      double want = v.back();
      for (double x : v) {
        auto at_or_below = std::count_if(v.begin(), v.end(), [&](double y) { return y <= x; });
        if (100 * at_or_below >= p * static_cast<std::int64_t>(v.size())) {
          want = x;
          break;
        }
      }
      ASSERT_EQ(nearest_rank(v, p), want) << "n=" << v.size() << " p=" << p;
    }
  }
}
