#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stormlog/value.hpp"

// Deterministic generator of the five StoRM log streams plus ground truth.
namespace stormlog::loggen {

class LoggenError : public Error {
 public:
  using Error::Error;
};

struct LatencyModel {
  double mean_ms = 10.0;
  double stddev_ms = 2.0;
};

enum class AnomalyKind { LatencyScale, ErrorBurst, RateSpike };

std::string_view to_string(AnomalyKind kind);
std::optional<AnomalyKind> parse_anomaly_kind(std::string_view name);

struct WorkloadSpec {
  std::uint64_t seed = 42;
  std::int64_t start_ms = 0;  // whole second; see defaults()
  std::int64_t duration_seconds = 3600;
  std::map<std::string, double> op_rates;                // events per second
  std::map<std::string, LatencyModel> base_latency_ms;  // per operation
  // Fraction of non-Connection requests that do not succeed; two thirds of
  // them fail, one third errors.
  double error_rate = 0.02;
  std::int64_t heartbeat_period_seconds = 60;
  std::int64_t monitoring_round_seconds = 60;
  // Fraction of users connecting from private address space.
  double private_ip_fraction = 0.1;

  // Default StoRM-like mix starting 2019-06-26T08:00:00Z.
  static WorkloadSpec defaults();
  // Multiplies every operation rate.
  void scale_rates(double factor);
};

struct AnomalySpec {
  std::int64_t start_seconds = 0;  // offset from the workload start
  std::int64_t end_seconds = 0;    // exclusive
  AnomalyKind kind = AnomalyKind::LatencyScale;
  double magnitude = 10.0;
  std::string operation;  // empty: every operation
};

// "<kind>:<start_s>-<end_s>[:magnitude[:operation]]", e.g. latency_scale:3600-4200:10
AnomalySpec parse_anomaly(std::string_view text);

// Operations counted as synchronous in monitoring rounds and backend metrics.
bool is_sync_operation(std::string_view op);
bool is_async_operation(std::string_view op);
// srmLs -> synch.ls
std::string metric_name(std::string_view op);

struct OperationMinute {
  std::int64_t count = 0;
  double mean_ms = 0.0;
  std::vector<double> samples;  // sync operations only
};

struct MinuteTruth {
  std::int64_t start_ms = 0;
  std::int64_t frontend_lines = 0;
  std::int64_t backend_lines = 0;
  std::int64_t sync_count = 0;
  double sync_mean_ms = 0.0;
  std::int64_t async_count = 0;
  std::map<std::string, OperationMinute> operations;
};

struct AnomalyTruth {
  AnomalySpec spec;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  std::string affected_metric;
};

struct GroundTruth {
  std::uint64_t seed = 0;
  std::int64_t start_ms = 0;
  std::int64_t duration_seconds = 0;
  std::vector<AnomalyTruth> anomalies;
  std::map<std::string, std::int64_t> line_counts;  // by file name
  std::int64_t total_lines = 0;
  std::map<std::string, std::int64_t> operation_counts;  // frontend lines
  std::map<std::string, std::int64_t> status_counts;     // frontend levels
  std::vector<MinuteTruth> minutes;                       // by completion time
};

// Writes the five log files and truth.json into out_dir. Identical inputs give
// byte-identical files. Throws LoggenError on invalid specs or I/O failure.
GroundTruth generate(const WorkloadSpec& workload, const std::vector<AnomalySpec>& anomalies,
                     const std::filesystem::path& out_dir);

std::string truth_to_json(const GroundTruth& truth);
GroundTruth truth_from_json(std::string_view text);

struct Inconsistency {
  std::string file;
  std::int64_t line = 0;  // 1-based, 0 for file-level findings
  std::string what;
};

struct ConsistencyReport {
  std::vector<Inconsistency> issues;
  std::int64_t lines_checked = 0;
  std::int64_t parse_failures = 0;

  bool ok() const { return issues.empty(); }
};

// Re-parses a generated directory against its truth.json.
ConsistencyReport verify_consistency(const std::filesystem::path& dir);

// Nearest-rank percentile of an ascending sample; p in (0, 100].
double nearest_rank(const std::vector<double>& sorted, int p);

}  // namespace stormlog::loggen
