#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stormlog/metrics.hpp"

// Online anomaly detection over a metric series: an exponentially weighted
// Gaussian baseline, tail-probability severity in [0, 100], and a flat
// forecast.
namespace stormlog::anomaly {

class AnomalyError : public Error {
 public:
  using Error::Error;
};

enum class Level { Low, Warning, Major, Critical };

std::string_view to_string(Level level);

// Lower edges of each level; scores below `low` carry no level.
struct LevelThresholds {
  double low = 5.0;
  double warning = 25.0;
  double major = 50.0;
  double critical = 75.0;
};

std::optional<Level> level_for(double score, const LevelThresholds& thresholds = {});

struct BaselineModel {
  double mean = 0.0;
  double variance = 0.0;
  double decay = 0.02;
  std::int64_t warmup_buckets = 20;
  std::int64_t observed = 0;
  double k_bound = 3.0;

  // sqrt(variance) floored at max(1e-9, 1e-6 * |mean|).
  double sigma() const;
  bool warmed_up() const { return observed >= warmup_buckets; }
  double lower() const { return mean - k_bound * sigma(); }
  double upper() const { return mean + k_bound * sigma(); }

  friend bool operator==(const BaselineModel&, const BaselineModel&) = default;
};

// clamp(-10 log10(p), 0, 100)
double severity(double tail_p);

struct PointScore {
  double z = 0.0;
  double tail_p = 1.0;
  double score = 0.0;
  std::optional<Level> level;
};

// Throws AnomalyError during warmup or for non-finite x.
PointScore score_point(const BaselineModel& model, double x,
                       const LevelThresholds& thresholds = {});

// One observation. Past warmup the step is scaled by 1 - score/100 so outliers
// barely move the baseline. Throws AnomalyError for non-finite x.
BaselineModel update(BaselineModel model, double x);

struct DetectParams {
  double decay = 0.02;
  std::int64_t warmup_buckets = 20;
  double k_bound = 3.0;
  LevelThresholds thresholds;
  double forecast_beta = 0.05;
};

BaselineModel make_model(const DetectParams& params);

struct BoundPoint {
  std::int64_t bucket_start = 0;
  double actual = 0.0;
  double typical = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct AnomalyRecord {
  std::int64_t bucket_start = 0;
  std::size_t bucket_index = 0;
  double actual = 0.0;
  double typical = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double tail_p = 1.0;
  double score = 0.0;
  Level level = Level::Low;
};

struct Detection {
  // Model bounds at evaluation time for every scored (post-warmup, present)
  // bucket.
  std::vector<BoundPoint> bounds;
  // Scored buckets with score >= thresholds.low.
  std::vector<AnomalyRecord> records;
  BaselineModel model;
};

// Sequential pass: score against the current model, record, then update.
// Absent buckets neither score nor update.
Detection detect(const metrics::MetricSeries& series, const DetectParams& params = {});
Detection detect(const metrics::MetricSeries& series, BaselineModel model,
                 const DetectParams& params);

struct ForecastPoint {
  std::int64_t bucket_start = 0;
  std::int64_t horizon = 0;
  double predicted = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

// Horizon h = 1..horizon_buckets, band mean ± k·σ·sqrt(1 + beta·h). Throws
// AnomalyError during warmup or when horizon_buckets < 1.
std::vector<ForecastPoint> forecast(const BaselineModel& model, std::int64_t horizon_buckets,
                                    std::int64_t first_bucket_start, std::int64_t span_ms,
                                    double beta = 0.05);

// A detection job: the metric to build and the detector parameters.
//   {"metric": {...metric spec...}, "from": ISO, "to": ISO, "gap_fill": "skip",
//    "decay": 0.02, "warmup_buckets": 20, "k_bound": 3.0, "forecast_beta": 0.05,
//    "thresholds": {"low": 5, "warning": 25, "major": 50, "critical": 75}}
struct JobConfig {
  metrics::MetricSpec metric;
  std::optional<std::int64_t> from_ms;
  std::optional<std::int64_t> to_ms;
  metrics::GapPolicy gap_fill = metrics::GapPolicy::Skip;
  DetectParams params;
};

// Throws AnomalyError on invalid configs.
JobConfig parse_job(std::string_view json_text);

// bucket_start,actual,typical,lower,upper,score,level
std::string records_to_csv(const std::vector<AnomalyRecord>& records);
std::string records_to_json_lines(const std::vector<AnomalyRecord>& records);
// bucket_start,actual,typical,lower,upper
std::string bounds_to_csv(const std::vector<BoundPoint>& bounds);
std::string bounds_to_json_lines(const std::vector<BoundPoint>& bounds);
// bucket_start,horizon,predicted,lower,upper
std::string forecast_to_csv(const std::vector<ForecastPoint>& points);
std::string forecast_to_json_lines(const std::vector<ForecastPoint>& points);

}  // namespace stormlog::anomaly
