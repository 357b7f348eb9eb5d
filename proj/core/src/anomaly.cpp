#include "stormlog/anomaly.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "stormlog/normal.hpp"
#include "stormlog/time.hpp"

namespace stormlog::anomaly {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kSigmaFloorAbs = 1e-9;
constexpr double kSigmaFloorRel = 1e-6;

void require_finite(double x) {
  if (!std::isfinite(x)) throw AnomalyError("observation must be finite");
}

void validate(const DetectParams& p) {
  if (!(p.decay > 0.0 && p.decay <= 1.0)) throw AnomalyError("decay must be in (0, 1]");
  if (p.warmup_buckets < 1) throw AnomalyError("warmup_buckets must be >= 1");
  if (!(p.k_bound > 0.0)) throw AnomalyError("k_bound must be > 0");
  if (!(p.forecast_beta >= 0.0)) throw AnomalyError("forecast_beta must be >= 0");
  const auto& t = p.thresholds;
  if (!(0.0 <= t.low && t.low <= t.warning && t.warning <= t.major && t.major <= t.critical &&
        t.critical <= 100.0)) {
    throw AnomalyError("thresholds must satisfy 0 <= low <= warning <= major <= critical <= 100");
  }
}

std::string ts(std::int64_t ms) { return time::format_iso8601(ms); }

}  // namespace

std::string_view to_string(Level level) {
  switch (level) {
    case Level::Low: return "low";
    case Level::Warning: return "warning";
    case Level::Major: return "major";
    case Level::Critical: return "critical";
  }
  return "low";
}

std::optional<Level> level_for(double score, const LevelThresholds& t) {
  if (score >= t.critical) return Level::Critical;
  if (score >= t.major) return Level::Major;
  if (score >= t.warning) return Level::Warning;
  if (score >= t.low) return Level::Low;
  return std::nullopt;
}

double BaselineModel::sigma() const {
  double floor = std::max(kSigmaFloorAbs, kSigmaFloorRel * std::fabs(mean));
  return std::max(std::sqrt(std::max(variance, 0.0)), floor);
}

double severity(double tail_p) {
  if (!(tail_p > 0.0)) return 100.0;
  return std::clamp(-10.0 * std::log10(tail_p), 0.0, 100.0);
}

PointScore score_point(const BaselineModel& model, double x, const LevelThresholds& t) {
  require_finite(x);
  if (!model.warmed_up()) throw AnomalyError("model is still in warmup");
  PointScore s;
  s.z = std::fabs(x - model.mean) / model.sigma();
  s.tail_p = normal::two_sided_tail(s.z);
  s.score = severity(s.tail_p);
  s.level = level_for(s.score, t);
  return s;
}

BaselineModel update(BaselineModel m, double x) {
  require_finite(x);
  if (m.observed == 0) {
    m.mean = x;
    m.variance = 0.0;
    m.observed = 1;
    return m;
  }
  double w = m.warmed_up() ? 1.0 - score_point(m, x).score / 100.0 : 1.0;
  double a = m.decay * w;
  double d = x - m.mean;
  m.mean += a * d;
  m.variance = (1.0 - a) * (m.variance + a * d * d);
  ++m.observed;
  return m;
}

BaselineModel make_model(const DetectParams& p) {
  validate(p);
  BaselineModel m;
  m.decay = p.decay;
  m.warmup_buckets = p.warmup_buckets;
  m.k_bound = p.k_bound;
  return m;
}

Detection detect(const metrics::MetricSeries& series, const DetectParams& params) {
  return detect(series, make_model(params), params);
}

Detection detect(const metrics::MetricSeries& series, BaselineModel model,
                 const DetectParams& params) {
  validate(params);
  Detection out;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& v = series.values[i];
    if (!v) continue;
    if (model.warmed_up()) {
      auto s = score_point(model, *v, params.thresholds);
      BoundPoint b{series.bucket_start(i), *v, model.mean, model.lower(), model.upper()};
      out.bounds.push_back(b);
      if (s.level) {
        out.records.push_back(AnomalyRecord{b.bucket_start, i, *v, b.typical, b.lower, b.upper,
                                            s.tail_p, s.score, *s.level});
      }
    }
    model = update(model, *v);
  }
  out.model = model;
  return out;
}

std::vector<ForecastPoint> forecast(const BaselineModel& model, std::int64_t horizon_buckets,
                                    std::int64_t first_bucket_start, std::int64_t span_ms,
                                    double beta) {
  if (!model.warmed_up()) throw AnomalyError("cannot forecast from a model in warmup");
  if (horizon_buckets < 1) throw AnomalyError("forecast horizon must be >= 1");
  if (!(beta >= 0.0)) throw AnomalyError("forecast_beta must be >= 0");
  std::vector<ForecastPoint> out;
  out.reserve(static_cast<std::size_t>(horizon_buckets));
  const double sigma = model.sigma();
  for (std::int64_t h = 1; h <= horizon_buckets; ++h) {
    double half = model.k_bound * sigma * std::sqrt(1.0 + beta * static_cast<double>(h));
    out.push_back(ForecastPoint{first_bucket_start + (h - 1) * span_ms, h, model.mean,
                                model.mean - half, model.mean + half});
  }
  return out;
}

JobConfig parse_job(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw AnomalyError(std::string("job config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw AnomalyError("job config must be an object");
  auto metric = j.find("metric");
  if (metric == j.end() || !metric->is_object()) throw AnomalyError("job needs a 'metric' object");
  JobConfig job;
  try {
    job.metric = metrics::parse_metric_spec(metric->dump());
  } catch (const Error& e) {
    throw AnomalyError(std::string("metric: ") + e.what());
  }
  auto instant = [&](const char* key) -> std::optional<std::int64_t> {
    auto it = j.find(key);
    if (it == j.end()) return std::nullopt;
    if (!it->is_string()) throw AnomalyError(std::string("'") + key + "' must be a string");
    auto t = time::parse_instant(it->get<std::string>());
    if (!t) throw AnomalyError(std::string("'") + key + "' is not a valid instant");
    return t;
  };
  job.from_ms = instant("from");
  job.to_ms = instant("to");
  try {
    auto gap = j.value("gap_fill", std::string("skip"));
    auto g = metrics::parse_gap_policy(gap);
    if (!g) throw AnomalyError("unknown gap_fill '" + gap + "'");
    job.gap_fill = *g;
    auto& p = job.params;
    p.decay = j.value("decay", p.decay);
    p.warmup_buckets = j.value("warmup_buckets", p.warmup_buckets);
    p.k_bound = j.value("k_bound", p.k_bound);
    p.forecast_beta = j.value("forecast_beta", p.forecast_beta);
    if (auto t = j.find("thresholds"); t != j.end()) {
      if (!t->is_object()) throw AnomalyError("'thresholds' must be an object");
      p.thresholds.low = t->value("low", p.thresholds.low);
      p.thresholds.warning = t->value("warning", p.thresholds.warning);
      p.thresholds.major = t->value("major", p.thresholds.major);
      p.thresholds.critical = t->value("critical", p.thresholds.critical);
    }
  } catch (const json::exception& e) {
    throw AnomalyError(std::string("job config: ") + e.what());
  }
  validate(job.params);
  return job;
}

std::string records_to_csv(const std::vector<AnomalyRecord>& records) {
  std::string out = "bucket_start,actual,typical,lower,upper,score,level\n";
  for (const auto& r : records) {
    out += ts(r.bucket_start) + "," + format_double(r.actual) + "," + format_double(r.typical) +
           "," + format_double(r.lower) + "," + format_double(r.upper) + "," +
           format_double(r.score) + "," + std::string(to_string(r.level)) + "\n";
  }
  return out;
}

std::string records_to_json_lines(const std::vector<AnomalyRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    ordered_json j;
    j["bucket_start"] = ts(r.bucket_start);
    j["actual"] = r.actual;
    j["typical"] = r.typical;
    j["lower"] = r.lower;
    j["upper"] = r.upper;
    j["tail_p"] = r.tail_p;
    j["score"] = r.score;
    j["level"] = to_string(r.level);
    out += j.dump() + "\n";
  }
  return out;
}

std::string bounds_to_csv(const std::vector<BoundPoint>& bounds) {
  std::string out = "bucket_start,actual,typical,lower,upper\n";
  for (const auto& b : bounds) {
    out += ts(b.bucket_start) + "," + format_double(b.actual) + "," + format_double(b.typical) +
           "," + format_double(b.lower) + "," + format_double(b.upper) + "\n";
  }
  return out;
}

std::string bounds_to_json_lines(const std::vector<BoundPoint>& bounds) {
  std::string out;
  for (const auto& b : bounds) {
    ordered_json j;
    j["bucket_start"] = ts(b.bucket_start);
    j["actual"] = b.actual;
    j["typical"] = b.typical;
    j["lower"] = b.lower;
    j["upper"] = b.upper;
    out += j.dump() + "\n";
  }
  return out;
}

std::string forecast_to_csv(const std::vector<ForecastPoint>& points) {
  std::string out = "bucket_start,horizon,predicted,lower,upper\n";
  for (const auto& p : points) {
    out += ts(p.bucket_start) + "," + std::to_string(p.horizon) + "," +
           format_double(p.predicted) + "," + format_double(p.lower) + "," +
           format_double(p.upper) + "\n";
  }
  return out;
}

std::string forecast_to_json_lines(const std::vector<ForecastPoint>& points) {
  std::string out;
  for (const auto& p : points) {
    ordered_json j;
    j["bucket_start"] = ts(p.bucket_start);
    j["horizon"] = p.horizon;
    j["predicted"] = p.predicted;
    j["lower"] = p.lower;
    j["upper"] = p.upper;
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace stormlog::anomaly
