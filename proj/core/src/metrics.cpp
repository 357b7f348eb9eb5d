#include "stormlog/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "stormlog/time.hpp"

namespace stormlog::metrics {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Detector detector) {
  switch (detector) {
    case Detector::Count: return "count";
    case Detector::Mean: return "mean";
    case Detector::Max: return "max";
    case Detector::Min: return "min";
    case Detector::Sum: return "sum";
  }
  return "count";
}

std::optional<Detector> parse_detector(std::string_view name) {
  for (auto d : {Detector::Count, Detector::Mean, Detector::Max, Detector::Min, Detector::Sum}) {
    if (to_string(d) == name) return d;
  }
  return std::nullopt;
}

MetricSpec parse_metric_spec(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw MetricError(std::string("metric spec is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw MetricError("metric spec must be an object");
  MetricSpec spec;
  try {
    spec.indices = j.value("indices", std::string("*"));
    if (auto f = j.find("filter"); f != j.end()) spec.filter = index::parse_query(f->dump());
    auto det = j.value("detector", std::string("count"));
    auto d = parse_detector(det);
    if (!d) throw MetricError("unknown detector '" + det + "'");
    spec.detector = *d;
    spec.field = j.value("field", std::string());
    spec.bucket_span_seconds = j.value("bucket_span_seconds", std::int64_t{60});
  } catch (const json::exception& e) {
    throw MetricError(std::string("metric spec: ") + e.what());
  }
  if (spec.bucket_span_seconds < 1) throw MetricError("bucket_span_seconds must be >= 1");
  if (spec.detector != Detector::Count && spec.field.empty()) {
    throw MetricError("detector '" + std::string(to_string(spec.detector)) +
                      "' needs a field");
  }
  return spec;
}

std::string metric_spec_to_json(const MetricSpec& spec) {
  ordered_json j;
  j["indices"] = spec.indices;
  j["filter"] = ordered_json::parse(index::query_to_json(spec.filter));
  j["detector"] = to_string(spec.detector);
  if (spec.detector != Detector::Count) j["field"] = spec.field;
  j["bucket_span_seconds"] = spec.bucket_span_seconds;
  return j.dump();
}

MetricSeries build_series(const std::vector<Document>& docs, const MetricSpec& spec,
                          std::int64_t from_ms, std::int64_t to_ms) {
  if (from_ms >= to_ms) throw MetricError("series range must satisfy from < to");
  if (spec.bucket_span_seconds < 1) throw MetricError("bucket_span_seconds must be >= 1");
  MetricSeries s;
  s.span_seconds = spec.bucket_span_seconds;
  const std::int64_t span = s.span_ms();
  s.start_ms = time::floor_to(from_ms, span);
  const auto n = static_cast<std::size_t>((to_ms - s.start_ms + span - 1) / span);
  s.sample_counts.assign(n, 0);

  std::vector<double> acc(n, 0.0);
  for (const auto& doc : docs) {
    auto ts = doc.timestamp();
    if (!ts || *ts < from_ms || *ts >= to_ms) continue;
    auto b = static_cast<std::size_t>((*ts - s.start_ms) / span);
    if (spec.detector == Detector::Count) {
      ++s.sample_counts[b];
      continue;
    }
    const auto* v = doc.find(spec.field);
    if (!v) continue;
    if (!is_numeric(*v)) {
      throw MetricError("field '" + spec.field + "' is not numeric in document " + doc.id);
    }
    double x = as_double(*v);
    auto& count = s.sample_counts[b];
    switch (spec.detector) {
      case Detector::Mean:
      case Detector::Sum: acc[b] += x; break;
      case Detector::Max: acc[b] = count == 0 ? x : std::max(acc[b], x); break;
      case Detector::Min: acc[b] = count == 0 ? x : std::min(acc[b], x); break;
      case Detector::Count: break;
    }
    ++count;
  }

  s.values.resize(n);
  for (std::size_t b = 0; b < n; ++b) {
    auto count = s.sample_counts[b];
    if (spec.detector == Detector::Count) {
      s.values[b] = static_cast<double>(count);
    } else if (count > 0) {
      s.values[b] = spec.detector == Detector::Mean ? acc[b] / static_cast<double>(count)
                                                    : acc[b];
    }
  }
  return s;
}

MetricSeries build_series(const index::IndexStore& store, const MetricSpec& spec,
                          std::int64_t from_ms, std::int64_t to_ms) {
  if (from_ms >= to_ms) throw MetricError("series range must satisfy from < to");
  auto docs = store.search(spec.indices, spec.filter, index::TimeRange{from_ms, to_ms});
  return build_series(docs, spec, from_ms, to_ms);
}

std::optional<GapPolicy> parse_gap_policy(std::string_view name) {
  if (name == "skip") return GapPolicy::Skip;
  if (name == "zero") return GapPolicy::Zero;
  if (name == "interpolate") return GapPolicy::Interpolate;
  return std::nullopt;
}

MetricSeries gap_fill(MetricSeries series, GapPolicy policy) {
  auto& v = series.values;
  switch (policy) {
    case GapPolicy::Skip: break;
    case GapPolicy::Zero:
      for (auto& x : v) {
        if (!x) x = 0.0;
      }
      break;
    case GapPolicy::Interpolate: {
      std::optional<std::size_t> prev;
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i]) continue;
        if (prev && i > *prev + 1) {
          double a = *v[*prev];
          double b = *v[i];
          double width = static_cast<double>(i - *prev);
          for (std::size_t k = *prev + 1; k < i; ++k) {
            v[k] = a + (b - a) * static_cast<double>(k - *prev) / width;
          }
        }
        prev = i;
      }
      break;
    }
  }
  return series;
}

std::string series_to_csv(const MetricSeries& series) {
  std::string out = "bucket_start,value,sample_count\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    out += time::format_iso8601(series.bucket_start(i));
    out += ',';
    if (series.values[i]) out += format_double(*series.values[i]);
    out += ',';
    out += std::to_string(series.sample_counts[i]);
    out += '\n';
  }
  return out;
}

std::string series_to_json_lines(const MetricSeries& series) {
  std::string out;
  for (std::size_t i = 0; i < series.size(); ++i) {
    ordered_json j;
    j["bucket_start"] = time::format_iso8601(series.bucket_start(i));
    j["value"] = series.values[i] ? ordered_json(*series.values[i]) : ordered_json(nullptr);
    j["sample_count"] = series.sample_counts[i];
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace stormlog::metrics
