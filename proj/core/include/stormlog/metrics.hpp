#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stormlog/index_store.hpp"
#include "stormlog/query.hpp"

// Bucketized univariate series built from index searches.
namespace stormlog::metrics {

class MetricError : public Error {
 public:
  using Error::Error;
};

enum class Detector { Count, Mean, Max, Min, Sum };

std::string_view to_string(Detector detector);
std::optional<Detector> parse_detector(std::string_view name);

struct MetricSpec {
  std::string indices = "*";
  index::Query filter;
  Detector detector = Detector::Count;
  std::string field;  // unused by Count
  std::int64_t bucket_span_seconds = 60;
};

// {"indices":..,"filter":<query>,"detector":..,"field":..,"bucket_span_seconds":..}
MetricSpec parse_metric_spec(std::string_view json_text);
std::string metric_spec_to_json(const MetricSpec& spec);

struct MetricSeries {
  std::int64_t start_ms = 0;  // multiple of the span
  std::int64_t span_seconds = 60;
  std::vector<std::optional<double>> values;
  std::vector<std::int64_t> sample_counts;

  std::int64_t span_ms() const { return span_seconds * 1000; }
  std::int64_t bucket_start(std::size_t i) const {
    return start_ms + static_cast<std::int64_t>(i) * span_ms();
  }
  std::size_t size() const { return values.size(); }

  friend bool operator==(const MetricSeries&, const MetricSeries&) = default;
};

// Buckets cover [floor(from), to) in UTC-aligned spans. Count buckets with no
// documents hold 0; other detectors leave them absent. sample_counts counts
// the documents that contributed (for field detectors, those carrying a
// numeric value). Throws MetricError when the field holds non-numeric values.
MetricSeries build_series(const index::IndexStore& store, const MetricSpec& spec,
                          std::int64_t from_ms, std::int64_t to_ms);

// Same, over an explicit document list (used by offline tools and tests).
MetricSeries build_series(const std::vector<Document>& docs, const MetricSpec& spec,
                          std::int64_t from_ms, std::int64_t to_ms);

enum class GapPolicy { Skip, Zero, Interpolate };

std::optional<GapPolicy> parse_gap_policy(std::string_view name);

MetricSeries gap_fill(MetricSeries series, GapPolicy policy);

// bucket_start,value,sample_count with ISO timestamps; absent values are empty.
std::string series_to_csv(const MetricSeries& series);
// One JSON object per line with the same columns; absent values are null.
std::string series_to_json_lines(const MetricSeries& series);

}  // namespace stormlog::metrics
