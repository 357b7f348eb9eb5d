#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "stormlog/value.hpp"

namespace stormlog::index {

inline constexpr std::string_view kIdField = "id";

class QueryError : public Error {
 public:
  using Error::Error;
};

// Query AST. Terms on keyword fields compare verbatim, on text fields against
// lowercased tokens, on numeric fields by numeric equality. Ranges apply to
// numeric fields only. Unknown fields match nothing. A term on `id` matches
// the document id rather than a stored field.
struct Query {
  enum class Kind { MatchAll, Term, And, Or, Not, Range };

  Kind kind = Kind::MatchAll;
  std::string field;
  FieldValue value;
  std::vector<Query> children;
  std::optional<double> min;
  std::optional<double> max;
  bool include_min = true;
  bool include_max = false;

  static Query match_all() { return {}; }
  static Query term(std::string field, FieldValue value);
  static Query all_of(std::vector<Query> children);
  static Query any_of(std::vector<Query> children);
  static Query negate(Query child);
  static Query range(std::string field, std::optional<double> min, std::optional<double> max,
                     bool include_min = true, bool include_max = false);

  friend bool operator==(const Query&, const Query&) = default;
};

// Structured-text form, e.g.
//   {"and": [{"term": {"field": "status", "value": "ERROR"}},
//            {"range": {"field": "@timestamp", "gte": 1561507200000}}]}
// Range bounds: gte/gt/lte/lt. {"match_all": {}} matches everything.
Query parse_query(std::string_view json_text);
std::string query_to_json(const Query& query);

struct TermsAgg {
  std::string field;
  std::size_t top_n = 10;
};
struct DateHistogramAgg {
  std::int64_t interval_ms = 60'000;
};
struct StatsAgg {
  std::string field;
};
struct GeoGridAgg {
  std::string field = "geo";
  double cell_degrees = 1.0;
};

using Aggregation = std::variant<TermsAgg, DateHistogramAgg, StatsAgg, GeoGridAgg>;

// {"terms": {"field": "status", "size": 5}}, {"date_histogram": {"interval_ms": 60000}},
// {"stats": {"field": "mean_ms"}}, {"geo_grid": {"field": "geo", "cell_degrees": 1.0}}
Aggregation parse_aggregation(std::string_view json_text);

struct TermsBucket {
  std::string key;
  std::uint64_t count = 0;
  friend bool operator==(const TermsBucket&, const TermsBucket&) = default;
};

struct HistogramBucket {
  std::int64_t start_ms = 0;
  std::uint64_t count = 0;
  friend bool operator==(const HistogramBucket&, const HistogramBucket&) = default;
};

struct StatsResult {
  std::uint64_t count = 0;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double sum = 0.0;
  friend bool operator==(const StatsResult&, const StatsResult&) = default;
};

struct GeoCell {
  std::int64_t lat_index = 0;
  std::int64_t lon_index = 0;
  double lat_min = 0.0;
  double lon_min = 0.0;
  double lat_center = 0.0;
  double lon_center = 0.0;
  std::uint64_t count = 0;
  friend bool operator==(const GeoCell&, const GeoCell&) = default;
};

using AggregationResult = std::variant<std::vector<TermsBucket>, std::vector<HistogramBucket>,
                                       StatsResult, std::vector<GeoCell>>;

}  // namespace stormlog::index
