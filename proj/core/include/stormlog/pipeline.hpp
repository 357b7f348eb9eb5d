#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "stormlog/document.hpp"
#include "stormlog/geo.hpp"
#include "stormlog/pattern_engine.hpp"
#include "stormlog/shipper.hpp"
#include "stormlog/storm_codecs.hpp"

// Filter chain turning shipped records into indexable documents (the Logstash
// analog). Every record ends as exactly one Document, DeadLetter or Dropped.
namespace stormlog::pipeline {

class PipelineError : public Error {
 public:
  using Error::Error;
};

struct GrokStage {
  std::string field = "message";
  // Tried in order; the first full match wins.
  std::vector<std::string> expressions;
  std::vector<grok::CompiledPattern> patterns;
};

struct DateStage {
  std::string field;
  // "iso8601", "HH:mm:ss.SSS" (combined with the record's context date) or
  // "epoch_millis".
  std::vector<std::string> formats;
  bool remove_source = true;
};

struct GeoStage {
  std::string field = "client_ip";
  std::string target = "geo";
  std::string label_target = "geo_label";
  std::shared_ptr<const geo::GeoTable> table;
};

struct MutateStage {
  std::vector<std::pair<std::string, std::string>> renames;
  std::vector<std::string> removals;
  std::vector<std::pair<std::string, FieldValue>> adds;
};

struct DropStage {
  std::string field;
  // Empty: drop when the field exists. Otherwise drop when it equals any.
  std::vector<FieldValue> values;
};

using FilterStage = std::variant<GrokStage, DateStage, GeoStage, MutateStage, DropStage>;

std::string_view stage_name(const FilterStage& stage);

struct DeadLetter {
  ship::RawRecord raw;
  std::string stage;
  std::string reason;
};

struct Dropped {
  std::size_t stage_index = 0;
};

using Outcome = std::variant<Document, DeadLetter, Dropped>;

// Resolves file names referenced from a pipeline config.
using FileResolver = std::function<std::string(const std::string& name)>;

class Pipeline {
 public:
  Outcome process(const ship::RawRecord& record) const;

  const std::vector<FilterStage>& route(storm::LogKind kind) const;
  bool has_route(storm::LogKind kind) const { return routes_.contains(kind); }
  const grok::PatternLibrary& library() const { return library_; }

 private:
  friend Pipeline load_pipeline(std::string_view, const FileResolver&);

  grok::PatternLibrary library_;
  std::map<storm::LogKind, std::vector<FilterStage>> routes_;
};

// Config schema (JSON):
//   {
//     "pattern_files": ["storm.patterns"],     optional
//     "patterns": ["NAME body", ...],          optional, inline definitions
//     "geo_table": "geo.csv",                  optional
//     "routes": {"<kind slug>": [stage, ...], ...}
//   }
// with stages {"type": "grok"|"date"|"geo"|"mutate"|"drop", ...}. See
// docs/pipeline.md. Throws PipelineError naming the route and stage index.
// Once a date stage has run nothing may rewrite @timestamp: mutate and geo
// never write it, and a later grok may not capture it. Records that reach the
// end of their route without an integer @timestamp become dead letters.
Pipeline load_pipeline(std::string_view config, const FileResolver& resolve);

// Resolves referenced files relative to the config's directory.
Pipeline load_pipeline_file(const std::filesystem::path& path);

// The built-in five-kind pipeline with the bundled patterns and geo table.
Pipeline default_pipeline();
std::string_view default_config_text();
std::string_view default_patterns_text();
std::string_view default_geo_csv();

// Hex FNV-1a of source, offset and line; stable across re-delivery.
std::string document_id(const ship::RawRecord& record);
// storm-<kind>-YYYY.MM.DD
std::string index_name_for(storm::LogKind kind, std::int64_t timestamp_ms);

std::string dead_letter_to_text(const DeadLetter& letter);
DeadLetter dead_letter_from_text(std::string_view line);

FieldValue to_field_value(const grok::TypedValue& value);

struct RunCounts {
  std::size_t inputs = 0;
  std::size_t documents = 0;
  std::size_t dead_letters = 0;
  std::size_t dropped = 0;
};

}  // namespace stormlog::pipeline
