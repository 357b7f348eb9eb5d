#include "stormlog/pipeline.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "stormlog/embedded_config.hpp"
#include "stormlog/index_store.hpp"
#include "stormlog/time.hpp"

namespace stormlog::pipeline {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

const std::set<std::string, std::less<>> kDateFormats = {"iso8601", "HH:mm:ss.SSS",
                                                         "epoch_millis"};

struct StageContext {
  std::string route;
  std::size_t index = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw PipelineError("route '" + route + "' stage " + std::to_string(index) + ": " + what);
  }
};

std::string require_string(const json& j, const char* key, const StageContext& ctx) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) ctx.fail(std::string("missing string '") + key + "'");
  return it->get<std::string>();
}

std::string optional_string(const json& j, const char* key, std::string fallback,
                            const StageContext& ctx) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_string()) ctx.fail(std::string("'") + key + "' must be a string");
  return it->get<std::string>();
}

FieldValue json_to_value(const json& j, const StageContext& ctx) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  ctx.fail("values must be strings or numbers");
}

GrokStage parse_grok(const json& j, const grok::PatternLibrary& library,
                     const StageContext& ctx) {
  GrokStage stage;
  stage.field = optional_string(j, "field", "message", ctx);
  auto it = j.find("patterns");
  if (it == j.end() || !it->is_array() || it->empty()) {
    ctx.fail("grok needs a non-empty 'patterns' array");
  }
  for (const auto& p : *it) {
    if (!p.is_string()) ctx.fail("grok patterns must be strings");
    auto expr = p.get<std::string>();
    try {
      stage.patterns.push_back(grok::compile(library, expr));
    } catch (const grok::PatternError& e) {
      ctx.fail(std::string("grok: ") + e.what());
    }
    stage.expressions.push_back(std::move(expr));
  }
  return stage;
}

DateStage parse_date_stage(const json& j, const StageContext& ctx) {
  DateStage stage;
  stage.field = require_string(j, "field", ctx);
  if (stage.field == kTimestampField) ctx.fail("date source cannot be @timestamp");
  auto it = j.find("formats");
  if (it == j.end() || !it->is_array() || it->empty()) {
    ctx.fail("date needs a non-empty 'formats' array");
  }
  for (const auto& f : *it) {
    if (!f.is_string() || !kDateFormats.contains(f.get<std::string>())) {
      ctx.fail("unknown date format " + f.dump());
    }
    stage.formats.push_back(f.get<std::string>());
  }
  if (auto rs = j.find("remove_source"); rs != j.end()) {
    if (!rs->is_boolean()) ctx.fail("'remove_source' must be a boolean");
    stage.remove_source = rs->get<bool>();
  }
  return stage;
}

GeoStage parse_geo(const json& j, const std::shared_ptr<const geo::GeoTable>& table,
                   const StageContext& ctx) {
  if (!table) ctx.fail("geo stage requires a 'geo_table'");
  GeoStage stage;
  stage.field = optional_string(j, "field", "client_ip", ctx);
  stage.target = optional_string(j, "target", "geo", ctx);
  stage.label_target = optional_string(j, "label_target", "geo_label", ctx);
  stage.table = table;
  return stage;
}

MutateStage parse_mutate(const json& j, const StageContext& ctx) {
  MutateStage stage;
  if (auto it = j.find("rename"); it != j.end()) {
    if (!it->is_object()) ctx.fail("'rename' must be an object");
    for (const auto& [from, to] : it->items()) {
      if (!to.is_string()) ctx.fail("rename targets must be strings");
      stage.renames.emplace_back(from, to.get<std::string>());
    }
  }
  if (auto it = j.find("remove"); it != j.end()) {
    if (!it->is_array()) ctx.fail("'remove' must be an array");
    for (const auto& f : *it) {
      if (!f.is_string()) ctx.fail("remove entries must be strings");
      stage.removals.push_back(f.get<std::string>());
    }
  }
  if (auto it = j.find("add"); it != j.end()) {
    if (!it->is_object()) ctx.fail("'add' must be an object");
    for (const auto& [name, v] : it->items()) {
      stage.adds.emplace_back(name, json_to_value(v, ctx));
    }
  }
  return stage;
}

DropStage parse_drop(const json& j, const StageContext& ctx) {
  auto it = j.find("if");
  if (it == j.end() || !it->is_object()) ctx.fail("drop needs an 'if' object");
  DropStage stage;
  stage.field = require_string(*it, "field", ctx);
  if (auto eq = it->find("equals"); eq != it->end()) {
    if (eq->is_array()) {
      for (const auto& v : *eq) stage.values.push_back(json_to_value(v, ctx));
    } else {
      stage.values.push_back(json_to_value(*eq, ctx));
    }
  }
  return stage;
}

bool sets_timestamp(const GrokStage& g) {
  for (const auto& pattern : g.patterns) {
    for (const auto& c : pattern.captures()) {
      if (c.field == kTimestampField) return true;
    }
  }
  return false;
}

bool touches_timestamp(const MutateStage& m) {
  for (const auto& [from, to] : m.renames) {
    if (from == kTimestampField || to == kTimestampField) return true;
  }
  for (const auto& f : m.removals) {
    if (f == kTimestampField) return true;
  }
  for (const auto& [name, v] : m.adds) {
    if (name == kTimestampField) return true;
  }
  return false;
}

bool values_equal(const FieldValue& a, const FieldValue& b) {
  if (is_numeric(a) && is_numeric(b)) return as_double(a) == as_double(b);
  return a == b;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::optional<std::int64_t> apply_format(std::string_view format, const FieldValue& value,
                                         const ship::RawRecord& record) {
  if (format == "epoch_millis") {
    if (const auto* i = std::get_if<std::int64_t>(&value)) return *i;
    if (const auto* s = std::get_if<std::string>(&value)) {
      std::int64_t out = 0;
      auto [p, ec] = std::from_chars(s->data(), s->data() + s->size(), out);
      if (ec == std::errc{} && p == s->data() + s->size()) return out;
    }
    return std::nullopt;
  }
  // A timestamp capture arrives already converted to epoch millis.
  if (const auto* i = std::get_if<std::int64_t>(&value); i && format == "iso8601") return *i;
  const auto* s = std::get_if<std::string>(&value);
  if (!s) return std::nullopt;
  if (format == "iso8601") return time::parse_iso8601(*s);
  auto tod = time::parse_time_of_day(*s);
  if (!tod) return std::nullopt;
  return record.context_day_ms + *tod;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PipelineError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string_view stage_name(const FilterStage& stage) {
  struct Names {
    std::string_view operator()(const GrokStage&) const { return "grok"; }
    std::string_view operator()(const DateStage&) const { return "date"; }
    std::string_view operator()(const GeoStage&) const { return "geo"; }
    std::string_view operator()(const MutateStage&) const { return "mutate"; }
    std::string_view operator()(const DropStage&) const { return "drop"; }
  };
  return std::visit(Names{}, stage);
}

FieldValue to_field_value(const grok::TypedValue& value) {
  struct Conv {
    FieldValue operator()(std::int64_t v) const { return v; }
    FieldValue operator()(double v) const { return v; }
    FieldValue operator()(const std::string& v) const { return v; }
    FieldValue operator()(const grok::IpAddress& v) const { return v.text; }
    FieldValue operator()(const grok::Timestamp& v) const { return v.epoch_ms; }
    FieldValue operator()(LogLevel v) const { return std::string(to_string(v)); }
  };
  return std::visit(Conv{}, value);
}

Pipeline load_pipeline(std::string_view config, const FileResolver& resolve) {
  json root;
  try {
    root = json::parse(config);
  } catch (const json::exception& e) {
    throw PipelineError(std::string("pipeline config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw PipelineError("pipeline config must be an object");

  Pipeline p;
  try {
    if (auto it = root.find("pattern_files"); it != root.end()) {
      if (!it->is_array()) throw PipelineError("'pattern_files' must be an array");
      for (const auto& f : *it) {
        if (!f.is_string()) throw PipelineError("'pattern_files' entries must be strings");
        p.library_.merge(resolve(f.get<std::string>()));
      }
    }
    if (auto it = root.find("patterns"); it != root.end()) {
      if (!it->is_array()) throw PipelineError("'patterns' must be an array");
      std::string defs;
      for (const auto& line : *it) {
        if (!line.is_string()) throw PipelineError("'patterns' entries must be strings");
        defs += line.get<std::string>() + "\n";
      }
      p.library_.merge(defs);
    }
  } catch (const grok::PatternError& e) {
    throw PipelineError(std::string("pattern definitions: ") + e.what());
  }

  std::shared_ptr<const geo::GeoTable> table;
  if (auto it = root.find("geo_table"); it != root.end()) {
    if (!it->is_string()) throw PipelineError("'geo_table' must be a string");
    try {
      table = std::make_shared<const geo::GeoTable>(
          geo::GeoTable::from_csv(resolve(it->get<std::string>())));
    } catch (const geo::GeoError& e) {
      throw PipelineError(std::string("geo table: ") + e.what());
    }
  }

  auto routes = root.find("routes");
  if (routes == root.end() || !routes->is_object() || routes->empty()) {
    throw PipelineError("pipeline config needs a non-empty 'routes' object");
  }
  for (const auto& [name, stages] : routes->items()) {
    auto kind = storm::parse_slug(name);
    if (!kind) throw PipelineError("unknown route '" + name + "'");
    if (!stages.is_array()) throw PipelineError("route '" + name + "' must be an array");
    std::vector<FilterStage> chain;
    bool has_date = false;
    for (std::size_t i = 0; i < stages.size(); ++i) {
      StageContext ctx{name, i};
      const auto& s = stages[i];
      if (!s.is_object()) ctx.fail("stage must be an object");
      auto type = require_string(s, "type", ctx);
      if (type == "grok") {
        auto g = parse_grok(s, p.library_, ctx);
        if (has_date && sets_timestamp(g)) {
          ctx.fail("grok after a date stage may not set @timestamp");
        }
        chain.emplace_back(std::move(g));
      } else if (type == "date") {
        chain.emplace_back(parse_date_stage(s, ctx));
        has_date = true;
      } else if (type == "geo") {
        auto g = parse_geo(s, table, ctx);
        if (g.target == kTimestampField || g.label_target == kTimestampField) {
          ctx.fail("geo may not write @timestamp");
        }
        chain.emplace_back(std::move(g));
      } else if (type == "mutate") {
        auto m = parse_mutate(s, ctx);
        if (touches_timestamp(m)) ctx.fail("mutate may not modify @timestamp");
        chain.emplace_back(std::move(m));
      } else if (type == "drop") {
        chain.emplace_back(parse_drop(s, ctx));
      } else {
        ctx.fail("unknown stage type '" + type + "'");
      }
    }
    p.routes_[*kind] = std::move(chain);
  }
  return p;
}

Pipeline load_pipeline_file(const std::filesystem::path& path) {
  auto dir = path.parent_path();
  return load_pipeline(read_file(path),
                       [&](const std::string& name) { return read_file(dir / name); });
}

std::string_view default_config_text() { return embedded::kPipelineJson; }
std::string_view default_patterns_text() { return embedded::kStormPatterns; }
std::string_view default_geo_csv() { return embedded::kGeoCsv; }

Pipeline default_pipeline() {
  return load_pipeline(default_config_text(), [](const std::string& name) -> std::string {
    if (name == "storm.patterns") return std::string(default_patterns_text());
    if (name == "geo.csv") return std::string(default_geo_csv());
    throw PipelineError("no bundled file named '" + name + "'");
  });
}

const std::vector<FilterStage>& Pipeline::route(storm::LogKind kind) const {
  auto it = routes_.find(kind);
  if (it == routes_.end()) {
    throw PipelineError("no route for kind '" + std::string(storm::slug(kind)) + "'");
  }
  return it->second;
}

std::string document_id(const ship::RawRecord& record) {
  std::string key = record.source;
  key += '\n';
  key += std::to_string(record.offset);
  key += '\n';
  key += record.line;
  return hex64(index::stable_hash(key));
}

std::string index_name_for(storm::LogKind kind, std::int64_t timestamp_ms) {
  return "storm-" + std::string(storm::slug(kind)) + "-" +
         time::format_date_dotted(timestamp_ms);
}

Outcome Pipeline::process(const ship::RawRecord& record) const {
  auto routed = routes_.find(record.kind);
  if (routed == routes_.end()) {
    return DeadLetter{record, "route",
                      "no route for kind '" + std::string(storm::slug(record.kind)) + "'"};
  }

  FieldMap fields;
  fields["message"] = record.line;

  const auto& chain = routed->second;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const auto& stage = chain[i];
    if (const auto* g = std::get_if<GrokStage>(&stage)) {
      auto src = fields.find(g->field);
      const auto* text = src == fields.end() ? nullptr : std::get_if<std::string>(&src->second);
      if (!text) return DeadLetter{record, "grok", "field '" + g->field + "' is not text"};
      std::optional<grok::MatchResult> m;
      for (const auto& pattern : g->patterns) {
        m = pattern.match(*text);
        if (m) break;
      }
      if (!m) return DeadLetter{record, "grok", "no pattern matched '" + g->field + "'"};
      for (auto& [name, value] : m->fields) fields[name] = to_field_value(value);
    } else if (const auto* d = std::get_if<DateStage>(&stage)) {
      auto src = fields.find(d->field);
      if (src == fields.end()) {
        return DeadLetter{record, "date", "missing field '" + d->field + "'"};
      }
      std::optional<std::int64_t> ts;
      for (const auto& f : d->formats) {
        ts = apply_format(f, src->second, record);
        if (ts) break;
      }
      if (!ts) return DeadLetter{record, "date", "unparseable '" + d->field + "'"};
      if (d->remove_source) fields.erase(src);
      fields[std::string(kTimestampField)] = *ts;
    } else if (const auto* geo = std::get_if<GeoStage>(&stage)) {
      auto src = fields.find(geo->field);
      if (src == fields.end()) continue;
      const auto* ip = std::get_if<std::string>(&src->second);
      if (!ip) continue;
      if (auto hit = geo->table->lookup(*ip)) {
        fields[geo->target] = GeoPoint{hit->lat, hit->lon};
        if (!geo->label_target.empty()) fields[geo->label_target] = hit->label;
      }
    } else if (const auto* mu = std::get_if<MutateStage>(&stage)) {
      for (const auto& [from, to] : mu->renames) {
        auto node = fields.extract(from);
        if (node) {
          node.key() = to;
          fields.insert_or_assign(to, std::move(node.mapped()));
        }
      }
      for (const auto& f : mu->removals) fields.erase(f);
      for (const auto& [name, v] : mu->adds) fields[name] = v;
    } else if (const auto* dr = std::get_if<DropStage>(&stage)) {
      auto src = fields.find(dr->field);
      if (src == fields.end()) continue;
      if (dr->values.empty()) return Dropped{i};
      for (const auto& v : dr->values) {
        if (values_equal(src->second, v)) return Dropped{i};
      }
    }
  }

  auto ts = fields.find(kTimestampField);
  if (ts == fields.end() || !std::holds_alternative<std::int64_t>(ts->second)) {
    return DeadLetter{record, "route", "no @timestamp after filtering"};
  }
  Document doc;
  doc.index_name = index_name_for(record.kind, std::get<std::int64_t>(ts->second));
  doc.id = document_id(record);
  fields["message"] = record.line;
  fields["beat.name"] = record.beat_name;
  fields["offset"] = record.offset;
  fields["type"] = record.doc_type;
  fields["kind"] = std::string(storm::slug(record.kind));
  fields["source"] = record.source;
  doc.fields = std::move(fields);
  return doc;
}

std::string dead_letter_to_text(const DeadLetter& letter) {
  ordered_json j;
  j["stage"] = letter.stage;
  j["reason"] = letter.reason;
  j["record"] = ordered_json::parse(ship::record_to_text(letter.raw));
  return j.dump();
}

DeadLetter dead_letter_from_text(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw PipelineError(std::string("malformed dead letter: ") + e.what());
  }
  if (!j.is_object() || !j.contains("record") || !j.contains("stage") ||
      !j.contains("reason")) {
    throw PipelineError("malformed dead letter: missing keys");
  }
  DeadLetter d;
  d.stage = j["stage"].get<std::string>();
  d.reason = j["reason"].get<std::string>();
  d.raw = ship::record_from_text(j["record"].dump());
  return d;
}

}  // namespace stormlog::pipeline
