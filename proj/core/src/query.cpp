#include "stormlog/query.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "stormlog/document.hpp"

namespace stormlog {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json value_to_json(const FieldValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  const auto& g = std::get<GeoPoint>(v);
  ordered_json j;
  j["lat"] = g.lat;
  j["lon"] = g.lon;
  return j;
}

std::optional<FieldValue> value_from_json(const json& j) {
  if (j.is_string()) return FieldValue{j.get<std::string>()};
  if (j.is_number_integer()) return FieldValue{j.get<std::int64_t>()};
  if (j.is_number_float()) return FieldValue{j.get<double>()};
  if (j.is_object() && j.size() == 2 && j.contains("lat") && j.contains("lon")) {
    return FieldValue{GeoPoint{j.at("lat").get<double>(), j.at("lon").get<double>()}};
  }
  return std::nullopt;
}

}  // namespace

std::string document_to_json(const Document& doc) {
  ordered_json j;
  j["id"] = doc.id;
  j["index"] = doc.index_name;
  ordered_json fields = ordered_json::object();
  for (const auto& [k, v] : doc.fields) fields[k] = value_to_json(v);
  j["fields"] = std::move(fields);
  return j.dump();
}

Document document_from_json(std::string_view line) {
  try {
    auto j = json::parse(line);
    Document doc;
    doc.id = j.at("id").get<std::string>();
    doc.index_name = j.at("index").get<std::string>();
    for (const auto& [k, v] : j.at("fields").items()) {
      auto value = value_from_json(v);
      if (!value) throw Error("unsupported value for field '" + k + "'");
      doc.fields.emplace(k, std::move(*value));
    }
    return doc;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed document: ") + e.what());
  }
}

namespace index {
namespace {

Query from_json(const json& j) {
  if (!j.is_object() || j.size() != 1) {
    throw QueryError("query node must be an object with exactly one key");
  }
  const auto& [key, body] = *j.items().begin();
  if (key == "match_all") return Query::match_all();
  if (key == "term") {
    auto value = value_from_json(body.at("value"));
    if (!value) throw QueryError("term value must be a string or number");
    return Query::term(body.at("field").get<std::string>(), std::move(*value));
  }
  if (key == "and" || key == "or") {
    if (!body.is_array()) throw QueryError("'" + key + "' expects an array");
    std::vector<Query> children;
    for (const auto& c : body) children.push_back(from_json(c));
    return key == "and" ? Query::all_of(std::move(children))
                        : Query::any_of(std::move(children));
  }
  if (key == "not") return Query::negate(from_json(body));
  if (key == "range") {
    Query q = Query::range(body.at("field").get<std::string>(), std::nullopt, std::nullopt);
    if (body.contains("gte") && body.contains("gt")) throw QueryError("both gte and gt given");
    if (body.contains("lte") && body.contains("lt")) throw QueryError("both lte and lt given");
    if (body.contains("gte")) {
      q.min = body.at("gte").get<double>();
      q.include_min = true;
    } else if (body.contains("gt")) {
      q.min = body.at("gt").get<double>();
      q.include_min = false;
    }
    if (body.contains("lte")) {
      q.max = body.at("lte").get<double>();
      q.include_max = true;
    } else if (body.contains("lt")) {
      q.max = body.at("lt").get<double>();
      q.include_max = false;
    }
    return q;
  }
  throw QueryError("unknown query node '" + key + "'");
}

ordered_json to_json(const Query& q) {
  ordered_json j;
  switch (q.kind) {
    case Query::Kind::MatchAll:
      j["match_all"] = ordered_json::object();
      break;
    case Query::Kind::Term:
      j["term"] = {{"field", q.field}, {"value", value_to_json(q.value)}};
      break;
    case Query::Kind::And:
    case Query::Kind::Or: {
      ordered_json arr = ordered_json::array();
      for (const auto& c : q.children) arr.push_back(to_json(c));
      j[q.kind == Query::Kind::And ? "and" : "or"] = arr;
      break;
    }
    case Query::Kind::Not:
      j["not"] = to_json(q.children.at(0));
      break;
    case Query::Kind::Range: {
      ordered_json r;
      r["field"] = q.field;
      if (q.min) r[q.include_min ? "gte" : "gt"] = *q.min;
      if (q.max) r[q.include_max ? "lte" : "lt"] = *q.max;
      j["range"] = r;
      break;
    }
  }
  return j;
}

}  // namespace

Query Query::term(std::string field, FieldValue value) {
  Query q;
  q.kind = Kind::Term;
  q.field = std::move(field);
  q.value = std::move(value);
  return q;
}

Query Query::all_of(std::vector<Query> children) {
  Query q;
  q.kind = Kind::And;
  q.children = std::move(children);
  return q;
}

Query Query::any_of(std::vector<Query> children) {
  Query q;
  q.kind = Kind::Or;
  q.children = std::move(children);
  return q;
}

Query Query::negate(Query child) {
  Query q;
  q.kind = Kind::Not;
  q.children.push_back(std::move(child));
  return q;
}

Query Query::range(std::string field, std::optional<double> min, std::optional<double> max,
                   bool include_min, bool include_max) {
  Query q;
  q.kind = Kind::Range;
  q.field = std::move(field);
  q.min = min;
  q.max = max;
  // An absent bound keeps the default flag so equal ranges compare equal.
  q.include_min = min ? include_min : true;
  q.include_max = max ? include_max : false;
  return q;
}

Query parse_query(std::string_view json_text) {
  try {
    return from_json(json::parse(json_text));
  } catch (const json::exception& e) {
    throw QueryError(std::string("malformed query: ") + e.what());
  }
}

std::string query_to_json(const Query& query) { return to_json(query).dump(); }

Aggregation parse_aggregation(std::string_view json_text) {
  try {
    auto j = json::parse(json_text);
    if (!j.is_object() || j.size() != 1) {
      throw QueryError("aggregation must be an object with exactly one key");
    }
    const auto& [key, body] = *j.items().begin();
    if (key == "terms") {
      TermsAgg a{body.at("field").get<std::string>(), body.value("size", std::size_t{10})};
      return a;
    }
    if (key == "date_histogram") {
      DateHistogramAgg a{body.value("interval_ms", std::int64_t{60'000})};
      if (a.interval_ms <= 0) throw QueryError("interval_ms must be positive");
      return a;
    }
    if (key == "stats") return StatsAgg{body.at("field").get<std::string>()};
    if (key == "geo_grid") {
      GeoGridAgg a{body.value("field", std::string("geo")), body.value("cell_degrees", 1.0)};
      if (!(a.cell_degrees > 0) || !std::isfinite(a.cell_degrees)) {
        throw QueryError("cell_degrees must be positive");
      }
      return a;
    }
    throw QueryError("unknown aggregation '" + key + "'");
  } catch (const json::exception& e) {
    throw QueryError(std::string("malformed aggregation: ") + e.what());
  }
}

}  // namespace index
}  // namespace stormlog
