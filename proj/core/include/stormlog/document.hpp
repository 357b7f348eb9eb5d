#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "stormlog/value.hpp"

namespace stormlog {

inline constexpr std::string_view kTimestampField = "@timestamp";

struct Document {
  std::string id;
  std::string index_name;
  FieldMap fields;

  std::optional<std::int64_t> timestamp() const {
    auto it = fields.find(kTimestampField);
    if (it == fields.end()) return std::nullopt;
    if (const auto* v = std::get_if<std::int64_t>(&it->second)) return *v;
    return std::nullopt;
  }

  const FieldValue* find(std::string_view field) const {
    auto it = fields.find(field);
    return it == fields.end() ? nullptr : &it->second;
  }

  friend bool operator==(const Document&, const Document&) = default;
};

// Single-line JSON used by snapshots and dead letters:
// {"id":..,"index":..,"fields":{..}} with geo points as {"lat":..,"lon":..}.
std::string document_to_json(const Document& doc);
Document document_from_json(std::string_view line);

}  // namespace stormlog
