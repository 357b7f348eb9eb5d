#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "stormlog/document.hpp"
#include "stormlog/query.hpp"

// In-memory, day-partitioned inverted indices (the Elasticsearch analog).
namespace stormlog::index {

class IndexError : public Error {
 public:
  using Error::Error;
};

struct StoreOptions {
  std::size_t shard_count = 2;
  // String fields matched verbatim; every other string field is tokenized.
  std::set<std::string, std::less<>> keyword_fields = {
      "status", "action", "kind", "beat.name", "id",     "type",
      "source", "result", "client_ip", "request_id", "geo_label"};
};

// Half-open [from, to) on @timestamp.
struct TimeRange {
  std::optional<std::int64_t> from;
  std::optional<std::int64_t> to;

  bool contains(std::int64_t t) const {
    return (!from || t >= *from) && (!to || t < *to);
  }
};

// Lowercases and splits on ASCII non-alphanumerics.
std::vector<std::string> tokenize(std::string_view text);

// `name` or `prefix*` (a lone `*` matches all). Throws QueryError when a `*`
// appears anywhere but at the end.
bool matches_index_pattern(std::string_view pattern, std::string_view name);

// Stable shard routing hash (FNV-1a, 64 bit).
std::uint64_t stable_hash(std::string_view bytes);

class IndexStore {
 public:
  explicit IndexStore(StoreOptions options = {});
  ~IndexStore();
  IndexStore(IndexStore&&) noexcept;
  IndexStore& operator=(IndexStore&&) noexcept;

  // Upsert by id into doc.index_name, creating the index if needed. Throws
  // IndexError when @timestamp is missing or falls outside the index's day.
  void index_document(Document doc);
  void index_documents(std::vector<Document> docs);

  // Ordered by (@timestamp, id).
  std::vector<Document> search(std::string_view pattern, const Query& query,
                               const TimeRange& range = {}) const;

  AggregationResult aggregate(std::string_view pattern, const Query& query,
                              const Aggregation& agg, const TimeRange& range = {}) const;

  // Per-shard matching ids of one index, in ordinal order.
  std::vector<std::vector<std::string>> search_shards(std::string_view index_name,
                                                      const Query& query) const;

  void delete_index(std::string_view name);
  // Keeps the newest `days` indices of every storm-<kind> family; returns the
  // deleted names.
  std::vector<std::string> retain_latest(std::size_t days);

  std::vector<std::string> index_names() const;
  std::size_t doc_count(std::string_view index_name) const;
  std::size_t total_docs() const;
  std::size_t shard_count() const { return options_.shard_count; }
  std::size_t shard_for(std::string_view id) const;
  bool is_keyword(std::string_view field) const;

  // One directory per index holding docs.ndjson and manifest.json.
  void save(const std::filesystem::path& dir) const;
  static IndexStore load(const std::filesystem::path& dir, StoreOptions options = {});

 private:
  struct Shard;
  struct TimeIndex;

  template <typename Fn>
  void for_each_match(std::string_view pattern, const Query& query, const TimeRange& range,
                      Fn&& fn) const;

  StoreOptions options_;
  std::map<std::string, std::unique_ptr<TimeIndex>, std::less<>> indices_;
  std::unique_ptr<std::shared_mutex> mutex_;
};

}  // namespace stormlog::index
