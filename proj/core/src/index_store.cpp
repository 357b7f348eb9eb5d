#include "stormlog/index_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "stormlog/time.hpp"

namespace stormlog::index {
namespace {

using Ordinals = std::vector<std::uint32_t>;
constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
const std::string kTimestampKey(kTimestampField);

bool is_alnum(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

Ordinals intersect(const Ordinals& a, const Ordinals& b) {
  Ordinals out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

Ordinals unite(const Ordinals& a, const Ordinals& b) {
  Ordinals out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

void erase_sorted(Ordinals& list, std::uint32_t ord) {
  auto it = std::lower_bound(list.begin(), list.end(), ord);
  if (it != list.end() && *it == ord) list.erase(it);
}

void insert_sorted(Ordinals& list, std::uint32_t ord) {
  if (list.empty() || list.back() < ord) {
    list.push_back(ord);
    return;
  }
  auto it = std::lower_bound(list.begin(), list.end(), ord);
  if (it == list.end() || *it != ord) list.insert(it, ord);
}

// Date suffix of `storm-<kind>-YYYY.MM.DD`, as the UTC midnight.
std::optional<std::int64_t> index_day(std::string_view name) {
  if (name.size() < 10) return std::nullopt;
  std::string date(name.substr(name.size() - 10));
  if (date[4] != '.' || date[7] != '.') return std::nullopt;
  date[4] = '-';
  date[7] = '-';
  return time::parse_date(date);
}

std::string family_of(std::string_view name) {
  auto dash = name.rfind('-');
  return std::string(dash == std::string_view::npos ? name : name.substr(0, dash));
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !is_alnum(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && is_alnum(text[i])) ++i;
    if (i > start) {
      std::string tok(text.substr(start, i - start));
      for (auto& c : tok) c = lower(c);
      out.push_back(std::move(tok));
    }
  }
  return out;
}

bool matches_index_pattern(std::string_view pattern, std::string_view name) {
  auto star = pattern.find('*');
  if (pattern.empty()) throw QueryError("empty index pattern");
  if (star == std::string_view::npos) return pattern == name;
  if (star != pattern.size() - 1) {
    throw QueryError("index pattern supports '*' only as a suffix: '" + std::string(pattern) +
                     "'");
  }
  return name.starts_with(pattern.substr(0, star));
}

std::uint64_t stable_hash(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

struct IndexStore::Shard {
  std::vector<Document> docs;
  std::unordered_map<std::string, std::uint32_t> by_id;
  std::unordered_map<std::string, std::unordered_map<std::string, Ordinals>> postings;
  std::unordered_map<std::string, std::vector<double>> numeric;

  Ordinals all() const {
    Ordinals out(docs.size());
    for (std::uint32_t i = 0; i < out.size(); ++i) out[i] = i;
    return out;
  }

  void add_terms(const IndexStore& store, std::uint32_t ord, const Document& doc) {
    for (const auto& [field, value] : doc.fields) {
      if (is_numeric(value)) {
        auto& col = numeric[field];
        if (col.size() < docs.size()) col.resize(docs.size(), kMissing);
        col[ord] = as_double(value);
      } else if (const auto* s = std::get_if<std::string>(&value)) {
        auto& terms = postings[field];
        if (store.is_keyword(field)) {
          insert_sorted(terms[*s], ord);
        } else {
          for (auto& tok : tokenize(*s)) insert_sorted(terms[tok], ord);
        }
      }
    }
  }

  void remove_terms(const IndexStore& store, std::uint32_t ord, const Document& doc) {
    for (const auto& [field, value] : doc.fields) {
      if (is_numeric(value)) {
        numeric[field][ord] = kMissing;
      } else if (const auto* s = std::get_if<std::string>(&value)) {
        auto& terms = postings[field];
        if (store.is_keyword(field)) {
          erase_sorted(terms[*s], ord);
        } else {
          for (auto& tok : tokenize(*s)) erase_sorted(terms[tok], ord);
        }
      }
    }
  }

  void upsert(const IndexStore& store, Document doc) {
    auto it = by_id.find(doc.id);
    if (it != by_id.end()) {
      std::uint32_t ord = it->second;
      remove_terms(store, ord, docs[ord]);
      docs[ord] = std::move(doc);
      add_terms(store, ord, docs[ord]);
      return;
    }
    auto ord = static_cast<std::uint32_t>(docs.size());
    by_id.emplace(doc.id, ord);
    docs.push_back(std::move(doc));
    add_terms(store, ord, docs.back());
  }

  double column_value(const std::string& field, std::uint32_t ord) const {
    auto it = numeric.find(field);
    if (it == numeric.end() || ord >= it->second.size()) return kMissing;
    return it->second[ord];
  }

  Ordinals eval(const IndexStore& store, const Query& q) const {
    switch (q.kind) {
      case Query::Kind::MatchAll:
        return all();
      case Query::Kind::Term: {
        if (is_numeric(q.value)) {
          Ordinals out;
          auto it = numeric.find(q.field);
          if (it == numeric.end()) return out;
          const double target = as_double(q.value);
          const auto& col = it->second;
          for (std::uint32_t i = 0; i < col.size(); ++i) {
            if (col[i] == target) out.push_back(i);
          }
          return out;
        }
        const auto* s = std::get_if<std::string>(&q.value);
        if (s == nullptr) return {};
        if (q.field == kIdField) {
          auto id = by_id.find(*s);
          return id == by_id.end() ? Ordinals{} : Ordinals{id->second};
        }
        auto fit = postings.find(q.field);
        if (fit == postings.end()) return {};
        std::string key = *s;
        if (!store.is_keyword(q.field)) {
          for (auto& c : key) c = lower(c);
        }
        auto tit = fit->second.find(key);
        return tit == fit->second.end() ? Ordinals{} : tit->second;
      }
      case Query::Kind::And: {
        if (q.children.empty()) return all();
        Ordinals acc = eval(store, q.children[0]);
        for (std::size_t i = 1; i < q.children.size() && !acc.empty(); ++i) {
          acc = intersect(acc, eval(store, q.children[i]));
        }
        return acc;
      }
      case Query::Kind::Or: {
        Ordinals acc;
        for (const auto& c : q.children) acc = unite(acc, eval(store, c));
        return acc;
      }
      case Query::Kind::Not: {
        Ordinals inner = q.children.empty() ? Ordinals{} : eval(store, q.children[0]);
        Ordinals out;
        std::size_t j = 0;
        for (std::uint32_t i = 0; i < docs.size(); ++i) {
          while (j < inner.size() && inner[j] < i) ++j;
          if (j < inner.size() && inner[j] == i) continue;
          out.push_back(i);
        }
        return out;
      }
      case Query::Kind::Range: {
        Ordinals out;
        auto it = numeric.find(q.field);
        if (it == numeric.end()) return out;
        const auto& col = it->second;
        for (std::uint32_t i = 0; i < col.size(); ++i) {
          double v = col[i];
          if (std::isnan(v)) continue;
          if (q.min && (q.include_min ? v < *q.min : v <= *q.min)) continue;
          if (q.max && (q.include_max ? v > *q.max : v >= *q.max)) continue;
          out.push_back(i);
        }
        return out;
      }
    }
    return {};
  }
};

struct IndexStore::TimeIndex {
  std::string name;
  std::optional<std::int64_t> day;
  std::vector<Shard> shards;

  std::size_t doc_count() const {
    std::size_t n = 0;
    for (const auto& s : shards) n += s.docs.size();
    return n;
  }
};

IndexStore::IndexStore(StoreOptions options)
    : options_(std::move(options)), mutex_(std::make_unique<std::shared_mutex>()) {
  if (options_.shard_count == 0) throw IndexError("shard_count must be at least 1");
}

IndexStore::~IndexStore() = default;
IndexStore::IndexStore(IndexStore&&) noexcept = default;
IndexStore& IndexStore::operator=(IndexStore&&) noexcept = default;

bool IndexStore::is_keyword(std::string_view field) const {
  return options_.keyword_fields.find(field) != options_.keyword_fields.end();
}

std::size_t IndexStore::shard_for(std::string_view id) const {
  return static_cast<std::size_t>(stable_hash(id) % options_.shard_count);
}

void IndexStore::index_documents(std::vector<Document> docs) {
  std::unique_lock lock(*mutex_);
  for (auto& doc : docs) {
    auto ts = doc.timestamp();
    if (!ts) throw IndexError("document '" + doc.id + "' has no integer @timestamp");
    if (doc.id.empty()) throw IndexError("document without id");
    if (doc.index_name.empty()) throw IndexError("document '" + doc.id + "' has no index name");
    auto it = indices_.find(doc.index_name);
    if (it == indices_.end()) {
      auto idx = std::make_unique<TimeIndex>();
      idx->name = doc.index_name;
      idx->day = index_day(doc.index_name);
      idx->shards.resize(options_.shard_count);
      it = indices_.emplace(doc.index_name, std::move(idx)).first;
    }
    auto& idx = *it->second;
    if (idx.day && time::day_start(*ts) != *idx.day) {
      throw IndexError("document '" + doc.id + "' @timestamp " + time::format_iso8601(*ts) +
                       " is outside index " + idx.name);
    }
    idx.shards[shard_for(doc.id)].upsert(*this, std::move(doc));
  }
}

void IndexStore::index_document(Document doc) {
  std::vector<Document> one;
  one.push_back(std::move(doc));
  index_documents(std::move(one));
}

template <typename Fn>
void IndexStore::for_each_match(std::string_view pattern, const Query& query,
                                const TimeRange& range, Fn&& fn) const {
  struct Hit {
    std::int64_t ts;
    const Document* doc;
  };
  std::vector<Hit> hits;
  for (const auto& [name, idx] : indices_) {
    if (!matches_index_pattern(pattern, name)) continue;
    for (const auto& shard : idx->shards) {
      for (auto ord : shard.eval(*this, query)) {
        double t = shard.column_value(kTimestampKey, ord);
        if (std::isnan(t)) continue;
        auto ts = static_cast<std::int64_t>(t);
        if (!range.contains(ts)) continue;
        hits.push_back({ts, &shard.docs[ord]});
      }
    }
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    if (a.ts != b.ts) return a.ts < b.ts;
    return a.doc->id < b.doc->id;
  });
  for (const auto& h : hits) fn(*h.doc);
}

std::vector<Document> IndexStore::search(std::string_view pattern, const Query& query,
                                         const TimeRange& range) const {
  std::shared_lock lock(*mutex_);
  std::vector<Document> out;
  for_each_match(pattern, query, range, [&](const Document& d) { out.push_back(d); });
  return out;
}

AggregationResult IndexStore::aggregate(std::string_view pattern, const Query& query,
                                        const Aggregation& agg, const TimeRange& range) const {
  std::shared_lock lock(*mutex_);
  if (const auto* terms = std::get_if<TermsAgg>(&agg)) {
    std::unordered_map<std::string, std::uint64_t> counts;
    for_each_match(pattern, query, range, [&](const Document& d) {
      if (const auto* v = d.find(terms->field)) ++counts[to_key_string(*v)];
    });
    std::vector<TermsBucket> out;
    out.reserve(counts.size());
    for (auto& [k, c] : counts) out.push_back({k, c});
    std::sort(out.begin(), out.end(), [](const TermsBucket& a, const TermsBucket& b) {
      if (a.count != b.count) return a.count > b.count;
      return a.key < b.key;
    });
    if (out.size() > terms->top_n) out.resize(terms->top_n);
    return out;
  }
  if (const auto* hist = std::get_if<DateHistogramAgg>(&agg)) {
    if (hist->interval_ms <= 0) throw QueryError("interval must be positive");
    std::map<std::int64_t, std::uint64_t> buckets;
    for_each_match(pattern, query, range, [&](const Document& d) {
      ++buckets[time::floor_to(*d.timestamp(), hist->interval_ms)];
    });
    std::vector<HistogramBucket> out;
    for (auto& [k, c] : buckets) out.push_back({k, c});
    return out;
  }
  if (const auto* stats = std::get_if<StatsAgg>(&agg)) {
    StatsResult r;
    for_each_match(pattern, query, range, [&](const Document& d) {
      const auto* v = d.find(stats->field);
      if (v == nullptr) return;
      if (!is_numeric(*v)) {
        throw QueryError("stats on non-numeric field '" + stats->field + "'");
      }
      double x = as_double(*v);
      if (r.count == 0) {
        r.min = r.max = x;
      } else {
        r.min = std::min(r.min, x);
        r.max = std::max(r.max, x);
      }
      r.sum += x;
      ++r.count;
    });
    if (r.count > 0) r.mean = r.sum / static_cast<double>(r.count);
    return r;
  }
  const auto& grid = std::get<GeoGridAgg>(agg);
  if (!(grid.cell_degrees > 0)) throw QueryError("cell_degrees must be positive");
  std::map<std::pair<std::int64_t, std::int64_t>, std::uint64_t> cells;
  for_each_match(pattern, query, range, [&](const Document& d) {
    const auto* v = d.find(grid.field);
    if (v == nullptr) return;
    const auto* p = std::get_if<GeoPoint>(v);
    if (p == nullptr) return;
    auto li = static_cast<std::int64_t>(std::floor(p->lat / grid.cell_degrees));
    auto lo = static_cast<std::int64_t>(std::floor(p->lon / grid.cell_degrees));
    ++cells[{li, lo}];
  });
  std::vector<GeoCell> out;
  for (auto& [key, count] : cells) {
    GeoCell c;
    c.lat_index = key.first;
    c.lon_index = key.second;
    c.lat_min = static_cast<double>(key.first) * grid.cell_degrees;
    c.lon_min = static_cast<double>(key.second) * grid.cell_degrees;
    c.lat_center = c.lat_min + grid.cell_degrees / 2;
    c.lon_center = c.lon_min + grid.cell_degrees / 2;
    c.count = count;
    out.push_back(c);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const GeoCell& a, const GeoCell& b) { return a.count > b.count; });
  return out;
}

std::vector<std::vector<std::string>> IndexStore::search_shards(std::string_view index_name,
                                                                const Query& query) const {
  std::shared_lock lock(*mutex_);
  auto it = indices_.find(index_name);
  if (it == indices_.end()) throw IndexError("unknown index '" + std::string(index_name) + "'");
  std::vector<std::vector<std::string>> out;
  for (const auto& shard : it->second->shards) {
    auto& ids = out.emplace_back();
    for (auto ord : shard.eval(*this, query)) ids.push_back(shard.docs[ord].id);
  }
  return out;
}

void IndexStore::delete_index(std::string_view name) {
  std::unique_lock lock(*mutex_);
  auto it = indices_.find(name);
  if (it == indices_.end()) throw IndexError("unknown index '" + std::string(name) + "'");
  indices_.erase(it);
}

std::vector<std::string> IndexStore::retain_latest(std::size_t days) {
  std::unique_lock lock(*mutex_);
  std::map<std::string, std::vector<std::string>> families;
  for (const auto& [name, idx] : indices_) {
    if (idx->day) families[family_of(name)].push_back(name);
  }
  std::vector<std::string> removed;
  for (auto& [family, names] : families) {
    std::sort(names.begin(), names.end());
    if (names.size() <= days) continue;
    for (std::size_t i = 0; i < names.size() - days; ++i) {
      indices_.erase(names[i]);
      removed.push_back(names[i]);
    }
  }
  std::sort(removed.begin(), removed.end());
  return removed;
}

std::vector<std::string> IndexStore::index_names() const {
  std::shared_lock lock(*mutex_);
  std::vector<std::string> out;
  for (const auto& [name, idx] : indices_) out.push_back(name);
  return out;
}

std::size_t IndexStore::doc_count(std::string_view index_name) const {
  std::shared_lock lock(*mutex_);
  auto it = indices_.find(index_name);
  return it == indices_.end() ? 0 : it->second->doc_count();
}

std::size_t IndexStore::total_docs() const {
  std::shared_lock lock(*mutex_);
  std::size_t n = 0;
  for (const auto& [name, idx] : indices_) n += idx->doc_count();
  return n;
}

void IndexStore::save(const std::filesystem::path& dir) const {
  namespace fs = std::filesystem;
  std::shared_lock lock(*mutex_);
  fs::create_directories(dir);
  // Drop snapshot directories of deleted indices.
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.json") &&
        !indices_.contains(entry.path().filename().string())) {
      fs::remove_all(entry.path());
    }
  }
  for (const auto& [name, idx] : indices_) {
    auto tmp = dir / (".tmp-" + name);
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    {
      std::ofstream docs(tmp / "docs.ndjson", std::ios::binary);
      for (const auto& shard : idx->shards) {
        for (const auto& d : shard.docs) docs << document_to_json(d) << '\n';
      }
      if (!docs) throw IndexError("cannot write snapshot for " + name);
      nlohmann::ordered_json manifest;
      manifest["name"] = name;
      manifest["shard_count"] = idx->shards.size();
      manifest["doc_count"] = idx->doc_count();
      std::ofstream m(tmp / "manifest.json", std::ios::binary);
      m << manifest.dump(2) << '\n';
      if (!m) throw IndexError("cannot write manifest for " + name);
    }
    fs::remove_all(dir / name);
    fs::rename(tmp, dir / name);
  }
}

IndexStore IndexStore::load(const std::filesystem::path& dir, StoreOptions options) {
  namespace fs = std::filesystem;
  IndexStore store(std::move(options));
  if (!fs::exists(dir)) return store;
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.json") &&
        !entry.path().filename().string().starts_with(".tmp-")) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& path : dirs) {
    std::ifstream m(path / "manifest.json");
    auto manifest = nlohmann::json::parse(m, nullptr, false);
    if (manifest.is_discarded()) throw IndexError("corrupt manifest in " + path.string());
    std::ifstream in(path / "docs.ndjson", std::ios::binary);
    std::vector<Document> docs;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) docs.push_back(document_from_json(line));
    }
    if (docs.size() != manifest.value("doc_count", std::size_t{0})) {
      throw IndexError("doc count mismatch in " + path.string());
    }
    store.index_documents(std::move(docs));
  }
  return store;
}

}  // namespace stormlog::index
