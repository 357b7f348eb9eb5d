#include "stormlog/index_store.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "stormlog/loggen.hpp"
#include "stormlog/pipeline.hpp"
#include "stormlog/shipper.hpp"
#include "stormlog/time.hpp"
#include "test_support.hpp"

using namespace stormlog;
using namespace stormlog::index;
namespace st = stormlog::testing;

namespace {

const std::int64_t kDay = time::from_civil(2019, 6, 26);

Document doc(std::string id, std::int64_t ts, FieldMap extra = {}) {
  Document d;
  d.id = std::move(id);
  d.index_name = "storm-backend-" + time::format_date_dotted(ts);
  d.fields = std::move(extra);
  d.fields["@timestamp"] = ts;
  return d;
}

std::vector<std::string> ids(const std::vector<Document>& docs) {
  std::vector<std::string> out;
  for (const auto& d : docs) out.push_back(d.id);
  return out;
}

IndexStore store_of(const std::vector<Document>& docs, std::size_t shards = 2) {
  StoreOptions opt;
  opt.shard_count = shards;
  IndexStore s(opt);
  s.index_documents(docs);
  return s;
}

}  // namespace

TEST(IndexStore, UpsertKeepsOneDocumentPerId) {
  IndexStore s;
  s.index_document(doc("a", kDay + 5, {{"status", std::string("INFO")}}));
  s.index_document(doc("a", kDay + 6, {{"status", std::string("ERROR")}}));
  EXPECT_EQ(s.total_docs(), 1u);
  auto hits = s.search("storm-*", Query::match_all());
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(std::get<std::string>(hits[0].fields.at("status")), "ERROR");
  EXPECT_TRUE(s.search("storm-*", Query::term("status", std::string("INFO"))).empty());
}

TEST(IndexStore, RejectsDocumentsOutsideTheirDay) {
  IndexStore s;
  auto d = doc("a", kDay);
  d.index_name = "storm-backend-2019.06.27";
  EXPECT_THROW(s.index_document(d), IndexError);
  Document no_ts;
  no_ts.id = "b";
  no_ts.index_name = "storm-backend-2019.06.26";
  EXPECT_THROW(s.index_document(no_ts), IndexError);
}

TEST(IndexStore, KeywordTermOnAction) {
  IndexStore s;
  s.index_document(doc("1", kDay + 1, {{"action", std::string("srmReleaseFiles")}}));
  s.index_document(doc("2", kDay + 2, {{"action", std::string("srmLs")}}));
  s.index_document(doc("3", kDay + 3, {{"action", std::string("srmreleasefiles")}}));
  auto hits = s.search("storm-backend-*", Query::term("action", std::string("srmReleaseFiles")));
  EXPECT_EQ(ids(hits), std::vector<std::string>{"1"});
}

TEST(IndexStore, TextFieldsMatchTokens) {
  IndexStore s;
  s.index_document(doc("1", kDay, {{"msg", std::string("Request TIMED-out after 30s")}}));
  EXPECT_EQ(s.search("*", Query::term("msg", std::string("timed"))).size(), 1u);
  EXPECT_EQ(s.search("*", Query::term("msg", std::string("Timed"))).size(), 1u);
  EXPECT_EQ(s.search("*", Query::term("msg", std::string("time"))).size(), 0u);
  EXPECT_EQ(s.search("*", Query::term("nope", std::string("timed"))).size(), 0u);
}

TEST(IndexStore, TenThousandDocumentsById) {
  std::vector<Document> docs;
  for (int i = 0; i < 10'000; ++i) {
    docs.push_back(doc("d" + std::to_string(i), kDay + i * 1000,
                       {{"n", static_cast<std::int64_t>(i)}}));
  }
  auto s = store_of(docs, 4);
  EXPECT_EQ(s.total_docs(), 10'000u);
  for (int i = 0; i < 10'000; ++i) {
    auto hits = s.search("*", Query::term("id", "d" + std::to_string(i)));
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0], docs[static_cast<std::size_t>(i)]);
  }
}

TEST(IndexStore, EmptyStoreReturnsNothing) {
  IndexStore s;
  EXPECT_TRUE(s.search("*", Query::match_all()).empty());
  auto terms = std::get<std::vector<TermsBucket>>(s.aggregate("*", {}, TermsAgg{"status", 5}));
  EXPECT_TRUE(terms.empty());
  auto stats = std::get<StatsResult>(s.aggregate("*", {}, StatsAgg{"x"}));
  EXPECT_EQ(stats.count, 0u);
  EXPECT_TRUE(s.index_names().empty());
}

TEST(IndexStore, StatusTermMatchesOracle) {
  auto docs = st::random_documents(3000, 5);
  auto s = store_of(docs);
  auto q = Query::term("status", std::string("ERROR"));
  auto got = s.search("storm-*", q);
  EXPECT_FALSE(got.empty());
  EXPECT_EQ(got, st::oracle_search(docs, "storm-*", q));
}

TEST(IndexStore, ConjunctionWithRangeMatchesOracle) {
  auto docs = st::random_documents(3000, 6);
  auto s = store_of(docs);
  auto q = Query::all_of({Query::term("kind", std::string("frontend")),
                          Query::range("latency_ms", 10.0, 50.0)});
  TimeRange r{kDay, kDay + time::kMillisPerDay};
  auto got = s.search("storm-*", q, r);
  EXPECT_FALSE(got.empty());
  EXPECT_EQ(got, st::oracle_search(docs, "storm-*", q, r));
}

TEST(IndexStore, EmptyBooleansAndNegation) {
  auto docs = st::random_documents(500, 8);
  auto s = store_of(docs);
  EXPECT_EQ(s.search("*", Query::all_of({})).size(), docs.size());
  EXPECT_TRUE(s.search("*", Query::any_of({})).empty());
  auto err = Query::term("status", std::string("ERROR"));
  EXPECT_EQ(s.search("*", err).size() + s.search("*", Query::negate(err)).size(), docs.size());
}

// Search agrees with a linear scan for random query trees, index patterns and
// time ranges.
TEST(IndexStore, RandomQueriesMatchOracle) {
  auto docs = st::random_documents(4000, 9);
  auto s = store_of(docs, 3);
  std::mt19937_64 rng(10);
  const std::vector<std::string> patterns = {"*", "storm-*", "storm-frontend-*",
                                             "storm-backend-2019.06.26", "other-*"};
  for (int i = 0; i < 1000; ++i) {
    auto q = st::random_query(rng);
    const auto& pattern = patterns[rng() % patterns.size()];
    TimeRange r;
    if (rng() % 2) r.from = kDay + static_cast<std::int64_t>(rng() % time::kMillisPerDay);
    if (rng() % 2) r.to = kDay + static_cast<std::int64_t>(rng() % (2 * time::kMillisPerDay));
    ASSERT_EQ(s.search(pattern, q, r), st::oracle_search(docs, pattern, q, r))
        << query_to_json(q) << " on " << pattern;
  }
}

TEST(IndexStore, QueryTextRoundTrip) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 500; ++i) {
    auto q = st::random_query(rng);
    EXPECT_EQ(parse_query(query_to_json(q)), q) << query_to_json(q);
  }
  EXPECT_THROW(parse_query(R"({"fuzzy": {}})"), QueryError);
  EXPECT_THROW(parse_query("[1"), QueryError);
}

TEST(Aggregations, TermsCountsAndOrder) {
  IndexStore s;
  const char* levels[] = {"INFO", "ERROR", "INFO", "INFO"};
  for (int i = 0; i < 4; ++i) {
    s.index_document(doc(std::to_string(i), kDay + i, {{"status", std::string(levels[i])}}));
  }
  auto b = std::get<std::vector<TermsBucket>>(s.aggregate("*", {}, TermsAgg{"status", 10}));
  EXPECT_EQ(b, (std::vector<TermsBucket>{{"INFO", 3}, {"ERROR", 1}}));
}

TEST(Aggregations, SingleHistogramBucket) {
  IndexStore s;
  for (int i = 0; i < 5; ++i) s.index_document(doc(std::to_string(i), kDay + 60'000 + i * 1000));
  auto b = std::get<std::vector<HistogramBucket>>(
      s.aggregate("*", {}, DateHistogramAgg{60'000}));
  EXPECT_EQ(b, (std::vector<HistogramBucket>{{kDay + 60'000, 5}}));
}

TEST(Aggregations, RandomMatchOracles) {
  auto docs = st::random_documents(3000, 13);
  auto s = store_of(docs);
  std::mt19937_64 rng(14);
  for (int i = 0; i < 100; ++i) {
    auto q = st::random_query(rng, 2);
    auto hits = st::oracle_search(docs, "*", q);
    ASSERT_EQ(std::get<std::vector<TermsBucket>>(s.aggregate("*", q, TermsAgg{"action", 4})),
              st::oracle_terms(hits, "action", 4));
    ASSERT_EQ(std::get<std::vector<TermsBucket>>(s.aggregate("*", q, TermsAgg{"count", 50})),
              st::oracle_terms(hits, "count", 50));
    ASSERT_EQ(
        std::get<std::vector<HistogramBucket>>(s.aggregate("*", q, DateHistogramAgg{3'600'000})),
        st::oracle_histogram(hits, 3'600'000));
    ASSERT_EQ(std::get<StatsResult>(s.aggregate("*", q, StatsAgg{"latency_ms"})),
              st::oracle_stats(hits, "latency_ms"));
    ASSERT_EQ(std::get<std::vector<GeoCell>>(s.aggregate("*", q, GeoGridAgg{"geo", 2.5})),
              st::oracle_geo_grid(hits, "geo", 2.5));
  }
}

// Histogram counts sum to the hit count, and terms counts never exceed it.
TEST(Aggregations, CountsAreConserved) {
  auto docs = st::random_documents(2000, 15);
  auto s = store_of(docs);
  std::mt19937_64 rng(16);
  for (int i = 0; i < 100; ++i) {
    auto q = st::random_query(rng, 2);
    auto n = s.search("*", q).size();
    auto h = std::get<std::vector<HistogramBucket>>(s.aggregate("*", q, DateHistogramAgg{600'000}));
    std::uint64_t sum = 0;
    for (const auto& b : h) sum += b.count;
    EXPECT_EQ(sum, n);
    auto t = std::get<std::vector<TermsBucket>>(s.aggregate("*", q, TermsAgg{"status", 100}));
    std::uint64_t tsum = 0;
    for (const auto& b : t) tsum += b.count;
    EXPECT_LE(tsum, n);
  }
}

TEST(Aggregations, TopActionsMatchGeneratedCorpus) {
  st::TempDir dir;
  auto w = loggen::WorkloadSpec::defaults();
  w.duration_seconds = 900;
  auto truth = loggen::generate(w, {}, dir.path());
  auto p = pipeline::default_pipeline();
  IndexStore s;
  ship::TailOptions opt;
  opt.max_records = 1u << 30;
  auto path = (dir / "storm-frontend-server.log").string();
  for (const auto& rec : ship::tail_once({}, path, opt).batch.records) {
    s.index_document(std::get<Document>(p.process(rec)));
  }
  std::vector<TermsBucket> want;
  for (const auto& [op, n] : truth.operation_counts) {
    want.push_back({op, static_cast<std::uint64_t>(n)});
  }
  std::sort(want.begin(), want.end(), [](const auto& a, const auto& b) {
    return a.count != b.count ? a.count > b.count : a.key < b.key;
  });
  want.resize(std::min<std::size_t>(4, want.size()));
  EXPECT_EQ(std::get<std::vector<TermsBucket>>(
                s.aggregate("storm-frontend-*", {}, TermsAgg{"action", 4})),
            want);
}

TEST(IndexStore, DeleteIndex) {
  auto docs = st::random_documents(600, 17);
  auto s = store_of(docs);
  auto names = s.index_names();
  ASSERT_FALSE(names.empty());
  auto victim = names.front();
  auto before = s.total_docs();
  auto removed = s.doc_count(victim);
  s.delete_index(victim);
  EXPECT_EQ(s.total_docs(), before - removed);
  EXPECT_TRUE(s.search(victim, Query::match_all()).empty());
  EXPECT_THROW(s.delete_index("storm-none-2019.01.01"), IndexError);
}

TEST(IndexStore, RetentionKeepsNewestDaysPerFamily) {
  auto docs = st::random_documents(900, 18);
  auto s = store_of(docs);
  auto deleted = s.retain_latest(2);
  // Independent computation: group names by family, drop all but the newest two.
  std::map<std::string, std::vector<std::string>> families;
  for (const auto& d : docs) {
    auto name = d.index_name;
    auto family = name.substr(0, name.rfind('-'));
    auto& v = families[family];
    if (std::find(v.begin(), v.end(), name) == v.end()) v.push_back(name);
  }
  std::vector<std::string> want_deleted, want_kept;
  for (auto& [family, names] : families) {
    std::sort(names.begin(), names.end());
    for (std::size_t i = 0; i < names.size(); ++i) {
      (i + 2 < names.size() ? want_deleted : want_kept).push_back(names[i]);
    }
  }
  std::sort(deleted.begin(), deleted.end());
  std::sort(want_deleted.begin(), want_deleted.end());
  std::sort(want_kept.begin(), want_kept.end());
  EXPECT_EQ(deleted, want_deleted);
  EXPECT_EQ(s.index_names(), want_kept);
}

// The union of per-shard results is the index's result, and shards are disjoint.
TEST(IndexStore, ShardsPartitionResults) {
  auto docs = st::random_documents(2000, 19);
  auto s = store_of(docs, 5);
  std::mt19937_64 rng(20);
  for (const auto& name : s.index_names()) {
    for (int i = 0; i < 20; ++i) {
      auto q = st::random_query(rng, 2);
      auto shards = s.search_shards(name, q);
      ASSERT_EQ(shards.size(), 5u);
      std::vector<std::string> all;
      for (std::size_t k = 0; k < shards.size(); ++k) {
        for (const auto& id : shards[k]) {
          EXPECT_EQ(s.shard_for(id), k);
          all.push_back(id);
        }
      }
      auto want = ids(s.search(name, q));
      std::sort(all.begin(), all.end());
      std::sort(want.begin(), want.end());
      ASSERT_EQ(all, want);
    }
  }
}

TEST(IndexStore, SnapshotRoundTrip) {
  auto docs = st::random_documents(1500, 21);
  auto s = store_of(docs);
  st::TempDir dir;
  s.save(dir.path());
  auto back = IndexStore::load(dir.path());
  EXPECT_EQ(back.index_names(), s.index_names());
  EXPECT_EQ(back.search("*", Query::match_all()), s.search("*", Query::match_all()));
  std::mt19937_64 rng(22);
  for (int i = 0; i < 50; ++i) {
    auto q = st::random_query(rng);
    ASSERT_EQ(back.search("*", q), s.search("*", q));
  }
}

TEST(IndexStore, IndexPatterns) {
  EXPECT_TRUE(matches_index_pattern("*", "anything"));
  EXPECT_TRUE(matches_index_pattern("storm-metrics-*", "storm-metrics-2019.06.26"));
  EXPECT_FALSE(matches_index_pattern("storm-metrics-*", "storm-backend-2019.06.26"));
  EXPECT_TRUE(matches_index_pattern("storm-backend-2019.06.26", "storm-backend-2019.06.26"));
  EXPECT_THROW(matches_index_pattern("storm-*-2019", "x"), QueryError);
  EXPECT_EQ(tokenize("Hello, WORLD-42!"), (std::vector<std::string>{"hello", "world", "42"}));
}
