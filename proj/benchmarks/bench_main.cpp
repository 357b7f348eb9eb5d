#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "stormlog/index_store.hpp"
#include "stormlog/pattern_engine.hpp"
#include "stormlog/pipeline.hpp"
#include "stormlog/storm_codecs.hpp"

namespace {

using namespace stormlog;

storm::FrontendEvent sample_frontend(std::int64_t ts, std::uint64_t n) {
  storm::FrontendEvent e;
  e.timestamp = ts;
  e.request_id = "req" + std::to_string(n);
  e.operation = n % 3 == 0 ? "srmLs" : "srmStatusOfPtG";
  e.client_ip = "131.154.12." + std::to_string(n % 250 + 1);
  e.user_dn = "/C=IT/O=INFN/OU=Personal Certificate/L=CNAF/CN=Mario Rossi";
  e.fqans = {"/atlas/Role=NULL/Capability=NULL"};
  e.surl = "srm://storm-fe.cr.cnaf.infn.it:8444/srm/managerv2?SFN=/atlas/data/file.root";
  e.message = "Result for request srmLs is SRM_SUCCESS";
  return e;
}

void BM_GrokMatch(benchmark::State& state) {
  auto library = grok::PatternLibrary::load(pipeline::default_patterns_text());
  auto pattern = grok::compile(
      library,
      R"(^%{ISO8601_TIMESTAMP:timestamp} \[%{STORM_REQID:request_id}\] %{LOGLEVEL:status:level}: %{STORM_OP:action} client=%{IP:client_ip:ip} user='%{STORM_QUOTED:user_dn}' fqans='%{STORM_QUOTED:fqans}' surl='%{STORM_QUOTED:surl}' msg='%{STORM_QUOTED:msg}'$)");
  auto line = storm::render_line(sample_frontend(1561536000000, 7));
  for (auto _ : state) benchmark::DoNotOptimize(pattern.match(line));
}
BENCHMARK(BM_GrokMatch);

void BM_CodecParse(benchmark::State& state) {
  auto line = storm::render_line(sample_frontend(1561536000000, 7));
  for (auto _ : state) {
    benchmark::DoNotOptimize(storm::parse_line(storm::LogKind::FrontendServer, line));
  }
}
BENCHMARK(BM_CodecParse);

void BM_PipelineProcess(benchmark::State& state) {
  auto pipe = pipeline::default_pipeline();
  ship::RawRecord r;
  r.line = storm::render_line(sample_frontend(1561536000000, 7));
  r.source = "storm-frontend-server.log";
  r.kind = storm::LogKind::FrontendServer;
  for (auto _ : state) benchmark::DoNotOptimize(pipe.process(r));
}
BENCHMARK(BM_PipelineProcess);

index::IndexStore build_store(std::size_t n) {
  auto pipe = pipeline::default_pipeline();
  index::IndexStore store;
  std::vector<Document> docs;
  for (std::size_t i = 0; i < n; ++i) {
    ship::RawRecord r;
    r.line = storm::render_line(sample_frontend(1561536000000 + static_cast<std::int64_t>(i) * 100, i));
    r.source = "storm-frontend-server.log";
    r.offset = static_cast<std::int64_t>(i);
    r.kind = storm::LogKind::FrontendServer;
    docs.push_back(std::get<Document>(pipe.process(r)));
  }
  store.index_documents(std::move(docs));
  return store;
}

void BM_IndexDocuments(benchmark::State& state) {
  auto pipe = pipeline::default_pipeline();
  std::vector<Document> docs;
  for (std::int64_t i = 0; i < state.range(0); ++i) {
    ship::RawRecord r;
    r.line = storm::render_line(sample_frontend(1561536000000 + i * 100, static_cast<std::uint64_t>(i)));
    r.source = "f";
    r.offset = i;
    r.kind = storm::LogKind::FrontendServer;
    docs.push_back(std::get<Document>(pipe.process(r)));
  }
  for (auto _ : state) {
    index::IndexStore store;
    store.index_documents(docs);
    benchmark::DoNotOptimize(store.total_docs());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_IndexDocuments)->Arg(10000);

void BM_SearchTerm(benchmark::State& state) {
  auto store = build_store(20000);
  auto q = index::Query::all_of({index::Query::term("action", std::string("srmLs")),
                                 index::Query::term("status", std::string("INFO"))});
  for (auto _ : state) benchmark::DoNotOptimize(store.search("storm-frontend-*", q));
}
BENCHMARK(BM_SearchTerm);

void BM_TermsAggregation(benchmark::State& state) {
  auto store = build_store(20000);
  for (auto _ : state) {
    benchmark::DoNotOptimize(store.aggregate("storm-*", index::Query::match_all(),
                                             index::TermsAgg{"action", 10}));
  }
}
BENCHMARK(BM_TermsAggregation);

}  // namespace
BENCHMARK_MAIN();
