#include <benchmark/benchmark.h>

#include <random>

#include "repsharp/eval.hpp"
#include "repsharp/index.hpp"
#include "repsharp/refsel.hpp"
#include "repsharp/retrieval.hpp"
#include "repsharp/vector.hpp"

namespace {

repsharp::Embedding random_vector(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> normal;
  repsharp::Embedding v(dim);
  for (auto& x : v) x = normal(rng);
  return v;
}

repsharp::Index random_index(std::size_t docs, std::size_t dim, std::size_t queries_per_doc) {
  std::mt19937_64 rng(1);
  std::vector<repsharp::IndexRecord> records;
  for (std::size_t i = 0; i < docs; ++i) {
    repsharp::IndexRecord r{"d" + std::to_string(i), std::nullopt, "t", random_vector(rng, dim), {}, std::nullopt};
    for (std::size_t j = 0; j < queries_per_doc; ++j) {
      r.queries.push_back({j, repsharp::QueryKind::Contrastive, "q", random_vector(rng, dim)});
    }
    records.push_back(std::move(r));
  }
  repsharp::IndexManifest manifest;
  manifest.embedder = {"bench", "random", dim};
  manifest.dimension = dim;
  return repsharp::Index(manifest, std::move(records));
}

void BM_Cosine(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const auto dim = static_cast<std::size_t>(state.range(0));
  const auto a = random_vector(rng, dim);
  const auto b = random_vector(rng, dim);
  for (auto _ : state) benchmark::DoNotOptimize(repsharp::cosine_similarity(a, b));
}
BENCHMARK(BM_Cosine)->Arg(64)->Arg(768)->Arg(4096);

void BM_AggregateG(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto q = random_vector(rng, 768);
  std::vector<repsharp::Embedding> qs;
  for (std::size_t i = 0; i < n; ++i) qs.push_back(random_vector(rng, 768));
  for (auto _ : state) benchmark::DoNotOptimize(repsharp::aggregate_g(q, qs));
}
BENCHMARK(BM_AggregateG)->Arg(1)->Arg(10)->Arg(30);

void BM_Rank(benchmark::State& state) {
  const auto index = random_index(static_cast<std::size_t>(state.range(0)), 128, 10);
  std::mt19937_64 rng(4);
  const auto q = random_vector(rng, 128);
  repsharp::RetrievalConfig cfg;
  cfg.mode = state.range(1) ? repsharp::RetrievalMode::ConSharp : repsharp::RetrievalMode::Traditional;
  for (auto _ : state) benchmark::DoNotOptimize(repsharp::rank("q", q, index, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Rank)->Args({1000, 0})->Args({1000, 1})->Args({10000, 0})->Args({10000, 1});

void BM_KMeansSilhouette(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::vector<repsharp::Embedding> points;
  for (int i = 0; i < 100; ++i) points.push_back(repsharp::l2_normalize(random_vector(rng, 128)));
  const auto k = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    const auto r = repsharp::kmeans(points, k, 7);
    benchmark::DoNotOptimize(repsharp::silhouette_score(points, r.assignments));
  }
}
BENCHMARK(BM_KMeansSilhouette)->Arg(3)->Arg(10);

void BM_SelectReferences(benchmark::State& state) {
  const auto index = random_index(500, 64, 0);
  repsharp::RefSelConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(repsharp::select_references(index, "d0", cfg));
}
BENCHMARK(BM_SelectReferences);

}  // namespace

BENCHMARK_MAIN();
