#include <benchmark/benchmark.h>

#include "matchgraph/knn_index.hpp"
#include "matchgraph/synthetic.hpp"

namespace {

matchgraph::EmbeddingMatrix scene(std::size_t n) {
  matchgraph::SceneConfig config;
  config.n_images = n;
  config.seed = 3;
  return matchgraph::generate_scene(config).embeddings;
}

void BM_IndexBuild(benchmark::State& state) {
  const auto emb = scene(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    matchgraph::Index index(emb, {static_cast<std::size_t>(state.range(1)), 1});
    benchmark::DoNotOptimize(index.size());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_IndexBuild)->Args({360, 20})->Args({2000, 20})->Args({2000, 100});

void BM_CachedQuery(benchmark::State& state) {
  const auto emb = scene(2000);
  const matchgraph::Index index(emb, {100, 1});
  const auto& ids = index.ids();
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(index.query(ids[i++ % ids.size()], static_cast<std::size_t>(state.range(0))));
  }
}
BENCHMARK(BM_CachedQuery)->Arg(10)->Arg(100);

void BM_BruteForce(benchmark::State& state) {
  const auto emb = scene(static_cast<std::size_t>(state.range(0)));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(matchgraph::brute_force_knn(emb, emb.ids()[i++ % emb.size()], 100));
  }
}
BENCHMARK(BM_BruteForce)->Arg(360)->Arg(2000);

}  // namespace
