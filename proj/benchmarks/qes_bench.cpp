#include <benchmark/benchmark.h>

#include "matchgraph/knn_index.hpp"
#include "matchgraph/subgraph.hpp"
#include "matchgraph/synthetic.hpp"

namespace {

void BM_BuildQes(benchmark::State& state) {
  matchgraph::SceneConfig config;
  config.n_images = 2000;
  config.seed = 5;
  const auto emb = matchgraph::generate_scene(config).embeddings;
  const matchgraph::QesParams params{static_cast<std::size_t>(state.range(0)), 5, 10};
  const matchgraph::Index index(emb, {params.k1, 1});
  std::size_t i = 0;
  for (auto _ : state) {
    auto qes = matchgraph::build_qes(index, emb, emb.ids()[i++ % emb.size()], params);
    benchmark::DoNotOptimize(qes.size());
  }
}
BENCHMARK(BM_BuildQes)->Arg(20)->Arg(100);

}  // namespace
