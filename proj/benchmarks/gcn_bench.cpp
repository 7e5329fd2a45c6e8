#include <benchmark/benchmark.h>

#include "matchgraph/gcn.hpp"
#include "matchgraph/knn_index.hpp"
#include "matchgraph/subgraph.hpp"
#include "matchgraph/synthetic.hpp"

namespace {

struct Fixture {
  matchgraph::Qes qes;
  matchgraph::GcnModel model;

  explicit Fixture(std::size_t k1) {
    matchgraph::SceneConfig config;
    config.n_images = 1000;
    config.seed = 9;
    const auto emb = matchgraph::generate_scene(config).embeddings;
    const matchgraph::Index index(emb, {k1, 1});
    qes = matchgraph::build_qes(index, emb, emb.ids()[0], {k1, 5, 10},
                                [](matchgraph::ImageId a, matchgraph::ImageId b) { return (a + b) % 3 == 0; });
    model = matchgraph::GcnModel::initialize({emb.dim(), {64, 64, 32, 32}, {16, 1}}, 1);
  }
};

void BM_Forward(benchmark::State& state) {
  const Fixture f(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(matchgraph::model_forward(f.qes, f.model));
  state.counters["nodes"] = static_cast<double>(f.qes.size());
}
BENCHMARK(BM_Forward)->Arg(20)->Arg(100);

void BM_Backward(benchmark::State& state) {
  const Fixture f(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(matchgraph::backward(f.qes, f.model).loss);
  state.counters["nodes"] = static_cast<double>(f.qes.size());
}
BENCHMARK(BM_Backward)->Arg(20)->Arg(100);

}  // namespace
