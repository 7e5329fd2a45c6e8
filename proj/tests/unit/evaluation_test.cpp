#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "matchgraph/evaluation.hpp"
#include "matchgraph/retrieval.hpp"
#include "matchgraph/synthetic.hpp"

namespace matchgraph {
namespace {

using Ids = std::vector<ImageId>;

TEST(PerQueryPrf, Arithmetic) {
  const Prf prf = per_query_prf(Ids{2, 3, 4}, Ids{3, 4, 5});
  EXPECT_DOUBLE_EQ(prf.precision, 2.0 / 3);
  EXPECT_DOUBLE_EQ(prf.recall, 2.0 / 3);
  EXPECT_DOUBLE_EQ(prf.fmeasure, 2.0 / 3);
  EXPECT_EQ(per_query_prf(Ids{7, 1}, Ids{1, 7}), (Prf{1, 1, 1}));
}

TEST(PerQueryPrf, EmptySetConventions) {
  EXPECT_EQ(per_query_prf(Ids{}, Ids{3}), (Prf{0, 0, 0}));
  EXPECT_EQ(per_query_prf(Ids{}, Ids{}), (Prf{1, 1, 1}));
  EXPECT_EQ(per_query_prf(Ids{4}, Ids{}), (Prf{0, 1, 0}));
  EXPECT_EQ(per_query_prf(Ids{4}, Ids{5}), (Prf{0, 0, 0}));
}

TEST(PerQueryPrf, DuplicatesIgnored) {
  EXPECT_EQ(per_query_prf(Ids{3, 3, 4}, Ids{3, 4, 4}), (Prf{1, 1, 1}));
}

TEST(PerQueryPrf, MatchesSetArithmetic) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 300; ++t) {
    Ids pred, rel;
    for (int i = 0; i < 8; ++i) {
      if (rng() % 2) pred.push_back(rng() % 12);
      if (rng() % 2) rel.push_back(rng() % 12);
    }
    const std::set<ImageId> p(pred.begin(), pred.end()), r(rel.begin(), rel.end());
    std::size_t hit = 0;
    for (ImageId id : p) hit += r.contains(id);
    const Prf prf = per_query_prf(pred, rel);
    if (p.empty() || r.empty()) continue;
    const double precision = static_cast<double>(hit) / static_cast<double>(p.size());
    const double recall = static_cast<double>(hit) / static_cast<double>(r.size());
    EXPECT_DOUBLE_EQ(prf.precision, precision);
    EXPECT_DOUBLE_EQ(prf.recall, recall);
    EXPECT_DOUBLE_EQ(prf.fmeasure, hit == 0 ? 0.0 : 2 * precision * recall / (precision + recall));
  }
}

TEST(MacroAverage, MeansEachColumn) {
  const std::vector<Prf> single{{0.25, 0.5, 1.0 / 3}};
  EXPECT_EQ(macro_average(single), single.front());
  const std::vector<Prf> two{{1, 1, 1}, {0, 0, 0}};
  EXPECT_EQ(macro_average(two), (Prf{0.5, 0.5, 0.5}));
  EXPECT_EQ(macro_average(std::vector<Prf>{}), (Prf{0, 0, 0}));
}

TEST(MacroAverage, FCanFallBelowBothMeans) {
  // One query precise but incomplete, the other complete but imprecise.
  const Prf a = per_query_prf(Ids{1}, Ids{1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  const Prf b = per_query_prf(Ids{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, Ids{1});
  const Prf macro = macro_average(std::vector<Prf>{a, b});
  EXPECT_LT(macro.fmeasure, std::min(macro.precision, macro.recall));
}

GroundTruth chain_truth() {
  GroundTruth truth(Ids{1, 2, 3, 4});
  truth.add_pair(1, 2);
  truth.add_pair(2, 3);
  truth.add_pair(2, 1);
  truth.add_pair(4, 4);
  return truth;
}

TEST(GroundTruth, SymmetricPairs) {
  const GroundTruth truth = chain_truth();
  EXPECT_EQ(truth.pair_count(), 2u);
  EXPECT_TRUE(truth.matchable(2, 1));
  EXPECT_FALSE(truth.matchable(1, 3));
  EXPECT_EQ(truth.relevant(2), (Ids{1, 3}));
  EXPECT_TRUE(truth.relevant(4).empty());
}

TEST(GroundTruth, FromOverlapsUsesThresholds) {
  OverlapStore store;
  store.add({1, 2, 0.3, 0.0});
  store.add({1, 3, 0.1, 0.1});
  store.add({2, 3, 0.0, 0.2});
  const GroundTruth truth = GroundTruth::from_overlaps(store, 0.25, 0.15, {});
  EXPECT_TRUE(truth.matchable(1, 2));
  EXPECT_FALSE(truth.matchable(1, 3));
  EXPECT_TRUE(truth.matchable(3, 2));
}

TEST(Evaluate, PerfectRetrieval) {
  const GroundTruth truth = chain_truth();
  std::vector<RetrievalResult> results;
  for (ImageId q : truth.universe()) {
    RetrievalResult r{q, RetrievalMethod::gcn, {}};
    for (ImageId v : truth.relevant(q)) r.retrieved.push_back({v, 1.0});
    results.push_back(r);
  }
  const auto report = evaluate(results, truth);
  EXPECT_EQ(report.macro, (Prf{1, 1, 1}));
  EXPECT_EQ(view_graph_stats(results, truth).false_positive, 0u);
}

TEST(Evaluate, RetrievalBudgetKeepsHighestScores) {
  const GroundTruth truth = chain_truth();
  const std::vector<RetrievalResult> results{
      {2, RetrievalMethod::topk, {{3, 0.9}, {4, 0.8}, {1, 0.7}}}};
  EXPECT_EQ(evaluate(results, truth, 1).macro, (Prf{1, 0.5, 2.0 / 3}));
  EXPECT_EQ(evaluate(results, truth, 3).macro, evaluate(results, truth).macro);
}

TEST(Report, CsvLayout) {
  const std::vector<RetrievalResult> results{{1, RetrievalMethod::topk, {{2, 0.9}}},
                                             {3, RetrievalMethod::topk, {{1, 0.2}}}};
  std::ostringstream out;
  write_report(evaluate(results, chain_truth()), out);
  EXPECT_EQ(out.str(), "query_id,precision,recall,fmeasure\n1,1,1,1\n3,0,0,0\nMACRO,0.5,0.5,0.5\n");
}

TEST(ViewGraphStats, CountsMatchSetArithmetic) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 50; ++t) {
    GroundTruth truth(Ids{});
    SymmetryClasses classes;
    for (ImageId i = 0; i < 20; ++i) classes[i] = static_cast<int>(i % 3);
    for (int k = 0; k < 30; ++k) truth.add_pair(rng() % 20, rng() % 20);
    std::vector<RetrievalResult> results;
    std::set<std::pair<ImageId, ImageId>> pairs;
    for (ImageId q = 0; q < 20; ++q) {
      RetrievalResult r{q, RetrievalMethod::topk, {}};
      for (int k = 0; k < 4; ++k) {
        const ImageId v = rng() % 20;
        if (v == q || std::any_of(r.retrieved.begin(), r.retrieved.end(),
                                  [v](const ScoredImage& s) { return s.id == v; }))
          continue;
        r.retrieved.push_back({v, 0.5});
        pairs.insert(std::minmax(q, v));
      }
      results.push_back(r);
    }
    std::size_t tp = 0, fp = 0, cross = 0;
    for (const auto& [a, b] : pairs) {
      if (truth.matchable(a, b)) {
        ++tp;
      } else {
        ++fp;
        cross += classes[a] != classes[b];
      }
    }
    const auto stats = view_graph_stats(results, truth, &classes);
    EXPECT_EQ(stats.pairs, pairs.size());
    EXPECT_EQ(stats.true_positive, tp);
    EXPECT_EQ(stats.false_positive, fp);
    EXPECT_EQ(stats.cross_class_false_positive, cross);
    EXPECT_FALSE(view_graph_stats(results, truth).cross_class_false_positive.has_value());
  }
}

TEST(ViewGraphStats, TopkConfusesMirroredCopiesWithoutNoise) {
  SceneConfig config;
  config.n_images = 60;
  config.symmetry = 2;
  config.noise_sigma = 0.0;
  const Scene scene = generate_scene(config);
  const Index index(scene.embeddings, {5, 1});
  const auto results = retrieve_all(scene.embeddings.ids(), 1,
                                    [&](ImageId q) { return topk_retrieve(index, q, 5); });
  const auto truth = GroundTruth::from_overlaps(scene.overlaps, 0.25, 0.15, scene.embeddings.ids());
  const SymmetryClasses classes = scene.classes();
  EXPECT_GT(*view_graph_stats(results, truth, &classes).cross_class_false_positive, 0u);
}

TEST(ViewGraphStats, CsvLayout) {
  std::ostringstream with, without;
  write_view_graph_stats({10, 7, 3, 2}, with);
  write_view_graph_stats({10, 7, 3, std::nullopt}, without);
  EXPECT_EQ(with.str(), "pairs,true_positive,false_positive,cross_class_false_positive\n10,7,3,2\n");
  EXPECT_EQ(without.str(), "pairs,true_positive,false_positive,cross_class_false_positive\n10,7,3,NA\n");
}

}  // namespace
}  // namespace matchgraph
