#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "matchgraph/error.hpp"
#include "matchgraph/subgraph.hpp"
#include "matchgraph/synthetic.hpp"
#include "oracles.hpp"

namespace matchgraph {
namespace {

// Eight points on a circle with uneven spacing so no two distances tie.
EmbeddingMatrix ring() {
  const double angles[] = {0.0, 0.70, 1.62, 2.41, 3.05, 3.98, 4.71, 5.60};
  RowMatrix v(8, 2);
  for (int i = 0; i < 8; ++i) {
    v(i, 0) = std::cos(angles[i]);
    v(i, 1) = std::sin(angles[i]);
  }
  return EmbeddingMatrix({0, 1, 2, 3, 4, 5, 6, 7}, v);
}

std::vector<int> hop_ints(const std::vector<Hop>& hops) {
  std::vector<int> out;
  for (Hop h : hops) out.push_back(static_cast<int>(h));
  return out;
}

void expect_matches_oracle(const Qes& qes, const oracle::BruteQes& brute) {
  EXPECT_EQ(qes.nodes, brute.nodes);
  EXPECT_EQ(hop_ints(qes.hops), brute.hops);
  EXPECT_EQ(oracle::to_dense(qes.adjacency), brute.adjacency);
  EXPECT_EQ(oracle::to_dense(qes.features), brute.features);
}

TEST(DiscoverNodes, NoExpansionKeepsOnlyFirstHop) {
  const auto emb = ring();
  const Index index(emb);
  const NodeSet set = discover_nodes(index, 3, 4, 0);
  const auto knn = index.query(3, 4);
  ASSERT_EQ(set.ids.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(set.ids[i], knn.neighbors[i].id);
    EXPECT_EQ(set.hops[i], Hop::one);
  }
}

TEST(DiscoverNodes, SaturatedFirstHopLeavesNothingForSecond) {
  const auto emb = ring();
  const Index index(emb);
  const NodeSet set = discover_nodes(index, 0, 7, 3);
  EXPECT_EQ(set.ids.size(), 7u);
  for (Hop h : set.hops) EXPECT_EQ(h, Hop::one);
}

TEST(DiscoverNodes, RingMatchesBruteForce) {
  const auto emb = ring();
  const Index index(emb);
  for (ImageId q : emb.ids()) {
    const NodeSet set = discover_nodes(index, q, 2, 1);
    const auto brute = oracle::brute_qes(emb, q, 2, 1, 1);
    EXPECT_EQ(set.ids, brute.nodes);
    EXPECT_EQ(hop_ints(set.hops), brute.hops);
  }
}

TEST(AppendEdges, SingleNode) {
  const Index index(ring());
  const std::vector<ImageId> one{4};
  EXPECT_EQ(append_edges(index, one, 3), Matrix::Zero(1, 1));
}

TEST(AppendEdges, LargeUGivesCompleteGraph) {
  const Index index(ring());
  const std::vector<ImageId> nodes{1, 5, 2, 7};
  Matrix complete = Matrix::Ones(4, 4);
  complete.diagonal().setZero();
  EXPECT_EQ(append_edges(index, nodes, 7), complete);
}

TEST(AppendEdges, RingMatchesBruteForce) {
  const auto emb = ring();
  const Index index(emb);
  for (ImageId q : emb.ids()) {
    const auto brute = oracle::brute_qes(emb, q, 3, 1, 2);
    EXPECT_EQ(oracle::to_dense(append_edges(index, brute.nodes, 2)), brute.adjacency);
  }
}

TEST(AppendEdges, UnknownNode) {
  const Index index(ring());
  const std::vector<ImageId> nodes{1, 42};
  EXPECT_THROW(append_edges(index, nodes, 2), UnknownImage);
}

TEST(ComputeFeatures, DifferencesFromQuery) {
  RowMatrix v(3, 2);
  v << 1.5, -2, 1.5, -2, 0.25, 4;
  const EmbeddingMatrix emb({0, 1, 2}, v);
  const std::vector<ImageId> nodes{1, 2};
  const Matrix f = compute_features(emb, 0, nodes);
  EXPECT_EQ(f.row(0).norm(), 0.0);
  EXPECT_EQ(f(1, 0), 0.25 - 1.5);
  EXPECT_EQ(f(1, 1), 6.0);
}

TEST(ComputeFeatures, ZeroQueryGivesRawRows) {
  RowMatrix v(3, 2);
  v << 0, 0, 3, -1, 0.5, 2;
  const EmbeddingMatrix emb({0, 1, 2}, v);
  const std::vector<ImageId> nodes{2, 1};
  Matrix expected(2, 2);
  expected << 0.5, 2, 3, -1;
  EXPECT_EQ(compute_features(emb, 0, nodes), expected);
}

TEST(ComputeFeatures, RandomRowsMatchElementwiseDifference) {
  std::mt19937_64 rng(5);
  const auto emb = oracle::random_embeddings(rng, 6, 5);
  const std::vector<ImageId> nodes{1, 2, 3, 4, 5};
  const Matrix f = compute_features(emb, 0, nodes);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t c = 0; c < 5; ++c) {
      EXPECT_EQ(f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)),
                emb.vector(nodes[i])[c] - emb.vector(0)[c]);
    }
  }
}

TEST(BuildQes, ComposesTheThreeStages) {
  const auto emb = ring();
  const Index index(emb);
  const QesParams params{3, 2, 2};
  const Qes qes = build_qes(index, emb, 5, params);
  const NodeSet set = discover_nodes(index, 5, 3, 2);
  EXPECT_EQ(qes.nodes, set.ids);
  EXPECT_EQ(qes.hops, set.hops);
  EXPECT_EQ(qes.adjacency, append_edges(index, set.ids, 2));
  EXPECT_EQ(qes.features, compute_features(emb, 5, set.ids));
  EXPECT_FALSE(qes.labels.has_value());
  EXPECT_EQ(qes, build_qes(index, emb, 5, params));
}

TEST(BuildQes, SmallSceneMatchesOracle) {
  SceneConfig config;
  config.n_images = 12;
  config.symmetry = 1;
  config.dim = 8;
  config.seed = 3;
  const Scene scene = generate_scene(config);
  const Index index(scene.embeddings, {3, 1});
  for (ImageId q : scene.embeddings.ids()) {
    expect_matches_oracle(build_qes(index, scene.embeddings, q, {3, 2, 2}),
                          oracle::brute_qes(scene.embeddings, q, 3, 2, 2));
  }
}

TEST(BuildQes, LabelerFillsLabels) {
  const auto emb = ring();
  const Index index(emb);
  const Qes qes = build_qes(index, emb, 0, {3, 1, 2}, [](ImageId, ImageId v) { return v % 2 == 0; });
  ASSERT_TRUE(qes.labels.has_value());
  for (std::size_t i = 0; i < qes.size(); ++i) EXPECT_EQ((*qes.labels)[i], qes.nodes[i] % 2 == 0);
}

TEST(BuildQes, Errors) {
  const auto emb = ring();
  const Index index(emb);
  EXPECT_THROW(build_qes(index, emb, 99, {3, 1, 2}), UnknownImage);
  EXPECT_THROW(build_qes(index, emb, 1, {0, 1, 2}), InvalidArgument);
  EXPECT_THROW(build_qes(index, emb, 1, {3, 1, 0}), InvalidArgument);
}

TEST(BuildQes, RandomInvariants) {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 3 + rng() % 60;
    const auto emb = oracle::random_embeddings(rng, n, 6, true);
    const Index index(emb, {8, 1});
    const ImageId q = emb.ids()[rng() % n];
    const QesParams params{1 + rng() % 10, rng() % 5, 1 + rng() % 8};
    const Qes qes = build_qes(index, emb, q, params);

    std::set<ImageId> first_hop;
    for (const auto& nb : index.query(q, params.k1).neighbors) first_hop.insert(nb.id);
    std::set<ImageId> unique(qes.nodes.begin(), qes.nodes.end());
    EXPECT_EQ(unique.size(), qes.size());
    EXPECT_FALSE(unique.contains(q));
    EXPECT_EQ(qes.hop1_count(), first_hop.size());
    for (std::size_t i = 0; i < qes.size(); ++i) {
      EXPECT_EQ(qes.hops[i] == Hop::one, first_hop.contains(qes.nodes[i]));
      if (i > 0 && qes.hops[i] == Hop::two && qes.hops[i - 1] == Hop::two) {
        EXPECT_LT(qes.nodes[i - 1], qes.nodes[i]);
      }
      if (i > 0) {
        EXPECT_FALSE(qes.hops[i - 1] == Hop::two && qes.hops[i] == Hop::one);
      }
    }
    EXPECT_EQ(qes.adjacency, qes.adjacency.transpose());
    EXPECT_EQ(qes.adjacency.diagonal().cwiseAbs().sum(), 0.0);
    EXPECT_TRUE((qes.adjacency.array() == 0.0 || qes.adjacency.array() == 1.0).all());

    // More edge neighbors never remove an edge.
    const Matrix wider = append_edges(index, qes.nodes, params.u + 1);
    EXPECT_TRUE((wider.array() >= qes.adjacency.array()).all());
  }
}

TEST(QesText, RoundTrip) {
  const auto emb = ring();
  const Index index(emb);
  Qes qes = build_qes(index, emb, 2, {3, 2, 2});
  std::vector<bool> labels(qes.size(), false);
  labels[0] = true;
  for (const auto& variant : {std::optional<std::vector<bool>>{}, std::optional{labels}}) {
    qes.labels = variant;
    std::stringstream buffer;
    write_qes(qes, buffer);
    EXPECT_EQ(read_qes(buffer), qes);
  }
}

TEST(QesText, RejectsMalformedInput) {
  std::istringstream bad_header("QES query=1 n=x d=2\n");
  EXPECT_THROW(read_qes(bad_header), ParseError);
  std::istringstream short_body("QES query=1 n=2 d=1\n5 hop=1 label=?\n");
  EXPECT_THROW(read_qes(short_body), ParseError);
}

}  // namespace
}  // namespace matchgraph
