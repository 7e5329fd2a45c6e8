#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "matchgraph/embeddings.hpp"
#include "matchgraph/knn_index.hpp"

namespace matchgraph {

/// Neighbor counts that shape a query enclosing subgraph.
struct QesParams {
  std::size_t k1 = 100;  // 1-hop neighbors of the query
  std::size_t k2 = 5;    // neighbors taken from each 1-hop node
  std::size_t u = 10;    // neighbor count used to place edges

  /// Throws InvalidArgument unless k1 >= 1 and u >= 1.
  void validate() const;

  friend bool operator==(const QesParams&, const QesParams&) = default;
};

enum class Hop : std::uint8_t { one = 1, two = 2 };

struct NodeSet {
  std::vector<ImageId> ids;
  std::vector<Hop> hops;
};

/// Query enclosing subgraph: the query's 1-hop and 2-hop neighbors (the
/// query itself excluded), an undirected 0/1 adjacency among them, and node
/// features expressed relative to the query descriptor.
///
/// Node order is fixed: 1-hop nodes in neighbor rank order, then 2-hop
/// nodes by ascending id.
struct Qes {
  ImageId query_id = 0;
  std::vector<ImageId> nodes;
  std::vector<Hop> hops;
  Matrix adjacency;  // n x n, symmetric, zero diagonal
  Matrix features;   // n x d, row i = f(nodes[i]) - f(query)
  std::optional<std::vector<bool>> labels;

  std::size_t size() const noexcept { return nodes.size(); }
  std::size_t hop1_count() const;

  friend bool operator==(const Qes& a, const Qes& b);
};

/// Returns whether `node` should be retrieved for `query`.
using LabelFn = std::function<bool(ImageId query, ImageId node)>;

/// Stage 1: N_k1(q) tagged hop 1, then the union of N_k2(p) over those p
/// tagged hop 2 (deduplicated, query removed).
NodeSet discover_nodes(const Index& index, ImageId q, std::size_t k1, std::size_t k2);

/// Stage 2: edge (p, r) whenever r is among the u nearest neighbors of p in
/// the whole collection and both are subgraph nodes.
Matrix append_edges(const Index& index, std::span<const ImageId> nodes, std::size_t u);

/// Stage 3: raw descriptor of each node minus the raw query descriptor.
Matrix compute_features(const EmbeddingMatrix& emb, ImageId q, std::span<const ImageId> nodes);

/// All three stages. Labels are filled when `labeler` is set.
Qes build_qes(const Index& index, const EmbeddingMatrix& emb, ImageId q,
              const QesParams& params, const LabelFn& labeler = {});

/// Debug/cache text form:
///   QES query=<id> n=<n> d=<d>
///   <id> hop=<1|2> label=<0|1|?>      (n lines)
///   <id_a> <id_b>                     (one per edge)
///   <f_1> ... <f_d>                   (n feature rows)
void write_qes(const Qes& qes, std::ostream& out);
Qes read_qes(std::istream& in);

}  // namespace matchgraph
