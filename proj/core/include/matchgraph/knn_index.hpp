#pragma once

#include <cstddef>
#include <unordered_map>
#include <vector>

#include "matchgraph/embeddings.hpp"

namespace matchgraph {

struct Neighbor {
  ImageId id = 0;
  double distance = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Nearest neighbors of one image, ascending by distance, ties by ascending id.
/// Never contains the query itself.
struct NeighborList {
  ImageId query_id = 0;
  std::vector<Neighbor> neighbors;

  friend bool operator==(const NeighborList&, const NeighborList&) = default;
};

/// Exact k-nearest-neighbor index over unit-normalized descriptors.
///
/// Queries rank every other image by chord distance. When built with a
/// cache depth D, the first D neighbors of every image are precomputed and
/// queries with k <= D are answered from the cache; larger k falls back to a
/// partial selection over all rows. Both paths are exact.
class Index {
 public:
  struct Options {
    std::size_t cache_depth = 0;
    unsigned threads = 1;
  };

  Index() = default;

  /// Throws DegenerateVector naming the first zero-norm row.
  explicit Index(const EmbeddingMatrix& emb) : Index(emb, Options{}) {}
  Index(const EmbeddingMatrix& emb, Options options);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(unit_rows_.cols()); }
  std::size_t cache_depth() const noexcept { return cache_depth_; }
  const std::vector<ImageId>& ids() const noexcept { return ids_; }

  bool contains(ImageId id) const { return row_of_.contains(id); }
  std::size_t row_of(ImageId id) const;

  VectorView unit_row(std::size_t r) const { return {unit_rows_.data() + r * dim(), dim()}; }

  /// The min(k, N-1) nearest images to q. Throws UnknownImage, or
  /// InvalidArgument when k == 0.
  NeighborList query(ImageId q, std::size_t k) const;

 private:
  std::vector<Neighbor> select(std::size_t row, std::size_t k) const;

  std::vector<ImageId> ids_;
  std::unordered_map<ImageId, std::size_t> row_of_;
  RowMatrix unit_rows_;
  std::size_t cache_depth_ = 0;
  std::vector<std::vector<Neighbor>> cache_;
};

inline Index build_index(const EmbeddingMatrix& emb, Index::Options options = {}) {
  return Index(emb, options);
}

inline NeighborList query_knn(const Index& index, ImageId q, std::size_t k) {
  return index.query(q, k);
}

/// Reference implementation: scans every row with distance() and fully sorts.
/// Used as the oracle for Index.
NeighborList brute_force_knn(const EmbeddingMatrix& emb, ImageId q, std::size_t k);

}  // namespace matchgraph
