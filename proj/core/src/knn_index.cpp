#include "matchgraph/knn_index.hpp"

#include <algorithm>
#include <string>

#include "matchgraph/error.hpp"
#include "matchgraph/parallel.hpp"

namespace matchgraph {

namespace {

bool closer(const Neighbor& a, const Neighbor& b) {
  if (a.distance != b.distance) return a.distance < b.distance;
  return a.id < b.id;
}

}  // namespace

Index::Index(const EmbeddingMatrix& emb, Options options)
    : ids_(emb.ids()),
      unit_rows_(static_cast<Eigen::Index>(emb.size()), static_cast<Eigen::Index>(emb.dim())) {
  row_of_.reserve(ids_.size());
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    row_of_.emplace(ids_[r], r);
    std::vector<double> unit;
    try {
      unit = l2_normalize(emb.row(r));
    } catch (const DegenerateVector&) {
      throw DegenerateVector("image " + std::to_string(ids_[r]) + " has a zero-norm embedding");
    }
    std::copy(unit.begin(), unit.end(), unit_rows_.data() + r * dim());
  }

  cache_depth_ = std::min(options.cache_depth, ids_.empty() ? 0 : ids_.size() - 1);
  if (cache_depth_ > 0) {
    cache_.resize(ids_.size());
    parallel_for(ids_.size(), options.threads,
                 [&](std::size_t r) { cache_[r] = select(r, cache_depth_); });
  }
}

std::size_t Index::row_of(ImageId id) const {
  const auto it = row_of_.find(id);
  if (it == row_of_.end()) throw UnknownImage("unknown image id " + std::to_string(id));
  return it->second;
}

std::vector<Neighbor> Index::select(std::size_t row, std::size_t k) const {
  std::vector<Neighbor> all;
  all.reserve(ids_.size());
  const VectorView query = unit_row(row);
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    if (r == row) continue;
    all.push_back({ids_[r], unit_distance(query, unit_row(r))});
  }
  k = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), closer);
  all.resize(k);
  return all;
}

NeighborList Index::query(ImageId q, std::size_t k) const {
  if (k == 0) throw InvalidArgument("k must be >= 1");
  const std::size_t row = row_of(q);
  NeighborList out{q, {}};
  if (k <= cache_depth_) {
    const auto& cached = cache_[row];
    out.neighbors.assign(cached.begin(), cached.begin() + static_cast<std::ptrdiff_t>(k));
  } else {
    out.neighbors = select(row, k);
  }
  return out;
}

NeighborList brute_force_knn(const EmbeddingMatrix& emb, ImageId q, std::size_t k) {
  if (k == 0) throw InvalidArgument("k must be >= 1");
  const std::size_t qrow = emb.row_of(q);
  std::vector<std::pair<double, ImageId>> scored;
  for (std::size_t r = 0; r < emb.size(); ++r) {
    if (r == qrow) continue;
    scored.emplace_back(distance(emb.row(qrow), emb.row(r)), emb.ids()[r]);
  }
  std::sort(scored.begin(), scored.end());
  NeighborList out{q, {}};
  for (std::size_t i = 0; i < scored.size() && i < k; ++i) {
    out.neighbors.push_back({scored[i].second, scored[i].first});
  }
  return out;
}

}  // namespace matchgraph
