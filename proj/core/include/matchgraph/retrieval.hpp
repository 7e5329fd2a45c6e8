#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "matchgraph/embeddings.hpp"
#include "matchgraph/gcn.hpp"
#include "matchgraph/knn_index.hpp"
#include "matchgraph/subgraph.hpp"

namespace matchgraph {

enum class RetrievalMethod : std::uint8_t { gcn, topk, threshold };

const char* to_string(RetrievalMethod method);

struct ScoredImage {
  ImageId id = 0;
  double score = 0.0;  // in [0, 1]

  friend bool operator==(const ScoredImage&, const ScoredImage&) = default;
};

/// Images retrieved for one query, ordered by descending score then
/// ascending id. Never contains the query.
struct RetrievalResult {
  ImageId query_id = 0;
  RetrievalMethod method = RetrievalMethod::gcn;
  std::vector<ScoredImage> retrieved;

  std::vector<ImageId> ids() const;

  friend bool operator==(const RetrievalResult&, const RetrievalResult&) = default;
};

inline constexpr double kDefaultDecisionThreshold = 0.5;

/// Builds the query's unlabeled subgraph and keeps the hop-1 nodes whose
/// probability is strictly above `threshold`. The result size depends on the
/// data only; there is no retrieval count.
RetrievalResult gcn_retrieve(const GcnModel& model, const Index& index, const EmbeddingMatrix& emb,
                             ImageId q, const QesParams& params,
                             double threshold = kDefaultDecisionThreshold);

/// k nearest neighbors, scored 1 - distance / 2.
RetrievalResult topk_retrieve(const Index& index, ImageId q, std::size_t k);

/// Every image within chord distance tau of q, scored 1 - distance / 2.
RetrievalResult threshold_retrieve(const Index& index, ImageId q, double tau);

/// Runs `retrieve` for every query on `threads` workers; output order
/// follows `queries`.
std::vector<RetrievalResult> retrieve_all(std::span<const ImageId> queries, unsigned threads,
                                          const std::function<RetrievalResult(ImageId)>& retrieve);

/// One undirected image pair, a < b.
struct PairRecord {
  ImageId a = 0;
  ImageId b = 0;
  double score = 0.0;

  friend bool operator==(const PairRecord&, const PairRecord&) = default;
};

/// Deduplicated unordered pairs; a pair found from both ends keeps the larger
/// score. Sorted by (a, b).
std::vector<PairRecord> collect_pairs(std::span<const RetrievalResult> results);

/// Re-expands pairs into per-query results (both directions) for every id in
/// `queries`; ids with no pair get an empty result.
std::vector<RetrievalResult> results_from_pairs(std::span<const PairRecord> pairs,
                                                std::span<const ImageId> queries,
                                                RetrievalMethod method);

inline constexpr const char* kPairFileHeader = "# matchgraph pairs v1";

/// Header line then `id_a id_b score` per pair.
void export_pairs(std::span<const RetrievalResult> results, std::ostream& out);
void write_pairs(std::span<const PairRecord> pairs, std::ostream& out);
std::vector<PairRecord> read_pairs(std::istream& in);
std::vector<PairRecord> read_pairs_file(const std::string& path);

}  // namespace matchgraph
