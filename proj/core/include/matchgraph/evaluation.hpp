#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "matchgraph/embeddings.hpp"

namespace matchgraph {

struct RetrievalResult;
struct PairRecord;
class OverlapStore;

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double fmeasure = 0.0;

  friend bool operator==(const Prf&, const Prf&) = default;
};

/// Set-based precision/recall/F for one query. Conventions for empty sets:
/// precision is 1 when both sets are empty and 0 when only `predicted` is;
/// recall is 1 when `relevant` is empty; F is 0 when P + R == 0.
/// Duplicate ids are ignored.
Prf per_query_prf(std::span<const ImageId> predicted, std::span<const ImageId> relevant);

/// Component-wise arithmetic mean; the F column is the mean of per-query F,
/// not the harmonic mean of the averaged P and R. Empty input gives zeros.
Prf macro_average(std::span<const Prf> per_query);

/// Symmetric set of matchable image pairs over a universe of image ids.
class GroundTruth {
 public:
  GroundTruth() = default;
  explicit GroundTruth(std::vector<ImageId> universe);

  /// Pairs from overlap records that pass label_pair(tau_mo, tau_ct).
  static GroundTruth from_overlaps(const OverlapStore& overlaps, double tau_mo, double tau_ct,
                                   std::vector<ImageId> universe);
  static GroundTruth from_pairs(std::span<const PairRecord> pairs, std::vector<ImageId> universe);

  /// Self-pairs are ignored. Both ids join the universe.
  void add_pair(ImageId a, ImageId b);

  bool matchable(ImageId a, ImageId b) const;
  /// Ascending ids matchable with q.
  std::vector<ImageId> relevant(ImageId q) const;
  const std::set<ImageId>& universe() const noexcept { return universe_; }
  std::size_t pair_count() const noexcept { return pair_count_; }

 private:
  std::set<ImageId> universe_;
  std::unordered_map<ImageId, std::set<ImageId>> partners_;
  std::size_t pair_count_ = 0;
};

struct QueryMetrics {
  ImageId query_id = 0;
  Prf prf;
};

struct EvaluationReport {
  std::vector<QueryMetrics> per_query;
  Prf macro;
};

/// Scores every result against the truth. When `max_retrieved` is set, each
/// result is first cut to its highest-scoring `max_retrieved` items (ties by
/// ascending id), mimicking a pipeline that only ever forms k pairs per query.
EvaluationReport evaluate(std::span<const RetrievalResult> results, const GroundTruth& truth,
                          std::optional<std::size_t> max_retrieved = std::nullopt);

/// `query_id,precision,recall,fmeasure` rows and a final `MACRO,...` row.
void write_report(const EvaluationReport& report, std::ostream& out);

struct ViewGraphStats {
  std::size_t pairs = 0;
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  /// Only present when symmetry classes were supplied.
  std::optional<std::size_t> cross_class_false_positive;

  friend bool operator==(const ViewGraphStats&, const ViewGraphStats&) = default;
};

using SymmetryClasses = std::unordered_map<ImageId, int>;

/// Counts over the undirected, deduplicated pairs formed by all results.
ViewGraphStats view_graph_stats(std::span<const RetrievalResult> results,
                                const GroundTruth& truth,
                                const SymmetryClasses* classes = nullptr);

void write_view_graph_stats(const ViewGraphStats& stats, std::ostream& out);

}  // namespace matchgraph
