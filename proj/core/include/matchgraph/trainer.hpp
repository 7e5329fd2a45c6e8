#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "matchgraph/embeddings.hpp"
#include "matchgraph/gcn.hpp"
#include "matchgraph/knn_index.hpp"
#include "matchgraph/subgraph.hpp"

namespace matchgraph {

/// Overlap supervision for one image pair: mesh overlap and common tracks,
/// both in [0, 1].
struct OverlapRecord {
  ImageId i = 0;
  ImageId j = 0;
  double mo = 0.0;
  double ct = 0.0;

  friend bool operator==(const OverlapRecord&, const OverlapRecord&) = default;
};

/// Symmetric store of overlap records; (i, j) and (j, i) share one entry.
class OverlapStore {
 public:
  /// Throws InvalidArgument for i == j or scores outside [0, 1]. A later
  /// record for the same pair replaces the earlier one.
  void add(const OverlapRecord& record);

  std::optional<OverlapRecord> find(ImageId i, ImageId j) const;
  std::size_t size() const noexcept { return records_.size(); }

  /// One record per pair with i < j, sorted by (i, j).
  std::vector<OverlapRecord> records() const;

  friend bool operator==(const OverlapStore&, const OverlapStore&) = default;

 private:
  std::map<std::pair<ImageId, ImageId>, std::pair<double, double>> records_;
};

/// Text form: `i j mo ct` per line; '#' starts a comment line.
OverlapStore load_overlaps(std::istream& in);
OverlapStore load_overlaps_file(const std::string& path);
void save_overlaps(const OverlapStore& store, std::ostream& out);
void save_overlaps_file(const OverlapStore& store, const std::string& path);

inline constexpr double kDefaultTauMo = 0.25;
inline constexpr double kDefaultTauCt = 0.15;

/// Matchable when mo >= tau_mo or ct >= tau_ct.
bool label_pair(const OverlapRecord& record, double tau_mo, double tau_ct);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  double tau_mo = kDefaultTauMo;
  double tau_ct = kDefaultTauCt;
  QesParams qes{};
  /// Only the widths are used; input_dim comes from the embeddings.
  ModelShape shape{};
  AdamConfig adam{};
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  double decision_threshold = 0.5;

  /// Throws InvalidArgument for out-of-range values.
  void validate() const;
};

/// Labels every node of the subgraph from the overlap store. Pairs without
/// a record are not matchable.
Qes label_qes(Qes qes, const OverlapStore& overlaps, double tau_mo, double tau_ct);

/// First and second moment estimates for every parameter, flattened in
/// GcnModel::parameters() order.
struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update. Throws DimensionError on shape mismatch.
void optimizer_step(GcnModel& model, const GcnModel& gradient, AdamState& state,
                    const AdamConfig& config);

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double fmeasure = 0.0;
};

struct TrainResult {
  GcnModel model;
  std::vector<EpochStats> history;
  /// Queries dropped because their subgraph had no hop-1 node.
  std::vector<ImageId> skipped_queries;
};

/// Seeded mini-batch training over one labeled subgraph per query. Each
/// epoch visits the queries in a fresh seeded order; a step averages the
/// gradients of `batch_size` subgraphs (summed in batch order) and applies
/// one Adam update. Epoch metrics are measured during the pass, on hop-1
/// nodes, before each batch's update.
///
/// Throws NoTrainingData when no query yields a trainable subgraph.
TrainResult train(const EmbeddingMatrix& emb, const OverlapStore& overlaps,
                  std::span<const ImageId> queries, const TrainConfig& config);

/// Same, reusing an index built over `emb`.
TrainResult train(const Index& index, const EmbeddingMatrix& emb, const OverlapStore& overlaps,
                  std::span<const ImageId> queries, const TrainConfig& config);

/// `epoch,loss,precision,recall,fmeasure` per line.
void write_history(std::span<const EpochStats> history, std::ostream& out);

}  // namespace matchgraph
