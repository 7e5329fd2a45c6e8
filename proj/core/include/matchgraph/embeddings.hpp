#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace matchgraph {

using ImageId = std::uint64_t;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Read-only view of one descriptor.
using VectorView = std::span<const double>;

/// N images x d global descriptors, addressed by stable image id.
/// Immutable once constructed; every entry is finite and ids are unique.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;

  /// Validates and takes ownership. Throws DimensionError if the row count
  /// does not match ids or d == 0, DuplicateId / NonFiniteValue otherwise.
  EmbeddingMatrix(std::vector<ImageId> ids, RowMatrix vectors);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(vectors_.cols()); }

  const std::vector<ImageId>& ids() const noexcept { return ids_; }
  const RowMatrix& vectors() const noexcept { return vectors_; }

  bool contains(ImageId id) const { return row_of_.contains(id); }
  /// Row index of `id`; throws UnknownImage.
  std::size_t row_of(ImageId id) const;

  VectorView row(std::size_t r) const {
    return {vectors_.data() + r * dim(), dim()};
  }
  VectorView vector(ImageId id) const { return row(row_of(id)); }

  friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
    return a.ids_ == b.ids_ && a.vectors_.rows() == b.vectors_.rows() &&
           a.vectors_.cols() == b.vectors_.cols() && a.vectors_ == b.vectors_;
  }

 private:
  std::vector<ImageId> ids_;
  RowMatrix vectors_;
  std::unordered_map<ImageId, std::size_t> row_of_;
};

/// v / ||v||. Throws DegenerateVector on zero norm.
std::vector<double> l2_normalize(VectorView v);

/// Chord distance between the directions of a and b: || a/|a| - b/|b| ||_2,
/// in [0, 2].
double distance(VectorView a, VectorView b);

/// Same metric on vectors that are already unit length. Callers that cache
/// normalized rows use this so that the arithmetic matches distance() bit
/// for bit.
double unit_distance(VectorView unit_a, VectorView unit_b);

/// Accepts the binary "MGEB" format, or whitespace-separated text
/// (`id v1 ... vd` per line) when the stream does not start with the magic.
EmbeddingMatrix load_embeddings(std::istream& in);
EmbeddingMatrix load_embeddings_file(const std::string& path);

/// Always writes the binary format. Values are narrowed to 32-bit floats.
void save_embeddings(const EmbeddingMatrix& emb, std::ostream& out);
void save_embeddings_file(const EmbeddingMatrix& emb, const std::string& path);

}  // namespace matchgraph
