#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "matchgraph/embeddings.hpp"
#include "matchgraph/subgraph.hpp"

namespace matchgraph {

enum class Activation : std::uint8_t { relu = 0, identity = 1 };

/// Graph convolution Y = act([X | G X] W). W has 2 * d_in rows: the top half
/// multiplies the node's own features, the bottom half the aggregated ones.
struct ConvLayer {
  Matrix weights;
  Activation activation = Activation::relu;

  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(weights.rows()) / 2; }
  std::size_t output_dim() const noexcept { return static_cast<std::size_t>(weights.cols()); }
};

/// Per-node dense layer Y = act(X W + 1 b^T).
struct DenseLayer {
  Matrix weights;  // d_in x d_out
  Vector bias;     // d_out
  Activation activation = Activation::relu;

  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(weights.rows()); }
  std::size_t output_dim() const noexcept { return static_cast<std::size_t>(weights.cols()); }
};

struct ModelShape {
  std::size_t input_dim = 0;
  std::vector<std::size_t> conv_widths{256, 256, 128, 128};
  std::vector<std::size_t> fc_widths{64, 1};

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

/// Four ReLU graph convolutions followed by dense layers (ReLU on hidden
/// layers, identity on the last) that end in a single logit per node.
class GcnModel {
 public:
  static constexpr std::size_t kConvLayers = 4;

  GcnModel() = default;
  /// Throws DimensionError / InvalidArgument if the stack is not a valid model.
  GcnModel(std::vector<ConvLayer> conv, std::vector<DenseLayer> fc);

  /// Glorot-uniform weights, zero biases, deterministic in `seed`.
  static GcnModel initialize(const ModelShape& shape, std::uint64_t seed);

  /// Same shape with every parameter zero; used as a gradient accumulator.
  GcnModel zeros_like() const;

  std::size_t input_dim() const;
  ModelShape shape() const;
  std::size_t parameter_count() const;

  const std::vector<ConvLayer>& conv() const noexcept { return conv_; }
  const std::vector<DenseLayer>& fc() const noexcept { return fc_; }

  /// Every parameter block in a fixed order: conv weights, then for each
  /// dense layer its weights followed by its bias.
  std::vector<std::span<double>> parameters();
  std::vector<std::span<const double>> parameters() const;

  friend bool operator==(const GcnModel& a, const GcnModel& b);

 private:
  std::vector<ConvLayer> conv_;
  std::vector<DenseLayer> fc_;
};

/// Lambda^{-1/2} A Lambda^{-1/2} with Lambda the degree matrix. Rows and
/// columns of isolated nodes are zero. Throws InvalidAdjacency for a
/// non-symmetric or non-binary A, or a nonzero diagonal.
Matrix aggregation_matrix(const Matrix& adjacency);

Matrix layer_forward(const Matrix& x, const Matrix& aggregation, const ConvLayer& layer);

double sigmoid(double logit);

/// Per-node matchability probabilities, strictly inside (0, 1).
Vector model_forward(const Matrix& features, const Matrix& adjacency, const GcnModel& model);
Vector model_forward(const Qes& qes, const GcnModel& model);

inline constexpr double kProbabilityClamp = 1e-12;

/// Mean binary cross-entropy over hop-1 nodes; hop-2 nodes are ignored.
/// Throws EmptyLossSet when there is no hop-1 node.
double masked_loss(const Vector& probabilities, const std::vector<bool>& labels,
                   std::span<const Hop> hops);

struct LossGradient {
  double loss = 0.0;
  Vector probabilities;
  GcnModel gradient;  // d loss / d parameter, same layout as the model
};

/// Forward pass, masked loss and exact gradient of that loss.
LossGradient backward(const Qes& qes, const GcnModel& model, const std::vector<bool>& labels);
/// Uses qes.labels; throws InvalidArgument when the subgraph is unlabeled.
LossGradient backward(const Qes& qes, const GcnModel& model);

/// Binary checkpoint: "MGCK", version, layer count, then per layer
/// kind/rows/cols/bias flag, 64-bit weights row-major, and the bias.
void save_model(const GcnModel& model, std::ostream& out);
GcnModel load_model(std::istream& in);
void save_model_file(const GcnModel& model, const std::string& path);
GcnModel load_model_file(const std::string& path);

}  // namespace matchgraph
