#include "matchgraph/gcn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <string>

#include "detail/binary_io.hpp"
#include "matchgraph/error.hpp"
#include "matchgraph/random.hpp"

namespace matchgraph {

namespace {

constexpr char kMagic[4] = {'M', 'G', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint8_t kConvTag = 0;
constexpr std::uint8_t kDenseTag = 1;
constexpr std::uint64_t kInitStream = 0x6763'6e69'6e69'74ULL;  // "gcninit"

void apply(Activation act, Matrix& m) {
  if (act == Activation::relu) m = m.cwiseMax(0.0);
}

Matrix relu_mask(const Matrix& pre) {
  return (pre.array() > 0.0).cast<double>().matrix();
}

std::string dims(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace

GcnModel::GcnModel(std::vector<ConvLayer> conv, std::vector<DenseLayer> fc)
    : conv_(std::move(conv)), fc_(std::move(fc)) {
  if (conv_.size() != kConvLayers) {
    throw InvalidArgument("model needs exactly " + std::to_string(kConvLayers) +
                          " graph convolution layers, got " + std::to_string(conv_.size()));
  }
  if (fc_.empty()) throw InvalidArgument("model needs at least one dense layer");

  std::size_t width = 0;
  for (std::size_t i = 0; i < conv_.size(); ++i) {
    const auto& w = conv_[i].weights;
    if (w.rows() < 2 || w.rows() % 2 != 0 || w.cols() < 1) {
      throw DimensionError("conv layer " + std::to_string(i) + " has invalid shape " +
                           dims(w.rows(), w.cols()));
    }
    if (i > 0 && conv_[i].input_dim() != width) {
      throw DimensionError("conv layer " + std::to_string(i) + " expects input width " +
                           std::to_string(conv_[i].input_dim()) + " but receives " +
                           std::to_string(width));
    }
    if (conv_[i].activation != Activation::relu) {
      throw InvalidArgument("graph convolution layers must use ReLU");
    }
    if (!w.allFinite()) throw InvalidArgument("non-finite conv weights");
    width = conv_[i].output_dim();
  }
  for (std::size_t i = 0; i < fc_.size(); ++i) {
    const auto& layer = fc_[i];
    if (layer.weights.cols() < 1 || layer.input_dim() != width) {
      throw DimensionError("dense layer " + std::to_string(i) + " has shape " +
                           dims(layer.weights.rows(), layer.weights.cols()) +
                           " but receives width " + std::to_string(width));
    }
    if (layer.bias.size() != layer.weights.cols()) {
      throw DimensionError("dense layer " + std::to_string(i) + " bias length mismatch");
    }
    const bool last = i + 1 == fc_.size();
    if (layer.activation != (last ? Activation::identity : Activation::relu)) {
      throw InvalidArgument(last ? "the output layer must be linear"
                                 : "hidden dense layers must use ReLU");
    }
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
      throw InvalidArgument("non-finite dense parameters");
    }
    width = layer.output_dim();
  }
  if (width != 1) throw DimensionError("the output layer must produce one logit per node");
}

GcnModel GcnModel::initialize(const ModelShape& shape, std::uint64_t seed) {
  if (shape.input_dim == 0) throw InvalidArgument("model input dimension must be >= 1");
  Rng rng = make_rng(seed, kInitStream);
  auto glorot = [&rng](std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix w(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(fan_out));
    // Column-major storage, filled row by row so the draw order matches the
    // checkpoint layout.
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    }
    return w;
  };

  std::vector<ConvLayer> conv;
  std::size_t width = shape.input_dim;
  for (std::size_t out : shape.conv_widths) {
    conv.push_back({glorot(2 * width, out), Activation::relu});
    width = out;
  }
  std::vector<DenseLayer> fc;
  for (std::size_t i = 0; i < shape.fc_widths.size(); ++i) {
    const std::size_t out = shape.fc_widths[i];
    const bool last = i + 1 == shape.fc_widths.size();
    fc.push_back({glorot(width, out), Vector::Zero(static_cast<Eigen::Index>(out)),
                  last ? Activation::identity : Activation::relu});
    width = out;
  }
  return GcnModel(std::move(conv), std::move(fc));
}

GcnModel GcnModel::zeros_like() const {
  GcnModel out = *this;
  for (auto block : out.parameters()) std::fill(block.begin(), block.end(), 0.0);
  return out;
}

std::size_t GcnModel::input_dim() const {
  return conv_.empty() ? 0 : conv_.front().input_dim();
}

ModelShape GcnModel::shape() const {
  ModelShape s{input_dim(), {}, {}};
  for (const auto& c : conv_) s.conv_widths.push_back(c.output_dim());
  for (const auto& f : fc_) s.fc_widths.push_back(f.output_dim());
  return s;
}

std::size_t GcnModel::parameter_count() const {
  std::size_t total = 0;
  for (auto block : parameters()) total += block.size();
  return total;
}

std::vector<std::span<double>> GcnModel::parameters() {
  std::vector<std::span<double>> blocks;
  for (auto& c : conv_) blocks.emplace_back(c.weights.data(), static_cast<std::size_t>(c.weights.size()));
  for (auto& f : fc_) {
    blocks.emplace_back(f.weights.data(), static_cast<std::size_t>(f.weights.size()));
    blocks.emplace_back(f.bias.data(), static_cast<std::size_t>(f.bias.size()));
  }
  return blocks;
}

std::vector<std::span<const double>> GcnModel::parameters() const {
  std::vector<std::span<const double>> blocks;
  for (auto block : const_cast<GcnModel*>(this)->parameters()) blocks.emplace_back(block);
  return blocks;
}

bool operator==(const GcnModel& a, const GcnModel& b) {
  if (a.conv_.size() != b.conv_.size() || a.fc_.size() != b.fc_.size()) return false;
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.conv_.size(); ++i) {
    if (a.conv_[i].weights != b.conv_[i].weights || a.conv_[i].activation != b.conv_[i].activation)
      return false;
  }
  for (std::size_t i = 0; i < a.fc_.size(); ++i) {
    if (a.fc_[i].weights != b.fc_[i].weights || a.fc_[i].bias != b.fc_[i].bias ||
        a.fc_[i].activation != b.fc_[i].activation)
      return false;
  }
  return true;
}

Matrix aggregation_matrix(const Matrix& adjacency) {
  const Eigen::Index n = adjacency.rows();
  if (adjacency.cols() != n) {
    throw InvalidAdjacency("adjacency must be square, got " + dims(n, adjacency.cols()));
  }
  Vector inv_sqrt_degree(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (adjacency(i, i) != 0.0) throw InvalidAdjacency("adjacency has a nonzero diagonal");
    double degree = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double a = adjacency(i, j);
      if (a != 0.0 && a != 1.0) throw InvalidAdjacency("adjacency entries must be 0 or 1");
      if (a != adjacency(j, i)) throw InvalidAdjacency("adjacency is not symmetric");
      degree += a;
    }
    inv_sqrt_degree(i) = degree > 0.0 ? 1.0 / std::sqrt(degree) : 0.0;
  }
  return inv_sqrt_degree.asDiagonal() * adjacency * inv_sqrt_degree.asDiagonal();
}

Matrix layer_forward(const Matrix& x, const Matrix& aggregation, const ConvLayer& layer) {
  const auto d_in = static_cast<Eigen::Index>(layer.input_dim());
  if (layer.weights.rows() != 2 * x.cols()) {
    throw DimensionError("conv weights " + dims(layer.weights.rows(), layer.weights.cols()) +
                         " do not fit features " + dims(x.rows(), x.cols()));
  }
  if (aggregation.rows() != x.rows() || aggregation.cols() != x.rows()) {
    throw DimensionError("aggregation matrix " + dims(aggregation.rows(), aggregation.cols()) +
                         " does not fit " + std::to_string(x.rows()) + " nodes");
  }
  Matrix out = x * layer.weights.topRows(d_in);
  out.noalias() += (aggregation * x) * layer.weights.bottomRows(d_in);
  apply(layer.activation, out);
  return out;
}

double sigmoid(double logit) {
  constexpr double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  double p;
  if (logit >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-logit));
  } else {
    const double e = std::exp(logit);
    p = e / (1.0 + e);
  }
  return std::clamp(p, lo, hi);
}

namespace {

struct ForwardTrace {
  Matrix aggregation;
  std::vector<Matrix> conv_inputs;      // H_l
  std::vector<Matrix> conv_aggregated;  // G H_l
  std::vector<Matrix> conv_pre;         // pre-activation Z_l
  std::vector<Matrix> fc_inputs;
  std::vector<Matrix> fc_pre;
  Vector probabilities;
};

ForwardTrace trace_forward(const Matrix& features, const Matrix& adjacency,
                           const GcnModel& model) {
  if (static_cast<std::size_t>(features.cols()) != model.input_dim()) {
    throw DimensionError("features have width " + std::to_string(features.cols()) +
                         " but the model expects " + std::to_string(model.input_dim()));
  }
  if (adjacency.rows() != features.rows()) {
    throw DimensionError("adjacency " + dims(adjacency.rows(), adjacency.cols()) +
                         " does not match " + std::to_string(features.rows()) + " nodes");
  }
  ForwardTrace t;
  t.aggregation = aggregation_matrix(adjacency);

  Matrix h = features;
  for (const ConvLayer& layer : model.conv()) {
    const auto d_in = static_cast<Eigen::Index>(layer.input_dim());
    Matrix gh = t.aggregation * h;
    Matrix z = h * layer.weights.topRows(d_in);
    z.noalias() += gh * layer.weights.bottomRows(d_in);
    t.conv_inputs.push_back(std::move(h));
    t.conv_aggregated.push_back(std::move(gh));
    h = z;
    apply(layer.activation, h);
    t.conv_pre.push_back(std::move(z));
  }
  for (const DenseLayer& layer : model.fc()) {
    Matrix z = h * layer.weights;
    z.rowwise() += layer.bias.transpose();
    t.fc_inputs.push_back(std::move(h));
    h = z;
    apply(layer.activation, h);
    t.fc_pre.push_back(std::move(z));
  }
  t.probabilities.resize(h.rows());
  for (Eigen::Index i = 0; i < h.rows(); ++i) t.probabilities(i) = sigmoid(h(i, 0));
  return t;
}

std::size_t check_loss_inputs(const Vector& probabilities, const std::vector<bool>& labels,
                              std::span<const Hop> hops) {
  const auto n = static_cast<std::size_t>(probabilities.size());
  if (labels.size() != n || hops.size() != n) {
    throw DimensionError("probabilities, labels and hops must have equal length");
  }
  std::size_t count = 0;
  for (Hop h : hops) count += h == Hop::one ? 1 : 0;
  if (count == 0) throw EmptyLossSet("no hop-1 node to compute the loss on");
  return count;
}

}  // namespace

Vector model_forward(const Matrix& features, const Matrix& adjacency, const GcnModel& model) {
  return trace_forward(features, adjacency, model).probabilities;
}

Vector model_forward(const Qes& qes, const GcnModel& model) {
  return model_forward(qes.features, qes.adjacency, model);
}

double masked_loss(const Vector& probabilities, const std::vector<bool>& labels,
                   std::span<const Hop> hops) {
  const std::size_t count = check_loss_inputs(probabilities, labels, hops);
  double total = 0.0;
  for (Eigen::Index i = 0; i < probabilities.size(); ++i) {
    if (hops[static_cast<std::size_t>(i)] != Hop::one) continue;
    const double p = std::clamp(probabilities(i), kProbabilityClamp, 1.0 - kProbabilityClamp);
    total -= labels[static_cast<std::size_t>(i)] ? std::log(p) : std::log(1.0 - p);
  }
  return total / static_cast<double>(count);
}

LossGradient backward(const Qes& qes, const GcnModel& model, const std::vector<bool>& labels) {
  ForwardTrace t = trace_forward(qes.features, qes.adjacency, model);
  const std::size_t count = check_loss_inputs(t.probabilities, labels, qes.hops);

  LossGradient out;
  out.loss = masked_loss(t.probabilities, labels, qes.hops);
  out.gradient = model.zeros_like();

  // d loss / d logit. Inside the clamp window this is (p - y) / m for hop-1
  // nodes; the clamp is flat outside it.
  const Eigen::Index n = t.probabilities.size();
  Matrix upstream = Matrix::Zero(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (qes.hops[static_cast<std::size_t>(i)] != Hop::one) continue;
    const double p = t.probabilities(i);
    if (p <= kProbabilityClamp || p >= 1.0 - kProbabilityClamp) continue;
    const double y = labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    upstream(i, 0) = (p - y) / static_cast<double>(count);
  }

  const auto& fc = model.fc();
  auto grad_blocks = out.gradient.parameters();
  std::vector<Matrix> fc_dw(fc.size());
  std::vector<Vector> fc_db(fc.size());
  for (std::size_t l = fc.size(); l-- > 0;) {
    if (fc[l].activation == Activation::relu) upstream = upstream.cwiseProduct(relu_mask(t.fc_pre[l]));
    fc_dw[l] = t.fc_inputs[l].transpose() * upstream;
    fc_db[l] = upstream.colwise().sum().transpose();
    upstream = upstream * fc[l].weights.transpose();
  }

  const auto& conv = model.conv();
  std::vector<Matrix> conv_dw(conv.size());
  for (std::size_t l = conv.size(); l-- > 0;) {
    const auto d_in = static_cast<Eigen::Index>(conv[l].input_dim());
    if (conv[l].activation == Activation::relu) upstream = upstream.cwiseProduct(relu_mask(t.conv_pre[l]));
    Matrix dw(conv[l].weights.rows(), conv[l].weights.cols());
    dw.topRows(d_in).noalias() = t.conv_inputs[l].transpose() * upstream;
    dw.bottomRows(d_in).noalias() = t.conv_aggregated[l].transpose() * upstream;
    conv_dw[l] = std::move(dw);
    if (l > 0) {
      Matrix down = upstream * conv[l].weights.topRows(d_in).transpose();
      down.noalias() += t.aggregation.transpose() * (upstream * conv[l].weights.bottomRows(d_in).transpose());
      upstream = std::move(down);
    }
  }

  std::size_t b = 0;
  auto copy_into = [&grad_blocks, &b](const auto& src) {
    std::copy(src.data(), src.data() + src.size(), grad_blocks[b++].begin());
  };
  for (const auto& dw : conv_dw) copy_into(dw);
  for (std::size_t l = 0; l < fc.size(); ++l) {
    copy_into(fc_dw[l]);
    copy_into(fc_db[l]);
  }
  out.probabilities = std::move(t.probabilities);
  return out;
}

LossGradient backward(const Qes& qes, const GcnModel& model) {
  if (!qes.labels) throw InvalidArgument("subgraph for query " + std::to_string(qes.query_id) + " has no labels");
  return backward(qes, model, *qes.labels);
}

void save_model(const GcnModel& model, std::ostream& out) {
  out.write(kMagic, 4);
  detail::write_le<std::uint32_t>(out, kCheckpointVersion);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.conv().size() + model.fc().size()));
  auto write_matrix = [&out](const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) detail::write_le<double>(out, m(r, c));
    }
  };
  for (const auto& c : model.conv()) {
    detail::write_le<std::uint8_t>(out, kConvTag);
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.weights.rows()));
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.weights.cols()));
    detail::write_le<std::uint8_t>(out, 0);
    write_matrix(c.weights);
  }
  for (const auto& f : model.fc()) {
    detail::write_le<std::uint8_t>(out, kDenseTag);
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.weights.rows()));
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.weights.cols()));
    detail::write_le<std::uint8_t>(out, 1);
    write_matrix(f.weights);
    for (Eigen::Index i = 0; i < f.bias.size(); ++i) detail::write_le<double>(out, f.bias(i));
  }
}

GcnModel load_model(std::istream& in) {
  detail::ByteReader reader(in);
  char magic[4];
  reader.read_bytes(magic, 4, "magic");
  if (std::string_view(magic, 4) != std::string_view(kMagic, 4)) {
    throw MalformedHeader("not a model checkpoint (bad magic)", 0);
  }
  const auto version = reader.read_le<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw VersionMismatch("unsupported checkpoint version " + std::to_string(version), 4);
  }
  const auto layer_count = reader.read_le<std::uint32_t>("layer count");
  if (layer_count < GcnModel::kConvLayers + 1 || layer_count > 64) {
    throw ShapeCorruption("implausible layer count " + std::to_string(layer_count), 8);
  }

  std::vector<ConvLayer> conv;
  std::vector<DenseLayer> fc;
  std::uint64_t width = 0;
  for (std::uint32_t l = 0; l < layer_count; ++l) {
    const auto layer_at = reader.offset();
    const auto kind = reader.read_le<std::uint8_t>("layer kind");
    const auto rows = reader.read_le<std::uint32_t>("row count");
    const auto cols = reader.read_le<std::uint32_t>("column count");
    const auto has_bias = reader.read_le<std::uint8_t>("bias flag");
    const std::string where = "layer " + std::to_string(l);

    if (kind != kConvTag && kind != kDenseTag) throw ShapeCorruption(where + ": unknown layer kind", layer_at);
    const bool is_conv = kind == kConvTag;
    if (is_conv != (l < GcnModel::kConvLayers)) {
      throw ShapeCorruption(where + ": expected four conv layers followed by dense layers", layer_at);
    }
    if (has_bias != (is_conv ? 0 : 1)) throw ShapeCorruption(where + ": unexpected bias flag", layer_at);
    if (rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20)) {
      throw ShapeCorruption(where + ": implausible shape " + dims(rows, cols), layer_at);
    }
    const std::uint64_t d_in = is_conv ? rows / 2 : rows;
    if ((is_conv && rows % 2 != 0) || (l > 0 && d_in != width)) {
      throw ShapeCorruption(where + ": shape " + dims(rows, cols) + " does not chain", layer_at);
    }
    width = cols;

    Matrix w(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) {
        const auto at = reader.offset();
        w(r, c) = reader.read_le<double>("weights");
        if (!std::isfinite(w(r, c))) throw NonFiniteValue(where + ": non-finite weight", at);
      }
    }
    if (is_conv) {
      conv.push_back({std::move(w), Activation::relu});
      continue;
    }
    Vector bias(cols);
    for (std::uint32_t c = 0; c < cols; ++c) {
      const auto at = reader.offset();
      bias(c) = reader.read_le<double>("bias");
      if (!std::isfinite(bias(c))) throw NonFiniteValue(where + ": non-finite bias", at);
    }
    const bool last = l + 1 == layer_count;
    fc.push_back({std::move(w), std::move(bias), last ? Activation::identity : Activation::relu});
  }
  if (!reader.at_end()) throw ShapeCorruption("trailing bytes after the last layer", reader.offset());
  if (width != 1) throw ShapeCorruption("output layer must have one column", reader.offset());
  return GcnModel(std::move(conv), std::move(fc));
}

void save_model_file(const GcnModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot write checkpoint '" + path + "'");
  save_model(model, out);
  if (!out) throw InvalidArgument("write failed for '" + path + "'");
}

GcnModel load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedHeader("cannot open checkpoint '" + path + "'", 0);
  return load_model(in);
}

}  // namespace matchgraph
