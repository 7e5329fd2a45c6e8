#include "matchgraph/embeddings.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string_view>

#include "detail/binary_io.hpp"
#include "matchgraph/error.hpp"

namespace matchgraph {

namespace {

constexpr char kMagic[4] = {'M', 'G', 'E', 'B'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kHeaderBytes = 4 + 4 + 8 + 4;

double squared_norm(VectorView v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

EmbeddingMatrix parse_binary(const std::string& bytes) {
  std::istringstream stream(bytes);
  detail::ByteReader reader(stream);
  char magic[4];
  reader.read_bytes(magic, 4, "magic");
  const auto version = reader.read_le<std::uint32_t>("version");
  if (version != kVersion) {
    throw VersionMismatch("unsupported embedding file version " + std::to_string(version), 4);
  }
  const auto count = reader.read_le<std::uint64_t>("image count");
  const auto dim = reader.read_le<std::uint32_t>("dimension");
  if (dim == 0) throw MalformedHeader("embedding dimension must be >= 1", 16);

  const std::uint64_t available = bytes.size() - kHeaderBytes;
  const std::uint64_t per_image = 8 + 4 * std::uint64_t{dim};
  if (count > available / per_image) {
    // Not enough bytes for the declared shape; report where the data runs out.
    const std::uint64_t id_bytes = std::min<std::uint64_t>(available, 8 * count);
    const bool ids_short = id_bytes < 8 * count;
    throw TruncatedPayload(ids_short ? "file ends inside the id table"
                                     : "file ends inside the vector payload",
                           bytes.size());
  }
  if (available != count * per_image) {
    throw ShapeCorruption("trailing bytes after the vector payload",
                          kHeaderBytes + count * per_image);
  }

  std::vector<ImageId> ids(count);
  std::unordered_map<ImageId, std::size_t> seen;
  seen.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto at = reader.offset();
    ids[i] = reader.read_le<std::uint64_t>("image id");
    if (!seen.emplace(ids[i], i).second) {
      throw DuplicateId("duplicate image id " + std::to_string(ids[i]), at);
    }
  }

  RowMatrix vectors(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
  for (std::uint64_t i = 0; i < count; ++i) {
    for (std::uint32_t j = 0; j < dim; ++j) {
      const auto at = reader.offset();
      const auto value = reader.read_le<float>("vector entry");
      if (!std::isfinite(value)) {
        throw NonFiniteValue("non-finite entry for image " + std::to_string(ids[i]), at);
      }
      vectors(static_cast<Eigen::Index>(i), j) = static_cast<double>(value);
    }
  }
  return EmbeddingMatrix(std::move(ids), std::move(vectors));
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

EmbeddingMatrix parse_text(const std::string& bytes) {
  std::vector<ImageId> ids;
  std::vector<double> values;
  std::unordered_map<ImageId, std::size_t> seen;
  std::size_t dim = 0;

  std::size_t line_start = 0;
  std::uint64_t line_no = 0;
  while (line_start < bytes.size()) {
    ++line_no;
    std::size_t line_end = bytes.find('\n', line_start);
    if (line_end == std::string::npos) line_end = bytes.size();

    std::vector<std::pair<std::string_view, std::size_t>> tokens;  // text, byte offset
    std::size_t pos = line_start;
    while (pos < line_end) {
      while (pos < line_end && is_space(bytes[pos])) ++pos;
      if (pos >= line_end) break;
      const std::size_t begin = pos;
      while (pos < line_end && !is_space(bytes[pos])) ++pos;
      tokens.emplace_back(std::string_view(bytes).substr(begin, pos - begin), begin);
    }
    line_start = line_end + 1;
    if (tokens.empty() || tokens.front().first.starts_with('#')) continue;

    if (tokens.size() < 2) {
      throw MalformedRecord("expected `id v1 ... vd`", tokens.front().second, line_no);
    }
    const std::size_t row_dim = tokens.size() - 1;
    if (dim == 0) {
      dim = row_dim;
    } else if (row_dim != dim) {
      throw ShapeCorruption("row has " + std::to_string(row_dim) + " values, expected " +
                                std::to_string(dim),
                            tokens.front().second, line_no);
    }

    ImageId id = 0;
    {
      const auto [text, at] = tokens.front();
      const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), id);
      if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw MalformedRecord("invalid image id '" + std::string(text) + "'", at, line_no);
      }
      if (!seen.emplace(id, ids.size()).second) {
        throw DuplicateId("duplicate image id " + std::to_string(id), at, line_no);
      }
    }
    ids.push_back(id);
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const auto [text, at] = tokens[t];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw MalformedRecord("invalid number '" + std::string(text) + "'", at, line_no);
      }
      if (!std::isfinite(v)) {
        throw NonFiniteValue("non-finite entry for image " + std::to_string(id), at, line_no);
      }
      values.push_back(v);
    }
  }
  if (ids.empty()) throw MalformedHeader("no embedding rows found", 0);

  RowMatrix vectors = Eigen::Map<const RowMatrix>(
      values.data(), static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(dim));
  return EmbeddingMatrix(std::move(ids), std::move(vectors));
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::vector<ImageId> ids, RowMatrix vectors)
    : ids_(std::move(ids)), vectors_(std::move(vectors)) {
  if (static_cast<std::size_t>(vectors_.rows()) != ids_.size()) {
    throw DimensionError("embedding row count does not match id count");
  }
  if (vectors_.cols() < 1) throw DimensionError("embedding dimension must be >= 1");
  row_of_.reserve(ids_.size());
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    if (!row_of_.emplace(ids_[r], r).second) {
      throw DuplicateId("duplicate image id " + std::to_string(ids_[r]), ParseError::npos);
    }
  }
  if (!vectors_.allFinite()) {
    throw NonFiniteValue("embedding matrix contains non-finite entries", ParseError::npos);
  }
}

std::size_t EmbeddingMatrix::row_of(ImageId id) const {
  const auto it = row_of_.find(id);
  if (it == row_of_.end()) throw UnknownImage("unknown image id " + std::to_string(id));
  return it->second;
}

std::vector<double> l2_normalize(VectorView v) {
  const double norm = std::sqrt(squared_norm(v));
  if (!(norm > 0.0)) throw DegenerateVector("cannot normalize a zero-norm vector");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / norm;
  return out;
}

double unit_distance(VectorView unit_a, VectorView unit_b) {
  if (unit_a.size() != unit_b.size()) {
    throw DimensionError("distance between vectors of dimension " +
                         std::to_string(unit_a.size()) + " and " + std::to_string(unit_b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < unit_a.size(); ++i) {
    const double gap = unit_a[i] - unit_b[i];
    s += gap * gap;
  }
  // Antipodal unit vectors can round just past 2.
  return std::min(std::sqrt(s), 2.0);
}

double distance(VectorView a, VectorView b) {
  if (a.size() != b.size()) {
    throw DimensionError("distance between vectors of dimension " + std::to_string(a.size()) +
                         " and " + std::to_string(b.size()));
  }
  return unit_distance(l2_normalize(a), l2_normalize(b));
}

EmbeddingMatrix load_embeddings(std::istream& in) {
  std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (bytes.size() >= 4 && std::string_view(bytes).substr(0, 4) == std::string_view(kMagic, 4)) {
    if (bytes.size() < kHeaderBytes) {
      throw TruncatedPayload("file ends inside the header", bytes.size());
    }
    return parse_binary(bytes);
  }
  return parse_text(bytes);
}

EmbeddingMatrix load_embeddings_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedHeader("cannot open embedding file '" + path + "'", 0);
  return load_embeddings(in);
}

void save_embeddings(const EmbeddingMatrix& emb, std::ostream& out) {
  out.write(kMagic, 4);
  detail::write_le<std::uint32_t>(out, kVersion);
  detail::write_le<std::uint64_t>(out, emb.size());
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(emb.dim()));
  for (ImageId id : emb.ids()) detail::write_le<std::uint64_t>(out, id);
  for (std::size_t r = 0; r < emb.size(); ++r) {
    for (double v : emb.row(r)) detail::write_le<float>(out, static_cast<float>(v));
  }
}

void save_embeddings_file(const EmbeddingMatrix& emb, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot write embedding file '" + path + "'");
  save_embeddings(emb, out);
  if (!out) throw InvalidArgument("write failed for '" + path + "'");
}

}  // namespace matchgraph
