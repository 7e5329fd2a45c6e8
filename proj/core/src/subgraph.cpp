#include "matchgraph/subgraph.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "matchgraph/error.hpp"

namespace matchgraph {

void QesParams::validate() const {
  if (k1 < 1) throw InvalidArgument("k1 must be >= 1");
  if (u < 1) throw InvalidArgument("u must be >= 1");
}

std::size_t Qes::hop1_count() const {
  return static_cast<std::size_t>(std::count(hops.begin(), hops.end(), Hop::one));
}

bool operator==(const Qes& a, const Qes& b) {
  auto same = [](const Matrix& x, const Matrix& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
  };
  return a.query_id == b.query_id && a.nodes == b.nodes && a.hops == b.hops &&
         same(a.adjacency, b.adjacency) && same(a.features, b.features) && a.labels == b.labels;
}

NodeSet discover_nodes(const Index& index, ImageId q, std::size_t k1, std::size_t k2) {
  if (k1 < 1) throw InvalidArgument("k1 must be >= 1");
  NodeSet out;
  std::unordered_set<ImageId> members;
  for (const Neighbor& n : index.query(q, k1).neighbors) {
    out.ids.push_back(n.id);
    out.hops.push_back(Hop::one);
    members.insert(n.id);
  }
  if (k2 == 0) return out;

  std::vector<ImageId> second;
  const std::size_t first_count = out.ids.size();
  for (std::size_t i = 0; i < first_count; ++i) {
    for (const Neighbor& n : index.query(out.ids[i], k2).neighbors) {
      if (n.id != q && members.insert(n.id).second) second.push_back(n.id);
    }
  }
  std::sort(second.begin(), second.end());
  for (ImageId id : second) {
    out.ids.push_back(id);
    out.hops.push_back(Hop::two);
  }
  return out;
}

Matrix append_edges(const Index& index, std::span<const ImageId> nodes, std::size_t u) {
  if (u < 1) throw InvalidArgument("u must be >= 1");
  const auto n = static_cast<Eigen::Index>(nodes.size());
  std::unordered_map<ImageId, Eigen::Index> position;
  position.reserve(nodes.size());
  for (Eigen::Index i = 0; i < n; ++i) position.emplace(nodes[i], i);

  Matrix adjacency = Matrix::Zero(n, n);
  for (Eigen::Index p = 0; p < n; ++p) {
    for (const Neighbor& r : index.query(nodes[p], u).neighbors) {
      const auto it = position.find(r.id);
      if (it == position.end() || it->second == p) continue;
      adjacency(p, it->second) = 1.0;
      adjacency(it->second, p) = 1.0;
    }
  }
  return adjacency;
}

Matrix compute_features(const EmbeddingMatrix& emb, ImageId q, std::span<const ImageId> nodes) {
  const VectorView query = emb.vector(q);
  Matrix features(static_cast<Eigen::Index>(nodes.size()), static_cast<Eigen::Index>(emb.dim()));
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const VectorView v = emb.vector(nodes[i]);
    for (std::size_t j = 0; j < v.size(); ++j) {
      features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j] - query[j];
    }
  }
  return features;
}

Qes build_qes(const Index& index, const EmbeddingMatrix& emb, ImageId q,
              const QesParams& params, const LabelFn& labeler) {
  params.validate();
  if (index.dim() != emb.dim()) throw DimensionError("index and embeddings differ in dimension");
  NodeSet found = discover_nodes(index, q, params.k1, params.k2);
  Qes qes;
  qes.query_id = q;
  qes.adjacency = append_edges(index, found.ids, params.u);
  qes.features = compute_features(emb, q, found.ids);
  qes.nodes = std::move(found.ids);
  qes.hops = std::move(found.hops);
  if (labeler) {
    std::vector<bool> labels(qes.nodes.size());
    for (std::size_t i = 0; i < qes.nodes.size(); ++i) labels[i] = labeler(q, qes.nodes[i]);
    qes.labels = std::move(labels);
  }
  return qes;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
T parse_number(const std::string& text, std::uint64_t line, const char* what) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw MalformedRecord(std::string("invalid ") + what + " '" + text + "'", ParseError::npos,
                          line);
  }
  return value;
}

std::string after_prefix(const std::string& token, const std::string& prefix,
                         std::uint64_t line) {
  if (!token.starts_with(prefix)) {
    throw MalformedRecord("expected '" + prefix + "...', got '" + token + "'", ParseError::npos,
                          line);
  }
  return token.substr(prefix.size());
}

std::vector<std::string> split(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> tokens;
  for (std::string t; in >> t;) tokens.push_back(t);
  return tokens;
}

}  // namespace

void write_qes(const Qes& qes, std::ostream& out) {
  out << "QES query=" << qes.query_id << " n=" << qes.size() << " d=" << qes.features.cols()
      << '\n';
  for (std::size_t i = 0; i < qes.size(); ++i) {
    out << qes.nodes[i] << " hop=" << static_cast<int>(qes.hops[i]) << " label=";
    if (qes.labels) {
      out << ((*qes.labels)[i] ? '1' : '0');
    } else {
      out << '?';
    }
    out << '\n';
  }
  const auto n = static_cast<Eigen::Index>(qes.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (qes.adjacency(i, j) != 0.0) out << qes.nodes[i] << ' ' << qes.nodes[j] << '\n';
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < qes.features.cols(); ++j) {
      if (j > 0) out << ' ';
      out << format_double(qes.features(i, j));
    }
    out << '\n';
  }
}

Qes read_qes(std::istream& in) {
  std::vector<std::vector<std::string>> lines;
  for (std::string line; std::getline(in, line);) {
    auto tokens = split(line);
    if (!tokens.empty()) lines.push_back(std::move(tokens));
  }
  if (lines.empty() || lines[0].size() != 4 || lines[0][0] != "QES") {
    throw MalformedHeader("expected `QES query=<id> n=<n> d=<d>`", ParseError::npos, 1);
  }
  Qes qes;
  qes.query_id = parse_number<ImageId>(after_prefix(lines[0][1], "query=", 1), 1, "query id");
  const auto n = parse_number<std::size_t>(after_prefix(lines[0][2], "n=", 1), 1, "node count");
  const auto d = parse_number<std::size_t>(after_prefix(lines[0][3], "d=", 1), 1, "dimension");
  if (lines.size() < 1 + 2 * n) {
    throw TruncatedPayload("QES text has fewer lines than n requires", ParseError::npos,
                           lines.size());
  }

  std::unordered_map<ImageId, Eigen::Index> position;
  std::vector<bool> labels(n);
  bool any_known = false, any_unknown = false;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = lines[1 + i];
    const auto line_no = static_cast<std::uint64_t>(2 + i);
    if (t.size() != 3) throw MalformedRecord("expected `<id> hop=<h> label=<l>`", ParseError::npos, line_no);
    const auto id = parse_number<ImageId>(t[0], line_no, "node id");
    const auto hop = after_prefix(t[1], "hop=", line_no);
    const auto label = after_prefix(t[2], "label=", line_no);
    if (hop != "1" && hop != "2") throw MalformedRecord("hop must be 1 or 2", ParseError::npos, line_no);
    if (label != "0" && label != "1" && label != "?") {
      throw MalformedRecord("label must be 0, 1 or ?", ParseError::npos, line_no);
    }
    if (!position.emplace(id, static_cast<Eigen::Index>(i)).second) {
      throw DuplicateId("duplicate node id " + t[0], ParseError::npos, line_no);
    }
    qes.nodes.push_back(id);
    qes.hops.push_back(hop == "1" ? Hop::one : Hop::two);
    if (label == "?") {
      any_unknown = true;
    } else {
      any_known = true;
      labels[i] = label == "1";
    }
  }
  if (any_known && any_unknown) {
    throw MalformedRecord("labels must be all known or all '?'", ParseError::npos, 2);
  }
  if (any_known) qes.labels = std::move(labels);

  const std::size_t edge_end = lines.size() - n;
  qes.adjacency = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t l = 1 + n; l < edge_end; ++l) {
    const auto line_no = static_cast<std::uint64_t>(l + 1);
    if (lines[l].size() != 2) throw MalformedRecord("expected `<id_a> <id_b>`", ParseError::npos, line_no);
    const auto a = parse_number<ImageId>(lines[l][0], line_no, "edge endpoint");
    const auto b = parse_number<ImageId>(lines[l][1], line_no, "edge endpoint");
    const auto ia = position.find(a), ib = position.find(b);
    if (ia == position.end() || ib == position.end() || a == b) {
      throw ShapeCorruption("edge references an unknown node or is a self-loop", ParseError::npos,
                            line_no);
    }
    qes.adjacency(ia->second, ib->second) = 1.0;
    qes.adjacency(ib->second, ia->second) = 1.0;
  }

  qes.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = lines[edge_end + i];
    const auto line_no = static_cast<std::uint64_t>(edge_end + i + 1);
    if (t.size() != d) throw ShapeCorruption("feature row has wrong width", ParseError::npos, line_no);
    for (std::size_t j = 0; j < d; ++j) {
      qes.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          parse_number<double>(t[j], line_no, "feature value");
    }
  }
  return qes;
}

}  // namespace matchgraph
