#include "matchgraph/retrieval.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "matchgraph/error.hpp"
#include "matchgraph/parallel.hpp"

namespace matchgraph {

namespace {

void order_by_score(std::vector<ScoredImage>& items) {
  std::sort(items.begin(), items.end(), [](const ScoredImage& a, const ScoredImage& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
}

double distance_score(double distance) { return std::clamp(1.0 - distance / 2.0, 0.0, 1.0); }

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

const char* to_string(RetrievalMethod method) {
  switch (method) {
    case RetrievalMethod::gcn: return "gcn";
    case RetrievalMethod::topk: return "topk";
    case RetrievalMethod::threshold: return "threshold";
  }
  return "unknown";
}

std::vector<ImageId> RetrievalResult::ids() const {
  std::vector<ImageId> out;
  out.reserve(retrieved.size());
  for (const auto& r : retrieved) out.push_back(r.id);
  return out;
}

RetrievalResult gcn_retrieve(const GcnModel& model, const Index& index, const EmbeddingMatrix& emb,
                             ImageId q, const QesParams& params, double threshold) {
  if (model.input_dim() != emb.dim()) {
    throw DimensionError("model expects " + std::to_string(model.input_dim()) +
                         "-d features, embeddings are " + std::to_string(emb.dim()) + "-d");
  }
  const Qes qes = build_qes(index, emb, q, params);
  RetrievalResult out{q, RetrievalMethod::gcn, {}};
  if (qes.size() == 0) return out;
  const Vector probs = model_forward(qes, model);
  for (std::size_t i = 0; i < qes.size(); ++i) {
    const double p = probs(static_cast<Eigen::Index>(i));
    if (qes.hops[i] == Hop::one && p > threshold) out.retrieved.push_back({qes.nodes[i], p});
  }
  order_by_score(out.retrieved);
  return out;
}

RetrievalResult topk_retrieve(const Index& index, ImageId q, std::size_t k) {
  RetrievalResult out{q, RetrievalMethod::topk, {}};
  for (const Neighbor& n : index.query(q, k).neighbors) {
    out.retrieved.push_back({n.id, distance_score(n.distance)});
  }
  return out;
}

RetrievalResult threshold_retrieve(const Index& index, ImageId q, double tau) {
  RetrievalResult out{q, RetrievalMethod::threshold, {}};
  if (index.size() < 2) {
    index.row_of(q);
    return out;
  }
  for (const Neighbor& n : index.query(q, index.size() - 1).neighbors) {
    if (n.distance > tau) break;
    out.retrieved.push_back({n.id, distance_score(n.distance)});
  }
  return out;
}

std::vector<RetrievalResult> retrieve_all(std::span<const ImageId> queries, unsigned threads,
                                          const std::function<RetrievalResult(ImageId)>& retrieve) {
  std::vector<RetrievalResult> out(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t i) { out[i] = retrieve(queries[i]); });
  return out;
}

std::vector<PairRecord> collect_pairs(std::span<const RetrievalResult> results) {
  std::map<std::pair<ImageId, ImageId>, double> best;
  for (const RetrievalResult& r : results) {
    for (const ScoredImage& s : r.retrieved) {
      if (s.id == r.query_id) continue;
      const auto key = std::minmax(r.query_id, s.id);
      auto [it, inserted] = best.emplace(key, s.score);
      if (!inserted) it->second = std::max(it->second, s.score);
    }
  }
  std::vector<PairRecord> out;
  out.reserve(best.size());
  for (const auto& [key, score] : best) out.push_back({key.first, key.second, score});
  return out;
}

std::vector<RetrievalResult> results_from_pairs(std::span<const PairRecord> pairs,
                                                std::span<const ImageId> queries,
                                                RetrievalMethod method) {
  std::map<ImageId, std::vector<ScoredImage>> by_query;
  for (const PairRecord& p : pairs) {
    by_query[p.a].push_back({p.b, p.score});
    by_query[p.b].push_back({p.a, p.score});
  }
  std::vector<RetrievalResult> out;
  out.reserve(queries.size());
  for (ImageId q : queries) {
    RetrievalResult r{q, method, {}};
    if (auto it = by_query.find(q); it != by_query.end()) r.retrieved = it->second;
    order_by_score(r.retrieved);
    out.push_back(std::move(r));
  }
  return out;
}

void write_pairs(std::span<const PairRecord> pairs, std::ostream& out) {
  out << kPairFileHeader << '\n';
  for (const PairRecord& p : pairs) out << p.a << ' ' << p.b << ' ' << fmt(p.score) << '\n';
}

void export_pairs(std::span<const RetrievalResult> results, std::ostream& out) {
  write_pairs(collect_pairs(results), out);
  if (!out) throw InvalidArgument("failed to write pair file");
}

std::vector<PairRecord> read_pairs(std::istream& in) {
  std::string line;
  std::uint64_t line_no = 0;
  if (!std::getline(in, line) || line != kPairFileHeader) {
    throw MalformedHeader(std::string("expected header `") + kPairFileHeader + "`",
                          ParseError::npos, 1);
  }
  ++line_no;
  std::vector<PairRecord> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string a_text, b_text, s_text, extra;
    if (!(fields >> a_text >> b_text >> s_text) || (fields >> extra)) {
      throw MalformedRecord("expected `id_a id_b score`", ParseError::npos, line_no);
    }
    PairRecord p;
    auto parse = [&](const std::string& text, auto& value) {
      const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
      if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw MalformedRecord("invalid field '" + text + "'", ParseError::npos, line_no);
      }
    };
    parse(a_text, p.a);
    parse(b_text, p.b);
    parse(s_text, p.score);
    if (p.a >= p.b) throw MalformedRecord("pair ids must be strictly ascending", ParseError::npos, line_no);
    if (!(p.score >= 0.0 && p.score <= 1.0)) {
      throw MalformedRecord("score outside [0, 1]", ParseError::npos, line_no);
    }
    if (!out.empty() && std::pair(out.back().a, out.back().b) >= std::pair(p.a, p.b)) {
      throw MalformedRecord("pairs must be sorted and unique", ParseError::npos, line_no);
    }
    out.push_back(p);
  }
  return out;
}

std::vector<PairRecord> read_pairs_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MalformedHeader("cannot open pair file '" + path + "'", ParseError::npos);
  return read_pairs(in);
}

}  // namespace matchgraph
