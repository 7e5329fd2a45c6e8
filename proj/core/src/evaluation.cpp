#include "matchgraph/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <ostream>
#include <string>

#include "matchgraph/retrieval.hpp"
#include "matchgraph/trainer.hpp"

namespace matchgraph {

namespace {

std::vector<ImageId> unique_sorted(std::span<const ImageId> ids) {
  std::vector<ImageId> out(ids.begin(), ids.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

Prf per_query_prf(std::span<const ImageId> predicted, std::span<const ImageId> relevant) {
  const auto pred = unique_sorted(predicted);
  const auto rel = unique_sorted(relevant);
  std::vector<ImageId> hit;
  std::set_intersection(pred.begin(), pred.end(), rel.begin(), rel.end(), std::back_inserter(hit));
  const auto tp = static_cast<double>(hit.size());

  Prf out;
  if (pred.empty()) {
    out.precision = rel.empty() ? 1.0 : 0.0;
  } else {
    out.precision = tp / static_cast<double>(pred.size());
  }
  out.recall = rel.empty() ? 1.0 : tp / static_cast<double>(rel.size());
  const double sum = out.precision + out.recall;
  out.fmeasure = sum > 0.0 ? 2.0 * out.precision * out.recall / sum : 0.0;
  return out;
}

Prf macro_average(std::span<const Prf> per_query) {
  Prf out;
  if (per_query.empty()) return out;
  for (const Prf& p : per_query) {
    out.precision += p.precision;
    out.recall += p.recall;
    out.fmeasure += p.fmeasure;
  }
  const auto n = static_cast<double>(per_query.size());
  out.precision /= n;
  out.recall /= n;
  out.fmeasure /= n;
  return out;
}

GroundTruth::GroundTruth(std::vector<ImageId> universe)
    : universe_(universe.begin(), universe.end()) {}

GroundTruth GroundTruth::from_overlaps(const OverlapStore& overlaps, double tau_mo, double tau_ct,
                                       std::vector<ImageId> universe) {
  GroundTruth truth(std::move(universe));
  for (const OverlapRecord& r : overlaps.records()) {
    if (label_pair(r, tau_mo, tau_ct)) truth.add_pair(r.i, r.j);
  }
  return truth;
}

GroundTruth GroundTruth::from_pairs(std::span<const PairRecord> pairs,
                                    std::vector<ImageId> universe) {
  GroundTruth truth(std::move(universe));
  for (const PairRecord& p : pairs) truth.add_pair(p.a, p.b);
  return truth;
}

void GroundTruth::add_pair(ImageId a, ImageId b) {
  if (a == b) return;
  universe_.insert(a);
  universe_.insert(b);
  if (partners_[a].insert(b).second) ++pair_count_;
  partners_[b].insert(a);
}

bool GroundTruth::matchable(ImageId a, ImageId b) const {
  const auto it = partners_.find(a);
  return it != partners_.end() && it->second.contains(b);
}

std::vector<ImageId> GroundTruth::relevant(ImageId q) const {
  const auto it = partners_.find(q);
  if (it == partners_.end()) return {};
  return {it->second.begin(), it->second.end()};
}

EvaluationReport evaluate(std::span<const RetrievalResult> results, const GroundTruth& truth,
                          std::optional<std::size_t> max_retrieved) {
  EvaluationReport report;
  std::vector<Prf> all;
  all.reserve(results.size());
  for (const RetrievalResult& r : results) {
    std::vector<ImageId> predicted = r.ids();
    if (max_retrieved && predicted.size() > *max_retrieved) {
      // Results are already ordered by descending score.
      predicted.resize(*max_retrieved);
    }
    const Prf prf = per_query_prf(predicted, truth.relevant(r.query_id));
    report.per_query.push_back({r.query_id, prf});
    all.push_back(prf);
  }
  report.macro = macro_average(all);
  return report;
}

void write_report(const EvaluationReport& report, std::ostream& out) {
  out << "query_id,precision,recall,fmeasure\n";
  for (const auto& q : report.per_query) {
    out << q.query_id << ',' << fmt(q.prf.precision) << ',' << fmt(q.prf.recall) << ','
        << fmt(q.prf.fmeasure) << '\n';
  }
  out << "MACRO," << fmt(report.macro.precision) << ',' << fmt(report.macro.recall) << ','
      << fmt(report.macro.fmeasure) << '\n';
}

ViewGraphStats view_graph_stats(std::span<const RetrievalResult> results,
                                const GroundTruth& truth, const SymmetryClasses* classes) {
  ViewGraphStats stats;
  if (classes) stats.cross_class_false_positive = 0;
  for (const PairRecord& p : collect_pairs(results)) {
    ++stats.pairs;
    if (truth.matchable(p.a, p.b)) {
      ++stats.true_positive;
      continue;
    }
    ++stats.false_positive;
    if (classes) {
      const auto a = classes->find(p.a), b = classes->find(p.b);
      if (a != classes->end() && b != classes->end() && a->second != b->second) {
        ++*stats.cross_class_false_positive;
      }
    }
  }
  return stats;
}

void write_view_graph_stats(const ViewGraphStats& stats, std::ostream& out) {
  out << "pairs,true_positive,false_positive,cross_class_false_positive\n";
  out << stats.pairs << ',' << stats.true_positive << ',' << stats.false_positive << ',';
  if (stats.cross_class_false_positive) {
    out << *stats.cross_class_false_positive;
  } else {
    out << "NA";
  }
  out << '\n';
}

}  // namespace matchgraph
