#include "matchgraph/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "matchgraph/error.hpp"
#include "matchgraph/evaluation.hpp"
#include "matchgraph/parallel.hpp"
#include "matchgraph/random.hpp"

namespace matchgraph {

namespace {

constexpr std::uint64_t kShuffleStream = 0x7368'7566'666c'65ULL;  // "shuffle"

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

bool unit_interval(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace

void OverlapStore::add(const OverlapRecord& record) {
  if (record.i == record.j) {
    throw InvalidArgument("overlap record pairs image " + std::to_string(record.i) + " with itself");
  }
  if (!unit_interval(record.mo) || !unit_interval(record.ct)) {
    throw InvalidArgument("overlap scores must lie in [0, 1]");
  }
  records_[std::minmax(record.i, record.j)] = {record.mo, record.ct};
}

std::optional<OverlapRecord> OverlapStore::find(ImageId i, ImageId j) const {
  const auto it = records_.find(std::minmax(i, j));
  if (it == records_.end()) return std::nullopt;
  return OverlapRecord{i, j, it->second.first, it->second.second};
}

std::vector<OverlapRecord> OverlapStore::records() const {
  std::vector<OverlapRecord> out;
  out.reserve(records_.size());
  for (const auto& [key, scores] : records_) {
    out.push_back({key.first, key.second, scores.first, scores.second});
  }
  return out;
}

OverlapStore load_overlaps(std::istream& in) {
  OverlapStore store;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string first;
    if (!(fields >> first) || first.starts_with('#')) continue;
    std::string j_text, mo_text, ct_text, extra;
    if (!(fields >> j_text >> mo_text >> ct_text) || (fields >> extra)) {
      throw MalformedRecord("expected `i j mo ct`", ParseError::npos, line_no);
    }
    OverlapRecord r;
    auto parse = [&](const std::string& text, auto& value) {
      const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
      if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw MalformedRecord("invalid field '" + text + "'", ParseError::npos, line_no);
      }
    };
    parse(first, r.i);
    parse(j_text, r.j);
    parse(mo_text, r.mo);
    parse(ct_text, r.ct);
    if (r.i == r.j) throw MalformedRecord("self-pair in overlap records", ParseError::npos, line_no);
    if (!unit_interval(r.mo) || !unit_interval(r.ct)) {
      throw MalformedRecord("overlap scores must lie in [0, 1]", ParseError::npos, line_no);
    }
    store.add(r);
  }
  return store;
}

OverlapStore load_overlaps_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MalformedHeader("cannot open overlap file '" + path + "'", ParseError::npos);
  return load_overlaps(in);
}

void save_overlaps(const OverlapStore& store, std::ostream& out) {
  for (const OverlapRecord& r : store.records()) {
    out << r.i << ' ' << r.j << ' ' << fmt(r.mo) << ' ' << fmt(r.ct) << '\n';
  }
}

void save_overlaps_file(const OverlapStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InvalidArgument("cannot write overlap file '" + path + "'");
  save_overlaps(store, out);
}

bool label_pair(const OverlapRecord& record, double tau_mo, double tau_ct) {
  return record.mo >= tau_mo || record.ct >= tau_ct;
}

void TrainConfig::validate() const {
  if (!unit_interval(tau_mo) || !unit_interval(tau_ct)) {
    throw InvalidArgument("tau_mo and tau_ct must lie in [0, 1]");
  }
  qes.validate();
  if (!(adam.learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw InvalidArgument("Adam betas must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw InvalidArgument("Adam epsilon must be positive");
  if (batch_size == 0) throw InvalidArgument("batch size must be >= 1");
  if (shape.conv_widths.size() != GcnModel::kConvLayers) {
    throw InvalidArgument("model needs exactly four conv widths");
  }
  if (shape.fc_widths.empty() || shape.fc_widths.back() != 1) {
    throw InvalidArgument("dense widths must end in 1");
  }
}

Qes label_qes(Qes qes, const OverlapStore& overlaps, double tau_mo, double tau_ct) {
  std::vector<bool> labels(qes.size(), false);
  for (std::size_t i = 0; i < qes.size(); ++i) {
    if (const auto r = overlaps.find(qes.query_id, qes.nodes[i])) {
      labels[i] = label_pair(*r, tau_mo, tau_ct);
    }
  }
  qes.labels = std::move(labels);
  return qes;
}

void optimizer_step(GcnModel& model, const GcnModel& gradient, AdamState& state,
                    const AdamConfig& config) {
  auto params = model.parameters();
  const auto grads = gradient.parameters();
  if (params.size() != grads.size()) throw DimensionError("gradient does not match the model");
  std::size_t total = 0;
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size()) throw DimensionError("gradient block size mismatch");
    total += params[b].size();
  }
  if (state.step == 0 && state.first_moment.empty()) {
    state.first_moment.assign(total, 0.0);
    state.second_moment.assign(total, 0.0);
  }
  if (state.first_moment.size() != total || state.second_moment.size() != total) {
    throw DimensionError("optimizer state does not match the model");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  std::size_t k = 0;
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t i = 0; i < params[b].size(); ++i, ++k) {
      const double g = grads[b][i];
      double& m = state.first_moment[k];
      double& v = state.second_moment[k];
      m = config.beta1 * m + (1.0 - config.beta1) * g;
      v = config.beta2 * v + (1.0 - config.beta2) * g * g;
      const double m_hat = m / correction1;
      const double v_hat = v / correction2;
      params[b][i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

TrainResult train(const EmbeddingMatrix& emb, const OverlapStore& overlaps,
                  std::span<const ImageId> queries, const TrainConfig& config) {
  config.validate();
  const std::size_t depth = std::max({config.qes.k1, config.qes.k2, config.qes.u});
  const Index index(emb, {depth, config.threads});
  return train(index, emb, overlaps, queries, config);
}

TrainResult train(const Index& index, const EmbeddingMatrix& emb, const OverlapStore& overlaps,
                  std::span<const ImageId> queries, const TrainConfig& config) {
  config.validate();
  ModelShape shape = config.shape;
  shape.input_dim = emb.dim();

  std::vector<Qes> subgraphs(queries.size());
  parallel_for(queries.size(), config.threads, [&](std::size_t i) {
    subgraphs[i] = label_qes(build_qes(index, emb, queries[i], config.qes), overlaps,
                             config.tau_mo, config.tau_ct);
  });

  TrainResult result;
  std::vector<Qes> trainable;
  for (std::size_t i = 0; i < subgraphs.size(); ++i) {
    if (subgraphs[i].hop1_count() == 0) {
      result.skipped_queries.push_back(queries[i]);
    } else {
      trainable.push_back(std::move(subgraphs[i]));
    }
  }
  if (trainable.empty()) throw NoTrainingData("no query produced a subgraph with hop-1 nodes");

  result.model = GcnModel::initialize(shape, config.seed);
  AdamState state;
  std::vector<std::size_t> order(trainable.size());

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(config.seed, kShuffleStream, epoch);
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::vector<Prf> metrics;
    metrics.reserve(order.size());
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      std::vector<LossGradient> parts(count);
      parallel_for(count, config.threads, [&](std::size_t b) {
        parts[b] = backward(trainable[order[start + b]], result.model);
      });

      GcnModel total = result.model.zeros_like();
      auto sum_blocks = total.parameters();
      for (std::size_t b = 0; b < count; ++b) {
        const auto blocks = parts[b].gradient.parameters();
        for (std::size_t k = 0; k < blocks.size(); ++k) {
          for (std::size_t i = 0; i < blocks[k].size(); ++i) sum_blocks[k][i] += blocks[k][i];
        }
        loss_sum += parts[b].loss;

        const Qes& qes = trainable[order[start + b]];
        std::vector<ImageId> predicted, relevant;
        for (std::size_t i = 0; i < qes.size(); ++i) {
          if (qes.hops[i] != Hop::one) continue;
          if (parts[b].probabilities(static_cast<Eigen::Index>(i)) > config.decision_threshold) {
            predicted.push_back(qes.nodes[i]);
          }
          if ((*qes.labels)[i]) relevant.push_back(qes.nodes[i]);
        }
        metrics.push_back(per_query_prf(predicted, relevant));
      }
      const double scale = 1.0 / static_cast<double>(count);
      for (auto block : sum_blocks) {
        for (double& g : block) g *= scale;
      }
      optimizer_step(result.model, total, state, config.adam);
    }

    const Prf prf = macro_average(metrics);
    result.history.push_back({epoch + 1, loss_sum / static_cast<double>(order.size()),
                              prf.precision, prf.recall, prf.fmeasure});
  }
  return result;
}

void write_history(std::span<const EpochStats> history, std::ostream& out) {
  for (const EpochStats& e : history) {
    out << e.epoch << ',' << fmt(e.loss) << ',' << fmt(e.precision) << ',' << fmt(e.recall) << ','
        << fmt(e.fmeasure) << '\n';
  }
}

}  // namespace matchgraph
