#include "cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "matchgraph/matchgraph.hpp"

namespace matchgraph::cli {

namespace {

std::shared_ptr<spdlog::logger> logger() {
  static const auto instance = [] {
    auto sink = std::make_shared<spdlog::sinks::stderr_color_sink_mt>();
    auto log = std::make_shared<spdlog::logger>("matchgraph", sink);
    log->set_pattern("[%l] %v");
    log->set_level(spdlog::level::warn);
    if (const char* env = std::getenv("MATCHGRAPH_LOG")) {
      const std::string level(env);
      if (level == "error") log->set_level(spdlog::level::err);
      else if (level == "warn") log->set_level(spdlog::level::warn);
      else if (level == "info") log->set_level(spdlog::level::info);
      else if (level == "debug") log->set_level(spdlog::level::debug);
    }
    return log;
  }();
  return instance;
}

void require(const std::string& value, const char* flag, const char* command) {
  if (value.empty()) throw UsageError(std::string(command) + " requires " + flag);
}

std::ofstream open_output(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) throw InvalidArgument("cannot open '" + path + "' for writing");
  return out;
}

void check_written(std::ostream& out, const std::string& path) {
  out.flush();
  if (!out) throw InvalidArgument("write failed for '" + path + "'");
}

std::vector<ImageId> read_queries(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MalformedHeader("cannot open query list '" + path + "'", ParseError::npos);
  std::vector<ImageId> ids;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token, extra;
    if (!(fields >> token) || token.starts_with('#')) continue;
    ImageId id = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), id);
    if (ec != std::errc{} || ptr != token.data() + token.size() || (fields >> extra)) {
      throw MalformedRecord("expected one image id per line", ParseError::npos, line_no);
    }
    ids.push_back(id);
  }
  return ids;
}

std::vector<ImageId> queries_for(const RunConfig& config, const EmbeddingMatrix& emb) {
  if (config.queries.empty()) return emb.ids();
  auto ids = read_queries(config.queries);
  for (ImageId id : ids) emb.row_of(id);
  return ids;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

GroundTruth truth_for(const RunConfig& config, std::vector<ImageId> universe) {
  if (!config.truth_pairs.empty()) {
    const auto pairs = read_pairs_file(config.truth_pairs);
    return GroundTruth::from_pairs(pairs, std::move(universe));
  }
  if (!config.overlaps.empty()) {
    return GroundTruth::from_overlaps(load_overlaps_file(config.overlaps), config.train.tau_mo,
                                      config.train.tau_ct, std::move(universe));
  }
  throw UsageError("ground truth requires --truth-pairs or --overlaps");
}

/// Per-query results re-expanded from a pair file. The evaluated queries are
/// --queries, else every embedding id, else every id seen in either the
/// predictions or the truth.
std::pair<std::vector<RetrievalResult>, GroundTruth> load_predictions(const RunConfig& config,
                                                                      const char* command) {
  require(config.pairs, "--pairs", command);
  const auto predicted = read_pairs_file(config.pairs);
  std::vector<ImageId> universe;
  if (!config.embeddings.empty()) universe = load_embeddings_file(config.embeddings).ids();
  GroundTruth truth = truth_for(config, universe);

  std::vector<ImageId> queries;
  if (!config.queries.empty()) {
    queries = read_queries(config.queries);
  } else if (!universe.empty()) {
    queries = universe;
  } else {
    std::set<ImageId> seen(truth.universe().begin(), truth.universe().end());
    for (const auto& p : predicted) {
      seen.insert(p.a);
      seen.insert(p.b);
    }
    queries.assign(seen.begin(), seen.end());
  }
  return {results_from_pairs(predicted, queries, RetrievalMethod::gcn), std::move(truth)};
}

}  // namespace

void cmd_synth(const RunConfig& config, std::ostream& out) {
  require(config.embeddings, "--embeddings", "synth");
  require(config.overlaps, "--overlaps", "synth");
  SceneConfig scene_config = config.scene;
  scene_config.seed = config.seed;
  const Scene scene = generate_scene(scene_config);

  save_embeddings_file(scene.embeddings, config.embeddings);
  save_overlaps_file(scene.overlaps, config.overlaps);
  if (!config.classes.empty()) {
    auto file = open_output(config.classes);
    write_classes(scene.classes(), file);
    check_written(file, config.classes);
  }
  if (!config.config_out.empty()) {
    // Desk-scale run settings for this scene; pass back with --config.
    auto file = open_output(config.config_out);
    file << "# matchgraph desk-scale settings\n"
         << "k1=20\nk2=5\nu=10\ntau-mo=" << format_double(kDefaultTauMo)
         << "\ntau-ct=" << format_double(kDefaultTauCt)
         << "\nconv-widths=64,64,32,32\nfc-widths=16,1\nepochs=40\nbatch-size=8\n";
    check_written(file, config.config_out);
  }
  out << "images=" << scene.embeddings.size() << " dim=" << scene.embeddings.dim()
      << " overlap_records=" << scene.overlaps.size() << '\n';
  logger()->info("synthesized scene with {} images, {}-fold symmetry", scene.embeddings.size(),
                 scene_config.symmetry);
}

void cmd_index(const RunConfig& config, std::ostream& out) {
  require(config.embeddings, "--embeddings", "index");
  const EmbeddingMatrix emb = load_embeddings_file(config.embeddings);
  const std::size_t depth = config.index_depth.value_or(
      std::max({config.test_qes.k1, config.test_qes.k2, config.test_qes.u}));
  const Index index(emb, {depth, config.threads});
  if (!config.neighbors_out.empty()) {
    auto file = open_output(config.neighbors_out);
    for (ImageId id : emb.ids()) {
      if (index.cache_depth() == 0) break;
      for (const Neighbor& n : index.query(id, index.cache_depth()).neighbors) {
        file << id << ' ' << n.id << ' ' << format_double(n.distance) << '\n';
      }
    }
    check_written(file, config.neighbors_out);
  }
  out << "images=" << emb.size() << " dim=" << emb.dim() << " cache_depth=" << index.cache_depth()
      << '\n';
}

void cmd_train(const RunConfig& config, std::ostream& out) {
  require(config.embeddings, "--embeddings", "train");
  require(config.overlaps, "--overlaps", "train");
  require(config.model, "--model", "train");
  const EmbeddingMatrix emb = load_embeddings_file(config.embeddings);
  const OverlapStore overlaps = load_overlaps_file(config.overlaps);
  const auto queries = queries_for(config, emb);

  TrainConfig train_config = config.train;
  train_config.seed = config.seed;
  train_config.threads = config.threads;
  logger()->info("training on {} queries for {} epochs", queries.size(), train_config.epochs);
  const TrainResult result = train(emb, overlaps, queries, train_config);
  for (ImageId q : result.skipped_queries) {
    logger()->warn("query {} has no hop-1 nodes; skipped", q);
  }

  save_model_file(result.model, config.model);
  if (!config.history_out.empty()) {
    auto file = open_output(config.history_out);
    write_history(result.history, file);
    check_written(file, config.history_out);
  } else {
    write_history(result.history, out);
  }
}

void cmd_infer(const RunConfig& config, std::ostream& out) {
  require(config.embeddings, "--embeddings", "infer");
  require(config.model, "--model", "infer");
  require(config.pairs_out, "--pairs-out", "infer");
  const EmbeddingMatrix emb = load_embeddings_file(config.embeddings);
  const GcnModel model = load_model_file(config.model);
  const auto queries = queries_for(config, emb);
  const QesParams params = config.test_qes;
  params.validate();
  const Index index(emb, {std::max({params.k1, params.k2, params.u}), config.threads});

  const auto results = retrieve_all(queries, config.threads, [&](ImageId q) {
    return gcn_retrieve(model, index, emb, q, params, config.decision_threshold);
  });
  auto pairs_file = open_output(config.pairs_out);
  export_pairs(results, pairs_file);
  check_written(pairs_file, config.pairs_out);

  if (!config.results_out.empty()) {
    auto file = open_output(config.results_out);
    file << "query_id,image_id,score\n";
    for (const auto& r : results) {
      for (const auto& s : r.retrieved) file << r.query_id << ',' << s.id << ',' << format_double(s.score) << '\n';
    }
    check_written(file, config.results_out);
  }
  std::size_t retrieved = 0;
  for (const auto& r : results) retrieved += r.retrieved.size();
  out << "queries=" << results.size() << " retrieved=" << retrieved << '\n';
}

void cmd_baseline(const RunConfig& config, std::ostream& out) {
  require(config.embeddings, "--embeddings", "baseline");
  require(config.pairs_out, "--pairs-out", "baseline");
  if (config.topk.has_value() == config.tau_dist.has_value()) {
    throw UsageError("baseline requires exactly one of --topk or --tau-dist");
  }
  if (config.topk && *config.topk == 0) throw UsageError("--topk must be >= 1");
  const EmbeddingMatrix emb = load_embeddings_file(config.embeddings);
  const auto queries = queries_for(config, emb);
  const Index index(emb, {config.topk.value_or(0), config.threads});

  const auto results = retrieve_all(queries, config.threads, [&](ImageId q) {
    return config.topk ? topk_retrieve(index, q, *config.topk)
                       : threshold_retrieve(index, q, *config.tau_dist);
  });
  auto file = open_output(config.pairs_out);
  export_pairs(results, file);
  check_written(file, config.pairs_out);
  out << "queries=" << results.size() << " pairs=" << collect_pairs(results).size() << '\n';
}

void cmd_eval(const RunConfig& config, std::ostream& out) {
  const auto [results, truth] = load_predictions(config, "eval");
  const EvaluationReport report = evaluate(results, truth, config.eval_k);
  if (config.report_out.empty()) {
    write_report(report, out);
    return;
  }
  auto file = open_output(config.report_out);
  write_report(report, file);
  check_written(file, config.report_out);
}

void cmd_stats(const RunConfig& config, std::ostream& out) {
  const auto [results, truth] = load_predictions(config, "stats");
  std::optional<SymmetryClasses> classes;
  if (!config.classes.empty()) classes = read_classes_file(config.classes);
  const ViewGraphStats stats = view_graph_stats(results, truth, classes ? &*classes : nullptr);
  if (config.report_out.empty()) {
    write_view_graph_stats(stats, out);
    return;
  }
  auto file = open_output(config.report_out);
  write_view_graph_stats(stats, file);
  check_written(file, config.report_out);
}

namespace {

const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::usage: return "usage";
    case ErrorCategory::parse: return "parse";
    case ErrorCategory::compute: return "compute";
  }
  return "compute";
}

std::string one_line(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  std::replace(text.begin(), text.end(), '"', '\'');
  return text;
}

void report_error(std::ostream& err, const char* category, const std::string& kind,
                  const std::string& message) {
  err << "error: category=" << category << " kind=" << kind << " message=\"" << one_line(message)
      << "\"\n";
}

std::vector<std::size_t> parse_widths(const std::string& text, const char* flag) {
  std::vector<std::size_t> widths;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    std::size_t w = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), w);
    if (ec != std::errc{} || ptr != item.data() + item.size() || w == 0) {
      throw UsageError(std::string(flag) + " expects comma-separated positive integers");
    }
    widths.push_back(w);
  }
  return widths;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig config;
  std::size_t k1 = 100, k2 = 5, u = 10;
  std::string conv_widths, fc_widths;
  double learning_rate = config.train.adam.learning_rate;

  CLI::App app{"Matchable image retrieval with query enclosing subgraphs", "matchgraph"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_config("--config", "", "key=value settings file; command-line flags take precedence");
  app.require_subcommand(1);

  app.add_option("--embeddings", config.embeddings, "Embedding file (binary MGEB or text)");
  app.add_option("--overlaps", config.overlaps, "Overlap records `i j mo ct`");
  app.add_option("--model", config.model, "Model checkpoint");
  app.add_option("--pairs", config.pairs, "Predicted pair file to evaluate");
  app.add_option("--pairs-out", config.pairs_out, "Pair file to write");
  app.add_option("--truth-pairs", config.truth_pairs, "Ground-truth pair file");
  app.add_option("--classes", config.classes, "Symmetry class file `id class`");
  app.add_option("--queries", config.queries, "Query id list, one per line");
  app.add_option("--history-out", config.history_out, "Training history CSV");
  app.add_option("--results-out", config.results_out, "Per-query retrieval CSV");
  app.add_option("--report-out", config.report_out, "Metrics report destination");
  app.add_option("--neighbors-out", config.neighbors_out, "Cached neighbor lists");
  app.add_option("--config-out", config.config_out, "Write desk-scale settings for a synthetic scene");

  app.add_option("--k1", k1, "1-hop neighbor count")->check(CLI::PositiveNumber);
  app.add_option("--k2", k2, "2-hop neighbor count");
  app.add_option("--u", u, "Edge neighbor count")->check(CLI::PositiveNumber);
  app.add_option("--tau-mo", config.train.tau_mo, "Mesh-overlap threshold")->check(CLI::Range(0.0, 1.0));
  app.add_option("--tau-ct", config.train.tau_ct, "Common-track threshold")->check(CLI::Range(0.0, 1.0));
  app.add_option("--epochs", config.train.epochs, "Training epochs");
  app.add_option("--batch-size", config.train.batch_size, "Subgraphs per step")->check(CLI::PositiveNumber);
  app.add_option("--lr", learning_rate, "Adam learning rate")->check(CLI::PositiveNumber);
  app.add_option("--beta1", config.train.adam.beta1, "Adam beta1");
  app.add_option("--beta2", config.train.adam.beta2, "Adam beta2");
  app.add_option("--adam-eps", config.train.adam.epsilon, "Adam epsilon");
  app.add_option("--conv-widths", conv_widths, "Four comma-separated conv widths")->join(',');
  app.add_option("--fc-widths", fc_widths, "Comma-separated dense widths ending in 1")->join(',');
  app.add_option("--threshold", config.decision_threshold, "Positive probability cutoff");
  app.add_option("--topk", config.topk, "Top-k baseline retrieval count");
  app.add_option("--tau-dist", config.tau_dist, "Distance-threshold baseline");
  app.add_option("--eval-k", config.eval_k, "Evaluate only the top k of each result");
  app.add_option("--index-depth", config.index_depth, "Neighbors cached per image");

  app.add_option("--n-images", config.scene.n_images, "Synthetic scene size");
  app.add_option("--symmetry", config.scene.symmetry, "Rotational symmetry order");
  app.add_option("--overlap-angle", config.scene.overlap_angle, "Overlap window (radians)");
  app.add_option("--noise-sigma", config.scene.noise_sigma, "Per-coordinate embedding noise");
  app.add_option("--dim", config.scene.dim, "Synthetic embedding dimension");
  app.add_option("--context-weight", config.scene.context_weight, "View-dependent descriptor weight");

  app.add_option("--seed", config.seed, "Seed for every random stream");
  app.add_option("--threads", config.threads, "Worker threads (0 = all cores)");

  std::string command;
  const std::pair<const char*, const char*> commands[] = {
      {"synth", "Generate a symmetric synthetic scene"},
      {"index", "Validate embeddings and cache neighbor lists"},
      {"train", "Train the subgraph classifier"},
      {"infer", "Retrieve matchable pairs with a trained model"},
      {"baseline", "Top-k or distance-threshold retrieval"},
      {"eval", "Precision / recall / F-measure report"},
      {"stats", "View-graph true/false pair counts"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    sub->callback([&command, n = std::string(name)] { command = n; });
  }

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    report_error(err, "usage", e.get_name(), e.what());
    return kExitUsage;
  }

  try {
    config.train.adam.learning_rate = learning_rate;
    if (!conv_widths.empty()) config.train.shape.conv_widths = parse_widths(conv_widths, "--conv-widths");
    if (!fc_widths.empty()) config.train.shape.fc_widths = parse_widths(fc_widths, "--fc-widths");
    const QesParams params{k1, k2, u};
    if (command == "train") {
      config.train.qes = params;
    } else {
      config.test_qes = params;
    }

    if (command == "synth") cmd_synth(config, out);
    else if (command == "index") cmd_index(config, out);
    else if (command == "train") cmd_train(config, out);
    else if (command == "infer") cmd_infer(config, out);
    else if (command == "baseline") cmd_baseline(config, out);
    else if (command == "eval") cmd_eval(config, out);
    else if (command == "stats") cmd_stats(config, out);
  } catch (const Error& e) {
    report_error(err, category_name(e.category()), e.kind(), e.what());
    switch (e.category()) {
      case ErrorCategory::usage: return kExitUsage;
      case ErrorCategory::parse: return kExitParse;
      case ErrorCategory::compute: return kExitCompute;
    }
  } catch (const std::exception& e) {
    report_error(err, "compute", "Exception", e.what());
    return kExitCompute;
  }
  return 0;
}

}  // namespace matchgraph::cli
