#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "matchgraph/synthetic.hpp"
#include "matchgraph/trainer.hpp"

namespace matchgraph::cli {

/// Every setting a command can read. Train-time and test-time subgraph
/// parameters are separate: `--k1/--k2/--u` fill the set belonging to the
/// command being run.
struct RunConfig {
  // Input/output paths.
  std::string embeddings;
  std::string overlaps;
  std::string model;
  std::string pairs;
  std::string pairs_out;
  std::string truth_pairs;
  std::string classes;
  std::string queries;
  std::string history_out;
  std::string results_out;
  std::string report_out;
  std::string neighbors_out;
  std::string config_out;

  SceneConfig scene{};
  TrainConfig train{};
  QesParams test_qes{100, 5, 10};

  double decision_threshold = 0.5;
  std::optional<std::size_t> topk;
  std::optional<double> tau_dist;
  std::optional<std::size_t> eval_k;
  std::optional<std::size_t> index_depth;

  std::uint64_t seed = 0;
  unsigned threads = 1;
};

// Each command is a deterministic function of its configuration. Results go
// to the configured files; reports without an output path go to `out`.
void cmd_synth(const RunConfig& config, std::ostream& out);
void cmd_index(const RunConfig& config, std::ostream& out);
void cmd_train(const RunConfig& config, std::ostream& out);
void cmd_infer(const RunConfig& config, std::ostream& out);
void cmd_baseline(const RunConfig& config, std::ostream& out);
void cmd_eval(const RunConfig& config, std::ostream& out);
void cmd_stats(const RunConfig& config, std::ostream& out);

/// Exit codes: 0 success, 2 usage error, 3 parse error, 4 compute error.
inline constexpr int kExitUsage = 2;
inline constexpr int kExitParse = 3;
inline constexpr int kExitCompute = 4;

/// Parses arguments, runs one subcommand and reports any failure as a
/// single `error: ...` line on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace matchgraph::cli
