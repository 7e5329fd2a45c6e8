#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "matchgraph/matchgraph.hpp"

namespace matchgraph::cli {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("matchgraph_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "matchgraph");
    std::ostringstream out, err;
    const int code = run(args, out, err);
    out_ = out.str();
    err_ = err.str();
    return code;
  }

  static std::string slurp(const std::string& file) {
    std::ifstream in(file, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
  }

  void synth(const std::string& tag = "") {
    ASSERT_EQ(invoke({"synth", "--embeddings", path("emb" + tag + ".bin"), "--overlaps",
                      path("ov" + tag + ".txt"), "--classes", path("classes" + tag + ".txt"),
                      "--n-images", "72", "--dim", "16", "--context-weight", "0.2", "--seed", "3"}),
              0)
        << err_;
  }

  fs::path dir_;
  std::string out_, err_;
};

TEST_F(CliTest, PipelineIsReproducible) {
  auto pipeline = [&](const std::string& tag, const std::string& threads) {
    synth(tag);
    const std::string emb = path("emb" + tag + ".bin"), ov = path("ov" + tag + ".txt");
    ASSERT_EQ(invoke({"train", "--embeddings", emb, "--overlaps", ov, "--model", path("model" + tag),
                      "--history-out", path("history" + tag), "--k1", "10", "--k2", "2", "--u", "5",
                      "--conv-widths", "8,8,6,6", "--fc-widths", "4,1", "--epochs", "2",
                      "--batch-size", "8", "--seed", "5", "--threads", threads}),
              0)
        << err_;
    ASSERT_EQ(invoke({"infer", "--embeddings", emb, "--model", path("model" + tag), "--pairs-out",
                      path("pairs" + tag), "--results-out", path("results" + tag), "--k1", "10",
                      "--threshold", "0.3", "--threads", threads}),
              0)
        << err_;
    ASSERT_EQ(invoke({"eval", "--pairs", path("pairs" + tag), "--overlaps", ov, "--embeddings", emb,
                      "--report-out", path("report" + tag)}),
              0)
        << err_;
    ASSERT_EQ(invoke({"stats", "--pairs", path("pairs" + tag), "--overlaps", ov, "--classes",
                      path("classes" + tag + ".txt"), "--report-out", path("stats" + tag)}),
              0)
        << err_;
  };
  pipeline("a", "1");
  pipeline("b", "1");
  pipeline("c", "3");
  for (const char* artifact : {"emb%.bin", "ov%.txt", "model%", "history%", "pairs%", "results%", "report%", "stats%"}) {
    auto name = [&](const std::string& tag) {
      std::string n = artifact;
      n.replace(n.find('%'), 1, tag);
      return slurp(path(n));
    };
    EXPECT_FALSE(name("a").empty()) << artifact;
    EXPECT_EQ(name("a"), name("b")) << artifact;
    EXPECT_EQ(name("a"), name("c")) << artifact;
  }
  const std::string report = slurp(path("reporta"));
  EXPECT_EQ(report.rfind("query_id,precision,recall,fmeasure\n", 0), 0u);
  EXPECT_NE(report.find("\nMACRO,"), std::string::npos);
  const std::string history = slurp(path("historya"));
  EXPECT_EQ(std::count(history.begin(), history.end(), '\n'), 2);
}

TEST_F(CliTest, PairFileAgainstItselfIsPerfect) {
  synth();
  ASSERT_EQ(invoke({"baseline", "--embeddings", path("emb.bin"), "--topk", "4", "--pairs-out", path("p")}), 0);
  ASSERT_EQ(invoke({"eval", "--pairs", path("p"), "--truth-pairs", path("p")}), 0) << err_;
  EXPECT_NE(out_.find("\nMACRO,1,1,1\n"), std::string::npos);
}

TEST_F(CliTest, BaselineEvaluationMatchesLibrary) {
  synth();
  ASSERT_EQ(invoke({"baseline", "--embeddings", path("emb.bin"), "--topk", "5", "--pairs-out", path("p")}), 0);
  ASSERT_EQ(invoke({"eval", "--pairs", path("p"), "--overlaps", path("ov.txt"), "--embeddings", path("emb.bin")}), 0);

  const EmbeddingMatrix emb = load_embeddings_file(path("emb.bin"));
  const Index index(emb, {5, 1});
  const auto results = retrieve_all(emb.ids(), 1, [&](ImageId q) { return topk_retrieve(index, q, 5); });
  const auto pairs = collect_pairs(results);
  const auto expanded = results_from_pairs(pairs, emb.ids(), RetrievalMethod::topk);
  const auto truth = GroundTruth::from_overlaps(load_overlaps_file(path("ov.txt")), kDefaultTauMo,
                                                kDefaultTauCt, emb.ids());
  std::ostringstream expected;
  write_report(evaluate(expanded, truth), expected);
  EXPECT_EQ(out_, expected.str());
}

TEST_F(CliTest, ConfigFileComposesWithFlags) {
  synth();
  {
    std::ofstream cfg(path("run.cfg"));
    cfg << "embeddings=" << path("emb.bin") << "\ntopk=3\npairs-out=" << path("from_config") << "\n";
  }
  ASSERT_EQ(invoke({"baseline", "--config", path("run.cfg")}), 0) << err_;
  ASSERT_EQ(invoke({"baseline", "--config", path("run.cfg"), "--topk", "5", "--pairs-out", path("from_flag")}), 0);
  ASSERT_EQ(invoke({"baseline", "--embeddings", path("emb.bin"), "--topk", "3", "--pairs-out", path("three")}), 0);
  ASSERT_EQ(invoke({"baseline", "--embeddings", path("emb.bin"), "--topk", "5", "--pairs-out", path("five")}), 0);
  EXPECT_EQ(slurp(path("from_config")), slurp(path("three")));
  EXPECT_EQ(slurp(path("from_flag")), slurp(path("five")));
}

TEST_F(CliTest, ErrorsMapToExitCodes) {
  synth();
  EXPECT_EQ(invoke({}), kExitUsage);
  EXPECT_EQ(invoke({"frobnicate"}), kExitUsage);
  EXPECT_EQ(invoke({"baseline", "--embeddings", path("emb.bin"), "--pairs-out", path("p")}), kExitUsage);
  EXPECT_EQ(invoke({"train", "--embeddings", path("emb.bin")}), kExitUsage);
  EXPECT_EQ(invoke({"baseline", "--embeddings", path("emb.bin"), "--topk", "x", "--pairs-out", path("p")}),
            kExitUsage);

  EXPECT_EQ(invoke({"index", "--embeddings", path("missing.bin")}), kExitParse);
  {
    std::ofstream bad(path("bad.bin"), std::ios::binary);
    bad << "MGEB\x01";
  }
  EXPECT_EQ(invoke({"index", "--embeddings", path("bad.bin")}), kExitParse);
  EXPECT_EQ(err_.rfind("error: category=parse kind=TruncatedPayload message=", 0), 0u) << err_;
  EXPECT_EQ(std::count(err_.begin(), err_.end(), '\n'), 1);

  {
    std::ofstream queries(path("queries.txt"));
    queries << "1\n9999\n";
  }
  EXPECT_EQ(invoke({"baseline", "--embeddings", path("emb.bin"), "--topk", "2", "--queries",
                    path("queries.txt"), "--pairs-out", path("p")}),
            kExitCompute);
  EXPECT_EQ(err_.rfind("error: category=compute kind=UnknownImage", 0), 0u) << err_;
}

TEST_F(CliTest, IndexReportsNeighbors) {
  synth();
  ASSERT_EQ(invoke({"index", "--embeddings", path("emb.bin"), "--index-depth", "3", "--neighbors-out",
                    path("nn.txt")}),
            0);
  EXPECT_EQ(out_, "images=72 dim=16 cache_depth=3\n");
  const std::string nn = slurp(path("nn.txt"));
  EXPECT_EQ(std::count(nn.begin(), nn.end(), '\n'), 72 * 3);
}

TEST_F(CliTest, HelpExitsCleanly) {
  EXPECT_EQ(invoke({"--help"}), 0);
  EXPECT_NE(out_.find("baseline"), std::string::npos);
}

}  // namespace
}  // namespace matchgraph::cli
