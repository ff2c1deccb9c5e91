#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "kgrec/ingest.hpp"
#include "kgrec/kg_store.hpp"
#include "support.hpp"

using namespace kgrec;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "kgrec");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

void write(const fs::path& p, std::string_view text) { std::ofstream(p, std::ios::binary) << text; }

// Preprocessed ml_tiny and a two-epoch checkpoint, shared by the tests below.
class CliPipeline : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = kgrec::testing::scratch_dir("cli");
        const auto ml = (kgrec::testing::data_dir() / "ml_tiny").string();
        ASSERT_EQ(run({"preprocess", ml, "-o", (dir_ / "prep").string()}).code, cli::kExitOk);
        auto r = run({"train", "--data", (dir_ / "prep").string(), "-o", (dir_ / "m.mkr").string(), "--epochs", "2", "--dim",
                      "4", "--config", "baseline+movie+user+poster"});
        ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    }
    static fs::path dir_;
};
fs::path CliPipeline::dir_;

}  // namespace

TEST(Cli, UnknownSubcommandIsUsageError) {
    auto r = run({"frobnicate"});
    EXPECT_EQ(r.code, cli::kExitUsage);
    EXPECT_FALSE(r.err.empty());
}

TEST(Cli, MissingRequiredOptionIsUsageError) {
    EXPECT_EQ(run({"predict", "--user", "1"}).code, cli::kExitUsage);
    EXPECT_EQ(run({"train", "--data", "x", "-o", "y", "--config", "baseline+nothing"}).code, cli::kExitUsage);
}

TEST(Cli, HelpExitsZero) { EXPECT_EQ(run({"--help"}).code, cli::kExitOk); }

TEST(Cli, MissingDatasetIsDataError) {
    auto dir = kgrec::testing::scratch_dir("cli_missing");
    EXPECT_EQ(run({"ingest", (dir / "nothing").string(), "-o", (dir / "g.nt").string()}).code, cli::kExitData);
}

TEST(Cli, FuseCountsUnion) {
    auto dir = kgrec::testing::scratch_dir("cli_fuse");
    write(dir / "a.nt", "<A> <r> <B> .\n<B> <r> <C> .\n");
    write(dir / "b.csv", "head,relation,tail\nB,r,C\nC,s,\"D, Jr\"\n");
    auto r = run({"fuse", (dir / "a.nt").string(), (dir / "b.csv").string(), "-o", (dir / "out.nt").string()});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    auto g = kg::parse(ingest::read_text_file(dir / "out.nt"), kg::Dialect::NTriples);
    EXPECT_EQ(g.triple_count(), 3u);
    EXPECT_EQ(g.entity_count(), 4u);
}

TEST(Cli, MalformedGraphIsDataError) {
    auto dir = kgrec::testing::scratch_dir("cli_bad");
    write(dir / "a.nt", "<A> <r> .\n");
    auto r = run({"convert", (dir / "a.nt").string(), "-o", (dir / "a.csv").string()});
    EXPECT_EQ(r.code, cli::kExitData);
    EXPECT_NE(r.err.find("line 1"), std::string::npos);
}

TEST(Cli, ConvertAndView) {
    auto dir = kgrec::testing::scratch_dir("cli_conv");
    write(dir / "a.nt", "<A> <r> <B> .\n");
    ASSERT_EQ(run({"convert", (dir / "a.nt").string(), "-o", (dir / "a.csv").string()}).code, cli::kExitOk);
    EXPECT_EQ(ingest::read_text_file(dir / "a.csv"), "head,relation,tail\nA,r,B\n");
    auto v = run({"view", (dir / "a.csv").string()});
    EXPECT_EQ(v.code, cli::kExitOk);
    EXPECT_NE(v.out.find("digraph"), std::string::npos);
}

TEST(Cli, IngestBuildsGraph) {
    auto dir = kgrec::testing::scratch_dir("cli_ingest");
    auto r = run({"ingest", (kgrec::testing::data_dir() / "ml_tiny").string(), "-o", (dir / "kg.csv").string()});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    auto g = kg::parse(ingest::read_text_file(dir / "kg.csv"), kg::Dialect::PropertyCsv);
    EXPECT_GT(g.triple_count(), 30u);
    EXPECT_EQ(run({"ingest", (kgrec::testing::data_dir() / "bx_tiny").string(), "--dataset", "bookcrossing", "-o",
                   (dir / "bx.nt").string()})
                  .code,
              cli::kExitOk);
}

TEST_F(CliPipeline, PredictPrintsOneProbability) {
    auto r = run({"predict", "--model", (dir_ / "m.mkr").string(), "--user", "1", "--item", "2"});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    const double p = std::stod(r.out);
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 1);
}

TEST_F(CliPipeline, PredictErrors) {
    const auto model = (dir_ / "m.mkr").string();
    EXPECT_EQ(run({"predict", "--model", model, "--user", "ghost", "--item", "2"}).code, cli::kExitData);
    EXPECT_EQ(run({"predict", "--model", model, "--user", "1", "--item", "999"}).code, cli::kExitData);
    EXPECT_EQ(run({"predict", "--model", model, "--user", "ghost", "--item", "2", "--age", "25", "--job", "4"}).code,
              cli::kExitOk);
    EXPECT_EQ(run({"predict", "--model", (dir_ / "none.mkr").string(), "--user", "1", "--item", "2"}).code, cli::kExitData);
}

TEST_F(CliPipeline, TrainWritesMetadata) {
    const auto meta = ingest::read_text_file(dir_ / "m.mkr.json");
    for (const char* key : {"\"seed\"", "\"git_describe\"", "\"holdout_sha256\"", "ratings_final.tsv"}) {
        EXPECT_NE(meta.find(key), std::string::npos) << key;
    }
}

TEST_F(CliPipeline, EvaluateAndBench) {
    const auto model = (dir_ / "m.mkr").string();
    auto e = run({"evaluate", "--model", model, "--data", (dir_ / "prep").string()});
    ASSERT_EQ(e.code, cli::kExitOk) << e.err;
    EXPECT_NE(e.out.find("test"), std::string::npos);

    auto b = run({"bench", "--model", model, "--runs", "10", "--warmup", "2"});
    ASSERT_EQ(b.code, cli::kExitOk) << b.err;
    EXPECT_NE(b.out.find("mean_ms,"), std::string::npos);
    EXPECT_NE(b.out.find("baseline_pass,true"), std::string::npos);
}

TEST_F(CliPipeline, AblateSingleRow) {
    auto out = dir_ / "ablate.csv";
    auto r = run({"ablate", "--data", (dir_ / "prep").string(), "-o", out.string(), "--config", "baseline", "--epochs", "1",
                  "--dim", "2"});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    const auto csv = ingest::read_text_file(out);
    EXPECT_EQ(csv.rfind("config,train_auc,train_acc,eval_auc,eval_acc,test_auc,test_acc\nbaseline,", 0), 0u);
}
