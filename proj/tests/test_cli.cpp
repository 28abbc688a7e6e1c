#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <lbal/embedding_store.hpp>

namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code;
    std::string output;
};

CliResult run_cli(const std::string& args) {
    const fs::path log = fs::temp_directory_path() / ("lbal_cli_log_" + std::to_string(::getpid()));
    const std::string cmd = std::string(LBAL_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    fs::remove(log);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("lbal_cli_" + std::to_string(::getpid()) + "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string d(const std::string& name = "") const { return (name.empty() ? dir_ : dir_ / name).string(); }

    void gen_blobs(const std::string& sub = "") {
        const auto r = run_cli("gen --blobs --classes 5 --per-class 20 --dim 8 --seed 3 --out-dir " + d(sub));
        ASSERT_EQ(r.code, 0) << r.output;
    }

    fs::path dir_;
};

TEST_F(CliTest, GenWritesValidEmb1AndLbl1Pairs) {
    gen_blobs();
    const auto emb = slurp(dir_ / "train.emb");
    ASSERT_GE(emb.size(), 24u);
    EXPECT_EQ(emb.substr(0, 4), "EMB1");
    EXPECT_EQ(slurp(dir_ / "train.lbl").substr(0, 4), "LBL1");
    const auto train = lbal::load_embeddings(dir_ / "train.emb");
    const auto labels = lbal::load_labels(dir_ / "train.lbl");
    EXPECT_EQ(train.rows(), 100u);
    EXPECT_EQ(train.cols(), 8u);
    EXPECT_EQ(labels.size(), 100u);
    EXPECT_EQ(labels.num_classes(), 5u);
    EXPECT_EQ(lbal::load_embeddings(dir_ / "test.emb").cols(), 8u);
}

TEST_F(CliTest, LongtailGenUsesDecreasingClassSizes) {
    const auto r = run_cli("gen --longtail --classes 4 --max 40 --min 5 --dim 4 --out-dir " + d("nested/out"));
    ASSERT_EQ(r.code, 0) << r.output;
    const auto labels = lbal::load_labels(dir_ / "nested" / "out" / "train.lbl");
    std::vector<std::size_t> counts(4, 0);
    for (auto y : labels.values()) ++counts[y];
    EXPECT_EQ(counts.front(), 40u);
    EXPECT_EQ(counts.back(), 5u);
    for (std::size_t c = 1; c < counts.size(); ++c) EXPECT_LE(counts[c], counts[c - 1]);
}

TEST_F(CliTest, SelectWritesSelectionContract) {
    gen_blobs();
    const auto r = run_cli("select --strategy kmeans --budget 10 --seed 0 --emb " + d("train.emb") + " --out-dir " + d());
    ASSERT_EQ(r.code, 0) << r.output;
    const auto sel = lbal::load_selection(dir_ / "sel_kmeans_single_b10_s0.json");
    EXPECT_EQ(sel.strategy, "kmeans_single");
    EXPECT_EQ(sel.seed, 0u);
    EXPECT_EQ(sel.indices.size(), 10u);
    EXPECT_EQ(sel.budget_schedule, std::vector<std::size_t>{10});
    EXPECT_EQ(sel.round_boundaries, std::vector<std::size_t>{10});
    EXPECT_NO_THROW(sel.validate(100));
}

TEST_F(CliTest, IterativeStrategiesRecordRoundBoundaries) {
    gen_blobs();
    const auto r = run_cli("select --strategy kmeans-multi,coreset --schedule 5,10,20 --seed 1 --out-dir " + d());
    ASSERT_EQ(r.code, 0) << r.output;
    for (const auto* name : {"sel_kmeans_multi_b20_s1.json", "sel_coreset_b20_s1.json"}) {
        const auto sel = lbal::load_selection(dir_ / name);
        EXPECT_EQ(sel.round_boundaries, (std::vector<std::size_t>{5, 10, 20})) << name;
        EXPECT_NO_THROW(sel.validate(100));
    }
}

TEST_F(CliTest, MaxEntropyRunsWithLabels) {
    gen_blobs();
    const auto r = run_cli("select --strategy max-entropy --schedule 10,15 --probe-epochs 20 --labels " + d("train.lbl") +
                           " --out-dir " + d());
    ASSERT_EQ(r.code, 0) << r.output;
    const auto sel = lbal::load_selection(dir_ / "sel_max_entropy_b15_s0.json");
    EXPECT_EQ(sel.indices.size(), 15u);
}

TEST_F(CliTest, UsageErrorsExitWithTwoAndWriteNothing) {
    gen_blobs();
    const auto out = d("out");
    EXPECT_EQ(run_cli("select --strategy uniform --budget 10 --out-dir " + d()).code, 2);
    EXPECT_EQ(run_cli("select --strategy no-such-thing --budget 10 --out-dir " + d()).code, 2);
    EXPECT_EQ(run_cli("select --strategy random --out-dir " + d()).code, 2);
    EXPECT_EQ(run_cli("select --strategy random --budget 10 --bogus-flag --out-dir " + d()).code, 2);
    EXPECT_EQ(run_cli("gen --classes 3 --out-dir " + out).code, 2);
    EXPECT_EQ(run_cli("").code, 2);
    EXPECT_FALSE(fs::exists(out));
}

TEST_F(CliTest, RuntimeErrorsExitWithOne) {
    gen_blobs();
    EXPECT_EQ(run_cli("select --strategy random --budget 1000 --out-dir " + d()).code, 1);
    EXPECT_EQ(run_cli("select --strategy random --budget 5 --emb " + d("missing.emb") + " --out-dir " + d()).code, 1);
    std::ofstream(dir_ / "bad.emb", std::ios::binary) << "EMB2garbage";
    EXPECT_EQ(run_cli("select --strategy random --budget 5 --emb " + d("bad.emb") + " --out-dir " + d()).code, 1);
}

TEST_F(CliTest, OutputsAreByteIdenticalAcrossThreadCounts) {
    gen_blobs();
    for (const auto* threads : {"1", "8"}) {
        const std::string sub = std::string("t") + threads;
        const auto r = run_cli(std::string("select --threads ") + threads +
                               " --strategy kmeans,kmeans-multi,coreset,random --schedule 5,10 --seeds 0,1 --emb " +
                               d("train.emb") + " --out-dir " + d(sub));
        ASSERT_EQ(r.code, 0) << r.output;
    }
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(dir_ / "t1")) {
        EXPECT_EQ(slurp(entry.path()), slurp(dir_ / "t8" / entry.path().filename())) << entry.path();
        ++compared;
    }
    EXPECT_EQ(compared, 12u);
}

TEST_F(CliTest, ConfigFileSuppliesDefaultsAndFlagsWin) {
    gen_blobs();
    std::ofstream(dir_ / "run.ini") << "seed=4\nselect.strategy=random\nselect.budget=7\n";
    auto r = run_cli("--config " + d("run.ini") + " select --out-dir " + d());
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_TRUE(fs::exists(dir_ / "sel_random_b7_s4.json"));
    r = run_cli("--config " + d("run.ini") + " select --budget 9 --out-dir " + d());
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_TRUE(fs::exists(dir_ / "sel_random_b9_s4.json"));
}

TEST_F(CliTest, EvalOfFullPoolGivesFullCoverageAndPerfectNearestNeighbour) {
    gen_blobs();
    ASSERT_EQ(run_cli("select --strategy random --budget 100 --out-dir " + d()).code, 0);
    const auto r = run_cli("eval --metrics coverage,histogram,knn --test-emb " + d("train.emb") + " --test-labels " +
                           d("train.lbl") + " --out-dir " + d() + " " + d("sel_random_b100_s0.json"));
    ASSERT_EQ(r.code, 0) << r.output;
    const auto doc = nlohmann::json::parse(slurp(dir_ / "metrics.json"));
    ASSERT_EQ(doc["reports"].size(), 1u);
    const auto& rep = doc["reports"][0];
    EXPECT_DOUBLE_EQ(rep["coverage_percent"].get<double>(), 100.0);
    EXPECT_DOUBLE_EQ(rep["accuracy"]["knn_top1"].get<double>(), 100.0);
    EXPECT_DOUBLE_EQ(doc["summary"]["coverage_percent"]["random"]["100"]["mean"].get<double>(), 100.0);
    EXPECT_TRUE(fs::exists(dir_ / "table.txt"));
    EXPECT_EQ(slurp(dir_ / "histogram.csv").substr(0, 40), "strategy,budget,seed,occurrences,classes");
}

TEST_F(CliTest, EvalAggregatesSeedsPerRoundAndTrainsLinearProbe) {
    gen_blobs();
    ASSERT_EQ(run_cli("select --strategy kmeans-multi --schedule 5,10 --seeds 0,1,2 --out-dir " + d()).code, 0);
    const auto r = run_cli("eval --metrics coverage,linear --probe-epochs 20 --out-dir " + d() + " " +
                           d("sel_kmeans_multi_b10_s0.json") + " " + d("sel_kmeans_multi_b10_s1.json") + " " +
                           d("sel_kmeans_multi_b10_s2.json"));
    ASSERT_EQ(r.code, 0) << r.output;
    const auto doc = nlohmann::json::parse(slurp(dir_ / "metrics.json"));
    EXPECT_EQ(doc["reports"].size(), 6u);
    const auto& cell = doc["summary"]["linear_top1"]["kmeans_multi"]["10"];
    EXPECT_EQ(cell["runs"].get<int>(), 3);
    EXPECT_GE(cell["mean"].get<double>(), 0.0);
    EXPECT_NE(r.output.find("±"), std::string::npos);
}

TEST_F(CliTest, ReproduceQuickPassesAndTamperFails) {
    const auto ok = run_cli("reproduce --quick --only A1,A3,A10");
    EXPECT_EQ(ok.code, 0) << ok.output;
    EXPECT_NE(ok.output.find("[PASS] A1"), std::string::npos) << ok.output;
    const auto bad = run_cli("reproduce --quick --tamper --only A1");
    EXPECT_NE(bad.code, 0) << bad.output;
    EXPECT_NE(bad.output.find("[FAIL] A1"), std::string::npos) << bad.output;
}

}  // namespace
