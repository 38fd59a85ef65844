#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "mlpsd/cli.hpp"

using namespace mlpsd;
namespace fs = std::filesystem;

namespace {

int run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "mlpsd");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::vector<std::string> kSmall{"--n-samples", "300", "--feature-dim", "8", "--blocks", "2", "2", "2",
                                      "--teacher-epochs", "2", "--student-epochs", "3", "--hidden", "8",
                                      "--threads", "1"};

std::vector<std::string> with_small(std::vector<std::string> args) {
    args.insert(args.end(), kSmall.begin(), kSmall.end());
    return args;
}

} // namespace

TEST(Cli, SynthIsByteIdenticalAndCreatesDirectories) {
    const auto dir = testing_util::temp_dir("cli_synth");
    ASSERT_EQ(run_cli(with_small({"synth", "--seed", "4", "--out", (dir / "a" / "b").string()})), 0);
    ASSERT_EQ(run_cli(with_small({"synth", "--seed", "4", "--out", (dir / "c").string()})), 0);
    EXPECT_EQ(slurp(dir / "a" / "b" / "dataset.jsonl"), slurp(dir / "c" / "dataset.jsonl"));
    const auto planted = read_json_file(dir / "c" / "planted_partition.json");
    EXPECT_EQ(planted.at("clusters").size(), 3u);
    const auto set = load_annotations(dir / "c" / "dataset.jsonl");
    EXPECT_EQ(set.num_samples(), 300);
    EXPECT_EQ(set.num_categories(), 6);
}

TEST(Cli, ConfigErrorsExitWithTwo) {
    const auto dir = testing_util::temp_dir("cli_config");
    EXPECT_EQ(run_cli({"synth", "--blocks", "3", "3", "--m", "5", "--out", dir.string()}), 2);
    EXPECT_EQ(run_cli({"partition", "--strategy", "spectral", "--out", dir.string()}), 2);
    EXPECT_EQ(run_cli({"bogus"}), 2);
    EXPECT_EQ(run_cli({"synth", "--k", "-1", "--out", dir.string()}), 2);
}

TEST(Cli, DataErrorsExitWithThree) {
    const auto dir = testing_util::temp_dir("cli_data");
    EXPECT_EQ(run_cli({"stats", "--data", (dir / "missing.jsonl").string(), "--out", dir.string()}), 2);
    std::ofstream(dir / "bad.jsonl") << "{\"schema\":\"nope\"}\n";
    EXPECT_EQ(run_cli({"stats", "--data", (dir / "bad.jsonl").string(), "--out", dir.string()}), 3);
}

TEST(Cli, PartitionStrategies) {
    const auto dir = testing_util::temp_dir("cli_partition");
    ASSERT_EQ(run_cli(with_small({"synth", "--out", dir.string()})), 0);
    const auto data = (dir / "dataset.jsonl").string();

    ASSERT_EQ(run_cli({"partition", "--data", data, "--strategy", "random", "--k", "3", "--out", dir.string()}), 0);
    const auto random = load_partition(dir / "partition_random.json");
    EXPECT_EQ(random.clusters.size(), 3u);
    for (const auto& c : random.clusters) EXPECT_EQ(c.size(), 2u);

    ASSERT_EQ(run_cli({"partition", "--data", data, "--strategy", "cgp", "--k", "1", "--out", dir.string()}), 0);
    EXPECT_EQ(load_partition(dir / "partition_cgp.json").clusters, (std::vector<IndexList>{{0, 1, 2, 3, 4, 5}}));

    ASSERT_EQ(run_cli({"partition", "--data", data, "--strategy", "both", "--k", "3", "--out", dir.string()}), 0);
    const auto cgp = load_partition(dir / "partition_cgp.json");
    EXPECT_TRUE(fs::exists(dir / "partition_dgp.json"));
    const auto planted = read_json_file(dir / "planted_partition.json").at("clusters").get<std::vector<IndexList>>();
    EXPECT_DOUBLE_EQ(adjusted_rand_index(cgp.clusters, planted, 6), 1.0);
}

TEST(Cli, StagesChainThroughFiles) {
    const auto dir = testing_util::temp_dir("cli_stages");
    ASSERT_EQ(run_cli(with_small({"synth", "--out", dir.string()})), 0);
    const auto data = (dir / "dataset.jsonl").string();
    ASSERT_EQ(run_cli({"stats", "--data", data, "--out", dir.string()}), 0);
    EXPECT_EQ(read_json_file(dir / "stats.json").at("n").size(), 6u);
    ASSERT_EQ(run_cli({"partition", "--data", data, "--strategy", "cgp", "--k", "2", "--out", dir.string()}), 0);
    ASSERT_EQ(run_cli(with_small({"train-teachers", "--data", data, "--partition",
                                  (dir / "partition_cgp.json").string(), "--out", dir.string()})),
              0);
    EXPECT_TRUE(fs::exists(dir / "teachers" / "cgp_t1.json"));
    ASSERT_EQ(run_cli(with_small({"distill", "--data", data, "--ensemble", (dir / "ensemble_cgp.json").string(),
                                  "--out", dir.string()})),
              0);
    ASSERT_EQ(run_cli({"eval", "--data", data, "--model", (dir / "student.json").string(), "--out", dir.string()}), 0);
    const auto report = read_json_file(dir / "report.json");
    EXPECT_GT(report.at("map").get<double>(), 0.0);
    EXPECT_TRUE(report.contains("run_config"));
}

TEST(Cli, BaselinePipelineWritesNoTeachers) {
    const auto dir = testing_util::temp_dir("cli_baseline");
    ASSERT_EQ(run_cli(with_small({"pipeline", "--variant", "baseline", "--out", dir.string()})), 0);
    EXPECT_TRUE(fs::exists(dir / "student.json"));
    EXPECT_TRUE(fs::exists(dir / "report.json"));
    EXPECT_FALSE(fs::exists(dir / "teachers"));
    EXPECT_FALSE(fs::exists(dir / "partition_cgp.json"));
    EXPECT_FALSE(fs::exists(dir / "partition_dgp.json"));
}

TEST(Cli, PipelineRerunReproducesReport) {
    const auto dir = testing_util::temp_dir("cli_rerun");
    const auto args = with_small({"pipeline", "--variant", "cpsd", "--k", "2", "--seed", "3", "--out", dir.string()});
    ASSERT_EQ(run_cli(args), 0);
    const auto first = read_json_file(dir / "report.json");
    const auto manifest = read_json_file(dir / "manifest.json");
    EXPECT_EQ(manifest.at("teachers").size(), 4u);
    EXPECT_EQ(manifest.at("ensembles").size(), 2u);
    ASSERT_EQ(run_cli(args), 0);
    const auto second = read_json_file(dir / "report.json");
    for (const char* key : {"map", "cp", "cr", "cf1", "op", "or", "of1"}) EXPECT_EQ(first.at(key), second.at(key)) << key;
}

TEST(Cli, SweepWritesOneRowPerCell) {
    const auto dir = testing_util::temp_dir("cli_sweep");
    ASSERT_EQ(run_cli(with_small({"sweep-k", "--strategy", "both", "--k-values", "1", "2", "--seeds", "0", "1",
                                  "--out", dir.string()})),
              0);
    std::ifstream in(dir / "sweep.csv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "strategy,k,seed,map,cf1,of1");
    int rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    EXPECT_EQ(rows, 2 * 2 * 2);
    EXPECT_TRUE(fs::exists(dir / "sweep_summary.txt"));
}

TEST(Cli, SingleClusterSweepMatchesSelfDistillation) {
    const auto dir = testing_util::temp_dir("cli_sd");
    ASSERT_EQ(run_cli(with_small({"sweep-k", "--strategy", "cgp", "--k-values", "1", "--seed", "2", "--out",
                                  (dir / "sweep").string()})),
              0);
    ASSERT_EQ(run_cli(with_small({"pipeline", "--variant", "sd", "--seed", "2", "--out", (dir / "sd").string()})), 0);
    std::ifstream in(dir / "sweep" / "sweep.csv");
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    std::stringstream fields(row);
    std::string strategy, k, seed, map;
    std::getline(fields, strategy, ',');
    std::getline(fields, k, ',');
    std::getline(fields, seed, ',');
    std::getline(fields, map, ',');
    EXPECT_EQ(std::stod(map), read_json_file(dir / "sd" / "report.json").at("map").get<double>());
}

TEST(Cli, ConfigFileWithFlagOverride) {
    const auto dir = testing_util::temp_dir("cli_configfile");
    std::ofstream(dir / "run.toml") << "k = 3\nstrategy = \"random\"\nn-samples = 120\nfeature-dim = 4\n"
                                       "blocks = [2, 2, 2]\n";
    ASSERT_EQ(run_cli({"synth", "--config", (dir / "run.toml").string(), "--n-samples", "90", "--out",
                       dir.string()}),
              0);
    EXPECT_EQ(load_annotations(dir / "dataset.jsonl").num_samples(), 90);
    EXPECT_EQ(load_annotations(dir / "dataset.jsonl").feature_dim(), 4);
    ASSERT_EQ(run_cli({"partition", "--config", (dir / "run.toml").string(), "--data",
                       (dir / "dataset.jsonl").string(), "--out", dir.string()}),
              0);
    EXPECT_EQ(load_partition(dir / "partition_random.json").clusters.size(), 3u);
}
