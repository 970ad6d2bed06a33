#include "mpmmtt/experiment.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mpmmtt;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

ExperimentConfig small_config(const std::string& out, int runs = 6) {
    ExperimentConfig c = parse_config_string("version: 1\n");
    c.runs = runs;
    c.seed = 5;
    c.out_dir = (std::filesystem::temp_directory_path() / out).string();
    std::filesystem::remove_all(c.out_dir);
    return c;
}

}  // namespace

TEST(Experiment, WritesRowsAndSummary) {
    ExperimentConfig c = small_config("mpmmtt_test_run");
    const Aggregate a = run_experiment(c, {false});
    const auto rows = csv_rows(slurp(std::filesystem::path(c.out_dir) / "runs.csv"));
    ASSERT_EQ(rows.size(), 7u);
    EXPECT_EQ(rows[0].size(), 12u);
    EXPECT_EQ(rows[0][0], "run_id");
    EXPECT_EQ(rows[0][11], "TET_s");
    EXPECT_EQ(rows[3][1], "7");
    // Aggregates are the arithmetic means of the rows.
    double mospa = 0.0, nvt = 0.0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        mospa += std::stod(rows[r][10]);
        nvt += std::stod(rows[r][2]);
    }
    EXPECT_NEAR(a.mospa, mospa / 6.0, 1e-12);
    EXPECT_NEAR(a.nvt, nvt / 6.0, 1e-12);
    const auto j = nlohmann::json::parse(slurp(std::filesystem::path(c.out_dir) / "summary.json"));
    EXPECT_NEAR(j["mean"]["MOSPA"].get<double>(), a.mospa, 1e-12);
    EXPECT_EQ(csv_rows(slurp(std::filesystem::path(c.out_dir) / "series.csv")).size(), 41u);
    EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(c.out_dir) / "config.yaml"));
}

TEST(Experiment, DeterministicAcrossRunsAndWorkers) {
    ExperimentConfig c = small_config("mpmmtt_test_det_a", 8);
    c.workers = 1;
    run_experiment(c, {false});
    const std::string one = slurp(std::filesystem::path(c.out_dir) / "runs.csv");
    const std::string series = slurp(std::filesystem::path(c.out_dir) / "series.csv");
    ExperimentConfig d = small_config("mpmmtt_test_det_b", 8);
    d.workers = 4;
    run_experiment(d, {false});
    EXPECT_EQ(slurp(std::filesystem::path(d.out_dir) / "runs.csv"), one);
    EXPECT_EQ(slurp(std::filesystem::path(d.out_dir) / "series.csv"), series);
    run_experiment(d, {false});
    EXPECT_EQ(slurp(std::filesystem::path(d.out_dir) / "runs.csv"), one);
}

TEST(Experiment, SweepEmitsOneRowPerValue) {
    ExperimentConfig c = small_config("mpmmtt_test_sweep", 2);
    c.sweep = SweepSpec{"clutter_density", {1e-4, 5e-4, 1e-3}};
    const auto out = run_sweep(c, {false});
    EXPECT_EQ(out.size(), 3u);
    const auto rows = csv_rows(slurp(std::filesystem::path(c.out_dir) / "sweep.csv"));
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0][0], "clutter_density");
    EXPECT_EQ(std::stod(rows[2][0]), 5e-4);
}

TEST(Experiment, SweepValueUpdatesTrackerClutter) {
    const ExperimentConfig base = parse_config_string("version: 1\n");
    const ExperimentConfig c = with_sweep_value(base, "clutter_density", 5e-4);
    EXPECT_NEAR(c.tracker.clutter_density, 5e-4, 1e-15);
    EXPECT_EQ(with_sweep_value(base, "targets", 6).scenario.targets.size(), 6u);
    EXPECT_THROW(with_sweep_value(base, "wind", 1.0), std::invalid_argument);
}

TEST(Experiment, CompareModesPairsSeeds) {
    ExperimentConfig c = small_config("mpmmtt_test_compare", 3);
    const CompareResult r = run_compare_modes(c, {false});
    ASSERT_EQ(r.open_loop.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r.open_loop[i].seed, r.closed_loop[i].seed);
    const auto rows = csv_rows(slurp(std::filesystem::path(c.out_dir) / "compare.csv"));
    EXPECT_EQ(rows.size(), 1u + 3u * 3u);
}

TEST(Experiment, UnwritableOutputFails) {
    ExperimentConfig c = small_config("mpmmtt_test_bad", 1);
    c.out_dir = "/proc/mpmmtt_cannot_write";
    EXPECT_THROW(run_experiment(c, {false}), std::runtime_error);
}
