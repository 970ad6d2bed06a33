#pragma once

#include "mpmmtt/config.hpp"
#include "mpmmtt/metrics.hpp"
#include "mpmmtt/simulator.hpp"
#include "mpmmtt/tracker.hpp"

#include "json.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mpmmtt {

/// Metrics of one Monte Carlo run for both output modes.
struct RunResult {
    int run_id = 0;
    std::uint64_t seed = 0;
    MetricReport smoothed;
    MetricReport realtime;
    double mean_iterations = 0.0;  // outer iterations per scan

    [[nodiscard]] const MetricReport& report(OutputMode m) const {
        return m == OutputMode::smoothed ? smoothed : realtime;
    }
};

/// Simulates one scenario realization and tracks it.
inline RunResult run_once(const ScenarioSpec& scenario, const TrackerConfig& tracker,
                          const MetricOptions& metrics, std::uint64_t seed, bool timing = true) {
    const SimulatedRun sim = simulate(scenario, seed);
    const auto t0 = std::chrono::steady_clock::now();
    Tracker tr(tracker);
    for (const auto& f : sim.frames) tr.process(f.measurements);
    tr.finish();
    const auto t1 = std::chrono::steady_clock::now();
    RunResult r;
    r.seed = seed;
    const auto sm = tr.outputs(OutputMode::smoothed);
    const auto rt = tr.outputs(OutputMode::realtime);
    r.smoothed = evaluate(sm, sim.truth, sim.frames, metrics);
    r.realtime = evaluate(rt, sim.truth, sim.frames, metrics);
    const double tet = timing ? std::chrono::duration<double>(t1 - t0).count() : 0.0;
    r.smoothed.tet_s = tet;
    r.realtime.tet_s = tet;
    long it = 0;
    for (int n : tr.iteration_log()) it += n;
    if (!tr.iteration_log().empty())
        r.mean_iterations = static_cast<double>(it) / static_cast<double>(tr.iteration_log().size());
    return r;
}

/// Calls `job(i)` for i in [0, n) on `workers` threads. Results must be
/// written by index so that the outcome does not depend on scheduling.
inline void parallel_for(int n, int workers, const std::function<void(int)>& job) {
    workers = std::max(1, std::min(workers, n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) job(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    job(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

/// Runs seeds base, base+1, ... in parallel and returns rows in run order.
inline std::vector<RunResult> run_monte_carlo(const ScenarioSpec& scenario, const TrackerConfig& tracker,
                                              const MetricOptions& metrics, int runs, std::uint64_t seed,
                                              int workers, bool timing = true) {
    std::vector<RunResult> out(static_cast<std::size_t>(runs));
    parallel_for(runs, workers, [&](int i) {
        out[static_cast<std::size_t>(i)] = run_once(scenario, tracker, metrics, seed + static_cast<std::uint64_t>(i), timing);
        out[static_cast<std::size_t>(i)].run_id = i;
    });
    return out;
}

// ---- Aggregation ----------------------------------------------------------------------

struct Aggregate {
    int runs = 0;
    double nvt = 0, tpd = 0, nft = 0, ntb = 0, maer = 0, daer = 0, aee_p = 0, aee_v = 0, mospa = 0,
           tet_s = 0;
};

inline Aggregate aggregate(const std::vector<RunResult>& rows, OutputMode mode) {
    Aggregate a;
    a.runs = static_cast<int>(rows.size());
    if (rows.empty()) return a;
    for (const auto& r : rows) {
        const MetricReport& m = r.report(mode);
        a.nvt += m.nvt;
        a.tpd += m.tpd;
        a.nft += m.nft;
        a.ntb += m.ntb;
        a.maer += m.maer;
        a.daer += m.daer;
        a.aee_p += m.aee_p;
        a.aee_v += m.aee_v;
        a.mospa += m.mospa;
        a.tet_s += m.tet_s;
    }
    const double n = static_cast<double>(rows.size());
    for (double* v : {&a.nvt, &a.tpd, &a.nft, &a.ntb, &a.maer, &a.daer, &a.aee_p, &a.aee_v, &a.mospa, &a.tet_s})
        *v /= n;
    return a;
}

inline nlohmann::ordered_json to_json(const Aggregate& a) {
    nlohmann::ordered_json j;
    j["runs"] = a.runs;
    j["NVT"] = a.nvt;
    j["TPD"] = a.tpd;
    j["NFT"] = a.nft;
    j["NTB"] = a.ntb;
    j["MAER"] = a.maer;
    j["DAER"] = a.daer;
    j["AEE_P"] = a.aee_p;
    j["AEE_V"] = a.aee_v;
    j["MOSPA"] = a.mospa;
    j["TET_s"] = a.tet_s;
    return j;
}

// ---- Writers ----------------------------------------------------------------------------

inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline const char* kRunsHeader = "run_id,seed,NVT,TPD,NFT,NTB,MAER,DAER,AEE_P,AEE_V,MOSPA,TET_s";

inline std::string runs_csv_row(const RunResult& r, OutputMode mode) {
    const MetricReport& m = r.report(mode);
    return std::to_string(r.run_id) + "," + std::to_string(r.seed) + "," + std::to_string(m.nvt) + "," +
           fmt(m.tpd) + "," + std::to_string(m.nft) + "," + std::to_string(m.ntb) + "," + fmt(m.maer) + "," +
           fmt(m.daer) + "," + fmt(m.aee_p) + "," + fmt(m.aee_v) + "," + fmt(m.mospa) + "," + fmt(m.tet_s);
}

inline std::string runs_csv(const std::vector<RunResult>& rows, OutputMode mode) {
    std::string s = std::string(kRunsHeader) + "\n";
    for (const auto& r : rows) s += runs_csv_row(r, mode) + "\n";
    return s;
}

/// Per-scan metrics averaged over runs.
inline std::string series_csv(const std::vector<RunResult>& rows, OutputMode mode) {
    std::string s = "k,OSPA,MAER,DAER,n_est,n_true\n";
    if (rows.empty()) return s;
    const std::size_t K = rows.front().report(mode).series.size();
    const double n = static_cast<double>(rows.size());
    for (std::size_t k = 0; k < K; ++k) {
        double ospa_v = 0, maer_v = 0, daer_v = 0, ne = 0, nt = 0;
        for (const auto& r : rows) {
            const ScanMetrics& m = r.report(mode).series[k];
            ospa_v += m.ospa;
            maer_v += m.maer;
            daer_v += m.daer;
            ne += m.n_est;
            nt += m.n_true;
        }
        s += std::to_string(k + 1) + "," + fmt(ospa_v / n) + "," + fmt(maer_v / n) + "," + fmt(daer_v / n) +
             "," + fmt(ne / n) + "," + fmt(nt / n) + "\n";
    }
    return s;
}

/// FNV-1a hash of the serialized config, as hex.
inline std::string config_hash(const ExperimentConfig& c) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : serialize_config(c)) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
    out << content;
    if (!out) throw std::runtime_error("error while writing '" + p.string() + "'");
}

inline void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "': " + ec.message());
}

struct RunOptions {
    bool timing = true;
};

/// `run`: Monte Carlo over the configured scenario; writes runs.csv,
/// series.csv and summary.json into the output directory.
inline Aggregate run_experiment(const ExperimentConfig& c, const RunOptions& opt = {}) {
    const std::filesystem::path dir(c.out_dir);
    ensure_dir(dir);
    const auto t0 = std::chrono::steady_clock::now();
    const auto rows = run_monte_carlo(c.scenario, c.tracker, c.metrics, c.runs, c.seed, c.workers, opt.timing);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const Aggregate a = aggregate(rows, c.mode);
    write_file(dir / "runs.csv", runs_csv(rows, c.mode));
    write_file(dir / "series.csv", series_csv(rows, c.mode));
    nlohmann::ordered_json j;
    j["mode"] = to_string(c.mode);
    j["base_seed"] = c.seed;
    j["config_hash"] = config_hash(c);
    j["wall_time_s"] = opt.timing ? wall : 0.0;
    j["mean"] = to_json(a);
    write_file(dir / "summary.json", j.dump(2) + "\n");
    write_file(dir / "config.yaml", serialize_config(c));
    return a;
}

/// Applies one sweep value to a copy of the config.
inline ExperimentConfig with_sweep_value(const ExperimentConfig& base, const std::string& param, double v) {
    ExperimentConfig c = base;
    if (param == "clutter_density") {
        c.scenario.clutter_density = v;
        c.scenario.expected_clutter.reset();
    } else if (param == "pd") {
        c.scenario.pd = v;
    } else if (param == "separation") {
        c.preset = "crossing";
        c.preset_separation = v;
    } else if (param == "targets") {
        c.preset = "crossing";
        c.preset_targets = static_cast<int>(std::lround(v));
    } else if (param == "r_max") {
        c.tracker.r_max = static_cast<int>(std::lround(v));
    } else {
        throw std::invalid_argument("unknown sweep parameter '" + param + "'");
    }
    c.sweep.reset();
    c.resolve();
    c.validate();
    return c;
}

/// `sweep`: one Monte Carlo batch per grid value; writes sweep.csv.
inline std::vector<Aggregate> run_sweep(const ExperimentConfig& c, const RunOptions& opt = {}) {
    if (!c.sweep) throw std::invalid_argument("config has no sweep section");
    const std::filesystem::path dir(c.out_dir);
    ensure_dir(dir);
    std::string csv = c.sweep->parameter + ",runs,NVT,TPD,NFT,NTB,MAER,DAER,AEE_P,AEE_V,MOSPA,TET_s\n";
    std::vector<Aggregate> out;
    for (double v : c.sweep->values) {
        const ExperimentConfig cv = with_sweep_value(c, c.sweep->parameter, v);
        const auto rows = run_monte_carlo(cv.scenario, cv.tracker, cv.metrics, cv.runs, cv.seed, cv.workers,
                                          opt.timing);
        const Aggregate a = aggregate(rows, c.mode);
        csv += fmt(v) + "," + std::to_string(a.runs) + "," + fmt(a.nvt) + "," + fmt(a.tpd) + "," + fmt(a.nft) +
               "," + fmt(a.ntb) + "," + fmt(a.maer) + "," + fmt(a.daer) + "," + fmt(a.aee_p) + "," +
               fmt(a.aee_v) + "," + fmt(a.mospa) + "," + fmt(a.tet_s) + "\n";
        out.push_back(a);
    }
    write_file(dir / "sweep.csv", csv);
    write_file(dir / "config.yaml", serialize_config(c));
    return out;
}

struct CompareResult {
    std::vector<RunResult> open_loop;  // r_max = 0
    std::vector<RunResult> closed_loop;  // r_max = 3
};

/// `compare-modes`: identical seeds under r_max = 0 and r_max = 3, the latter
/// reported in both smoothed and real-time modes. Writes compare.csv and
/// compare_summary.json.
inline CompareResult run_compare_modes(const ExperimentConfig& c, const RunOptions& opt = {}) {
    const std::filesystem::path dir(c.out_dir);
    ensure_dir(dir);
    TrackerConfig open = c.tracker;
    open.r_max = 0;
    TrackerConfig closed = c.tracker;
    closed.r_max = 3;
    CompareResult res;
    res.open_loop = run_monte_carlo(c.scenario, open, c.metrics, c.runs, c.seed, c.workers, opt.timing);
    res.closed_loop = run_monte_carlo(c.scenario, closed, c.metrics, c.runs, c.seed, c.workers, opt.timing);

    std::string csv = "run_id,seed,mode,MOSPA,MAER,DAER,NVT,NFT,TPD\n";
    auto line = [&](const RunResult& r, const char* mode, const MetricReport& m) {
        csv += std::to_string(r.run_id) + "," + std::to_string(r.seed) + "," + mode + "," + fmt(m.mospa) + "," +
               fmt(m.maer) + "," + fmt(m.daer) + "," + std::to_string(m.nvt) + "," + std::to_string(m.nft) + "," +
               fmt(m.tpd) + "\n";
    };
    for (std::size_t i = 0; i < res.open_loop.size(); ++i) {
        line(res.open_loop[i], "r0", res.open_loop[i].smoothed);
        line(res.closed_loop[i], "r3", res.closed_loop[i].smoothed);
        line(res.closed_loop[i], "r3_realtime", res.closed_loop[i].realtime);
    }
    write_file(dir / "compare.csv", csv);

    const Aggregate a0 = aggregate(res.open_loop, OutputMode::smoothed);
    const Aggregate a3 = aggregate(res.closed_loop, OutputMode::smoothed);
    const Aggregate a3rt = aggregate(res.closed_loop, OutputMode::realtime);
    nlohmann::ordered_json j;
    j["base_seed"] = c.seed;
    j["runs"] = c.runs;
    j["r0"] = to_json(a0);
    j["r3"] = to_json(a3);
    j["r3_realtime"] = to_json(a3rt);
    j["delta"]["MOSPA_r3_minus_r0"] = a3.mospa - a0.mospa;
    j["delta"]["MAER_r3_minus_r0"] = a3.maer - a0.maer;
    j["delta"]["MOSPA_smoothed_minus_realtime"] = a3.mospa - a3rt.mospa;
    write_file(dir / "compare_summary.json", j.dump(2) + "\n");
    return res;
}

}  // namespace mpmmtt
