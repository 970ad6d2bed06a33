#pragma once

#include "mpmmtt/metrics.hpp"
#include "mpmmtt/simulator.hpp"
#include "mpmmtt/tracker.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpmmtt {

inline constexpr int kConfigVersion = 1;

/// Parameter varied by a sweep.
struct SweepSpec {
    std::string parameter;  // clutter_density | pd | separation | targets | r_max
    std::vector<double> values;
};

struct ExperimentConfig {
    ScenarioSpec scenario = table1_scenario();
    /// Generator of the scenario targets. "crossing" regenerates them from
    /// `targets` and `separation`; "custom" keeps the explicit list.
    std::string preset = "crossing";
    int preset_targets = 4;
    double preset_separation = 100.0;
    TrackerConfig tracker;
    MetricOptions metrics;
    int runs = 100;
    std::uint64_t seed = 1;
    int workers = 1;
    OutputMode mode = OutputMode::smoothed;
    std::string out_dir = "results";
    std::optional<SweepSpec> sweep;
    /// Clutter density assumed by the tracker; follows the scenario when unset.
    std::optional<double> tracker_clutter_density;

    /// Rebuilds preset targets and copies shared sensor and model settings
    /// from the scenario into the tracker.
    void resolve() {
        if (preset == "crossing") {
            const ScenarioSpec gen = crossing_groups_scenario(preset_targets, preset_separation);
            scenario.targets = gen.targets;
        } else if (preset != "custom") {
            throw std::invalid_argument("config: scenario.preset must be crossing or custom");
        }
        tracker.sensor = scenario.sensor;
        tracker.T = scenario.T;
        tracker.clutter_density = tracker_clutter_density
                                      ? *tracker_clutter_density
                                      : scenario.expected_clutter_count() / scenario.region.volume();
    }

    void validate() const {
        if (runs < 1) throw std::invalid_argument("config: experiment.runs must be >= 1");
        if (workers < 1) throw std::invalid_argument("config: experiment.workers must be >= 1");
        scenario.validate();
        tracker.validate();
        if (sweep) {
            static const std::vector<std::string> known = {"clutter_density", "pd", "separation",
                                                           "targets", "r_max"};
            if (std::find(known.begin(), known.end(), sweep->parameter) == known.end())
                throw std::invalid_argument("config: sweep.parameter '" + sweep->parameter +
                                            "' is not one of clutter_density, pd, separation, targets, r_max");
            if (sweep->values.empty()) throw std::invalid_argument("config: sweep.values is empty");
        }
    }
};

namespace detail {

/// Reads `node[key]` into `out` when present, reporting the field path on error.
template <typename T>
void read(const YAML::Node& node, const std::string& key, T& out, const std::string& path) {
    const YAML::Node v = node[key];
    if (!v) return;
    try {
        out = v.as<T>();
    } catch (const YAML::Exception& e) {
        throw std::invalid_argument("config: invalid value at " + path + "." + key + ": " + e.what());
    }
}

inline Eigen::VectorXd read_vector(const YAML::Node& v, const std::string& path) {
    if (!v.IsSequence()) throw std::invalid_argument("config: " + path + " must be a list");
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i].as<double>();
    return out;
}

inline Eigen::MatrixXd read_matrix(const YAML::Node& v, const std::string& path) {
    if (!v.IsSequence() || v.size() == 0) throw std::invalid_argument("config: " + path + " must be a list of rows");
    const auto rows = static_cast<Eigen::Index>(v.size());
    const auto cols = static_cast<Eigen::Index>(v[0].size());
    Eigen::MatrixXd out(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(v[r].size()) != cols)
            throw std::invalid_argument("config: " + path + " has ragged rows");
        for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = v[r][c].as<double>();
    }
    return out;
}

inline void read_chain(const YAML::Node& node, MarkovChain& chain, const std::string& path) {
    if (!node) return;
    try {
        if (node["prior"]) chain.prior = read_vector(node["prior"], path + ".prior");
        if (node["transition"]) chain.transition = read_matrix(node["transition"], path + ".transition");
    } catch (const YAML::Exception& e) {
        throw std::invalid_argument("config: invalid value in " + path + ": " + e.what());
    }
}

}  // namespace detail

inline ExperimentConfig parse_config(const YAML::Node& root) {
    using detail::read;
    ExperimentConfig c;
    if (!root || !root.IsMap()) throw std::invalid_argument("config: document must be a mapping");
    int version = 0;
    read(root, "version", version, "");
    if (version != kConfigVersion)
        throw std::invalid_argument("config: version must be " + std::to_string(kConfigVersion));

    if (const YAML::Node s = root["scenario"]) {
        auto& sc = c.scenario;
        read(s, "preset", c.preset, "scenario");
        read(s, "targets", c.preset_targets, "scenario");
        read(s, "separation", c.preset_separation, "scenario");
        read(s, "num_scans", sc.num_scans, "scenario");
        read(s, "T", sc.T, "scenario");
        read(s, "pd", sc.pd, "scenario");
        read(s, "clutter_density", sc.clutter_density, "scenario");
        if (s["expected_clutter"]) {
            double v = 0.0;
            read(s, "expected_clutter", v, "scenario");
            sc.expected_clutter = v;
        }
        read(s, "process_noise", sc.process_noise, "scenario");
        read(s, "omega", sc.omega, "scenario");
        read(s, "q_pos", sc.q_pos, "scenario");
        read(s, "q_vel", sc.q_vel, "scenario");
        if (const YAML::Node r = s["region"]) {
            read(r, "range_min", sc.region.range_min, "scenario.region");
            read(r, "range_max", sc.region.range_max, "scenario.region");
            read(r, "azimuth_min", sc.region.azimuth_min, "scenario.region");
            read(r, "azimuth_max", sc.region.azimuth_max, "scenario.region");
        }
        if (const YAML::Node r = s["sensor"]) {
            if (r["origin"]) {
                const Eigen::VectorXd o = detail::read_vector(r["origin"], "scenario.sensor.origin");
                if (o.size() != 2) throw std::invalid_argument("config: scenario.sensor.origin needs 2 values");
                sc.sensor.origin = o;
            }
            if (r["R"]) {
                const Eigen::MatrixXd R = detail::read_matrix(r["R"], "scenario.sensor.R");
                if (R.rows() != 2 || R.cols() != 2)
                    throw std::invalid_argument("config: scenario.sensor.R must be 2x2");
                sc.sensor.R = R;
            }
        }
        if (const YAML::Node list = s["target_list"]) {
            sc.targets.clear();
            for (std::size_t i = 0; i < list.size(); ++i) {
                const std::string path = "scenario.target_list[" + std::to_string(i) + "]";
                const YAML::Node t = list[i];
                TargetSpec ts;
                const Eigen::VectorXd x0 = detail::read_vector(t["initial"], path + ".initial");
                if (x0.size() != 4) throw std::invalid_argument("config: " + path + ".initial needs 4 values");
                ts.initial = x0;
                read(t, "birth", ts.birth, path);
                read(t, "death", ts.death, path);
                const YAML::Node sched = t["schedule"];
                for (std::size_t k = 0; sched && k < sched.size(); ++k) {
                    ModelSegment seg;
                    std::string model = "CV";
                    read(sched[k], "model", model, path + ".schedule");
                    seg.kind = motion_kind_from_string(model);
                    read(sched[k], "first", seg.first, path + ".schedule");
                    read(sched[k], "last", seg.last, path + ".schedule");
                    ts.schedule.push_back(seg);
                }
                sc.targets.push_back(ts);
            }
        }
    }

    if (const YAML::Node t = root["tracker"]) {
        auto& tc = c.tracker;
        read(t, "window", tc.window, "tracker");
        read(t, "slide", tc.slide, "tracker");
        read(t, "r_max", tc.r_max, "tracker");
        read(t, "delta_T", tc.delta_T, "tracker");
        read(t, "delta_c", tc.delta_c, "tracker");
        read(t, "delta_d", tc.delta_d, "tracker");
        read(t, "P_g", tc.P_g, "tracker");
        read(t, "pd_visible", tc.detection.pd_visible, "tracker");
        read(t, "pd_invisible", tc.detection.pd_invisible, "tracker");
        if (t["clutter_density"]) {
            double v = 0.0;
            read(t, "clutter_density", v, "tracker");
            c.tracker_clutter_density = v;
        }
        read(t, "vmax", tc.vmax, "tracker");
        read(t, "initiator_threshold", tc.initiator_threshold, "tracker");
        read(t, "birth_inflation", tc.birth_inflation, "tracker");
        read(t, "report_threshold", tc.report_threshold, "tracker");
        read(t, "omega", tc.omega, "tracker");
        read(t, "q_pos", tc.q_pos, "tracker");
        read(t, "q_vel", tc.q_vel, "tracker");
        std::string rule = to_string(tc.confirmation);
        read(t, "confirmation", rule, "tracker");
        tc.confirmation = confirmation_rule_from_string(rule);
        detail::read_chain(t["visibility_chain"], tc.visibility, "tracker.visibility_chain");
        detail::read_chain(t["model_chain"], tc.model, "tracker.model_chain");
        if (const YAML::Node u = t["unscented"]) {
            read(u, "alpha", tc.ut.alpha, "tracker.unscented");
            read(u, "beta", tc.ut.beta, "tracker.unscented");
            read(u, "kappa", tc.ut.kappa, "tracker.unscented");
        }
        if (const YAML::Node l = t["lbp"]) {
            read(l, "max_iters", tc.lbp.max_iters, "tracker.lbp");
            read(l, "tol", tc.lbp.tol, "tracker.lbp");
            read(l, "damping", tc.lbp.damping, "tracker.lbp");
        }
    }

    if (const YAML::Node m = root["metrics"]) {
        read(m, "ospa_p", c.metrics.ospa_p, "metrics");
        read(m, "ospa_c", c.metrics.ospa_c, "metrics");
        read(m, "gate", c.metrics.gate, "metrics");
    }

    if (const YAML::Node e = root["experiment"]) {
        read(e, "runs", c.runs, "experiment");
        read(e, "seed", c.seed, "experiment");
        read(e, "workers", c.workers, "experiment");
        read(e, "out", c.out_dir, "experiment");
        std::string mode = to_string(c.mode);
        read(e, "mode", mode, "experiment");
        c.mode = output_mode_from_string(mode);
    }

    if (const YAML::Node s = root["sweep"]) {
        SweepSpec sw;
        read(s, "parameter", sw.parameter, "sweep");
        if (!s["values"]) throw std::invalid_argument("config: sweep.values is required");
        const Eigen::VectorXd v = detail::read_vector(s["values"], "sweep.values");
        sw.values.assign(v.data(), v.data() + v.size());
        c.sweep = sw;
    }

    c.resolve();
    c.validate();
    return c;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
    try {
        return parse_config(YAML::Load(text));
    } catch (const YAML::ParserException& e) {
        throw std::invalid_argument(std::string("config: parse error: ") + e.what());
    }
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_string(ss.str());
}

namespace detail {

inline void emit_vector(YAML::Emitter& e, const Eigen::VectorXd& v) {
    e << YAML::Flow << YAML::BeginSeq;
    for (Eigen::Index i = 0; i < v.size(); ++i) e << v(i);
    e << YAML::EndSeq;
}

inline void emit_matrix(YAML::Emitter& e, const Eigen::MatrixXd& m) {
    e << YAML::BeginSeq;
    for (Eigen::Index r = 0; r < m.rows(); ++r) emit_vector(e, m.row(r).transpose());
    e << YAML::EndSeq;
}

inline void emit_chain(YAML::Emitter& e, const MarkovChain& c) {
    e << YAML::BeginMap;
    e << YAML::Key << "prior" << YAML::Value;
    emit_vector(e, c.prior);
    e << YAML::Key << "transition" << YAML::Value;
    emit_matrix(e, c.transition);
    e << YAML::EndMap;
}

}  // namespace detail

/// Serializes every field, so that parse(serialize(c)) reproduces c.
inline std::string serialize_config(const ExperimentConfig& c) {
    YAML::Emitter e;
    e.SetDoublePrecision(17);
    const auto& sc = c.scenario;
    const auto& tc = c.tracker;
    e << YAML::BeginMap;
    e << YAML::Key << "version" << YAML::Value << kConfigVersion;

    e << YAML::Key << "scenario" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "preset" << YAML::Value << c.preset;
    e << YAML::Key << "targets" << YAML::Value << c.preset_targets;
    e << YAML::Key << "separation" << YAML::Value << c.preset_separation;
    e << YAML::Key << "num_scans" << YAML::Value << sc.num_scans;
    e << YAML::Key << "T" << YAML::Value << sc.T;
    e << YAML::Key << "pd" << YAML::Value << sc.pd;
    e << YAML::Key << "clutter_density" << YAML::Value << sc.clutter_density;
    if (sc.expected_clutter) e << YAML::Key << "expected_clutter" << YAML::Value << *sc.expected_clutter;
    e << YAML::Key << "process_noise" << YAML::Value << sc.process_noise;
    e << YAML::Key << "omega" << YAML::Value << sc.omega;
    e << YAML::Key << "q_pos" << YAML::Value << sc.q_pos;
    e << YAML::Key << "q_vel" << YAML::Value << sc.q_vel;
    e << YAML::Key << "region" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "range_min" << YAML::Value << sc.region.range_min;
    e << YAML::Key << "range_max" << YAML::Value << sc.region.range_max;
    e << YAML::Key << "azimuth_min" << YAML::Value << sc.region.azimuth_min;
    e << YAML::Key << "azimuth_max" << YAML::Value << sc.region.azimuth_max;
    e << YAML::EndMap;
    e << YAML::Key << "sensor" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "origin" << YAML::Value;
    detail::emit_vector(e, sc.sensor.origin);
    e << YAML::Key << "R" << YAML::Value;
    detail::emit_matrix(e, sc.sensor.R);
    e << YAML::EndMap;
    if (c.preset == "custom") {
        e << YAML::Key << "target_list" << YAML::Value << YAML::BeginSeq;
        for (const auto& t : sc.targets) {
            e << YAML::BeginMap;
            e << YAML::Key << "initial" << YAML::Value;
            detail::emit_vector(e, t.initial);
            e << YAML::Key << "birth" << YAML::Value << t.birth;
            e << YAML::Key << "death" << YAML::Value << t.death;
            e << YAML::Key << "schedule" << YAML::Value << YAML::BeginSeq;
            for (const auto& s : t.schedule) {
                e << YAML::Flow << YAML::BeginMap;
                e << YAML::Key << "model" << YAML::Value << to_string(s.kind);
                e << YAML::Key << "first" << YAML::Value << s.first;
                e << YAML::Key << "last" << YAML::Value << s.last;
                e << YAML::EndMap;
            }
            e << YAML::EndSeq << YAML::EndMap;
        }
        e << YAML::EndSeq;
    }
    e << YAML::EndMap;

    e << YAML::Key << "tracker" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "window" << YAML::Value << tc.window;
    e << YAML::Key << "slide" << YAML::Value << tc.slide;
    e << YAML::Key << "r_max" << YAML::Value << tc.r_max;
    e << YAML::Key << "delta_T" << YAML::Value << tc.delta_T;
    e << YAML::Key << "delta_c" << YAML::Value << tc.delta_c;
    e << YAML::Key << "delta_d" << YAML::Value << tc.delta_d;
    e << YAML::Key << "P_g" << YAML::Value << tc.P_g;
    e << YAML::Key << "pd_visible" << YAML::Value << tc.detection.pd_visible;
    e << YAML::Key << "pd_invisible" << YAML::Value << tc.detection.pd_invisible;
    if (c.tracker_clutter_density)
        e << YAML::Key << "clutter_density" << YAML::Value << *c.tracker_clutter_density;
    e << YAML::Key << "vmax" << YAML::Value << tc.vmax;
    e << YAML::Key << "initiator_threshold" << YAML::Value << tc.initiator_threshold;
    e << YAML::Key << "birth_inflation" << YAML::Value << tc.birth_inflation;
    e << YAML::Key << "report_threshold" << YAML::Value << tc.report_threshold;
    e << YAML::Key << "omega" << YAML::Value << tc.omega;
    e << YAML::Key << "q_pos" << YAML::Value << tc.q_pos;
    e << YAML::Key << "q_vel" << YAML::Value << tc.q_vel;
    e << YAML::Key << "confirmation" << YAML::Value << to_string(tc.confirmation);
    e << YAML::Key << "visibility_chain" << YAML::Value;
    detail::emit_chain(e, tc.visibility);
    e << YAML::Key << "model_chain" << YAML::Value;
    detail::emit_chain(e, tc.model);
    e << YAML::Key << "unscented" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "alpha" << YAML::Value << tc.ut.alpha;
    e << YAML::Key << "beta" << YAML::Value << tc.ut.beta;
    e << YAML::Key << "kappa" << YAML::Value << tc.ut.kappa;
    e << YAML::EndMap;
    e << YAML::Key << "lbp" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "max_iters" << YAML::Value << tc.lbp.max_iters;
    e << YAML::Key << "tol" << YAML::Value << tc.lbp.tol;
    e << YAML::Key << "damping" << YAML::Value << tc.lbp.damping;
    e << YAML::EndMap;
    e << YAML::EndMap;

    e << YAML::Key << "metrics" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "ospa_p" << YAML::Value << c.metrics.ospa_p;
    e << YAML::Key << "ospa_c" << YAML::Value << c.metrics.ospa_c;
    e << YAML::Key << "gate" << YAML::Value << c.metrics.gate;
    e << YAML::EndMap;

    e << YAML::Key << "experiment" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "runs" << YAML::Value << c.runs;
    e << YAML::Key << "seed" << YAML::Value << c.seed;
    e << YAML::Key << "workers" << YAML::Value << c.workers;
    e << YAML::Key << "mode" << YAML::Value << to_string(c.mode);
    e << YAML::Key << "out" << YAML::Value << c.out_dir;
    e << YAML::EndMap;

    if (c.sweep) {
        e << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
        e << YAML::Key << "parameter" << YAML::Value << c.sweep->parameter;
        e << YAML::Key << "values" << YAML::Value << YAML::Flow << c.sweep->values;
        e << YAML::EndMap;
    }
    e << YAML::EndMap;
    return std::string(e.c_str()) + "\n";
}

}  // namespace mpmmtt
