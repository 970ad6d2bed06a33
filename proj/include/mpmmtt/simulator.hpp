#pragma once

#include "mpmmtt/linalg.hpp"
#include "mpmmtt/models.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpmmtt {

using Rng = std::mt19937_64;

/// Motion model active on scans [first, last] (1-based, inclusive).
struct ModelSegment {
    int first = 1;
    int last = 1;
    MotionKind kind = MotionKind::constant_velocity;
};

/// A target exists on scans [birth, death]; `initial` is its state at `birth`.
struct TargetSpec {
    KinematicState initial = KinematicState::Zero();
    int birth = 1;
    int death = 1;
    std::vector<ModelSegment> schedule;
};

/// Range/azimuth sector observed by the sensor.
struct SurveillanceRegion {
    double range_min = 13000.0;
    double range_max = 19000.0;
    double azimuth_min = 0.7;
    double azimuth_max = 1.0;

    [[nodiscard]] double volume() const {
        return (range_max - range_min) * (azimuth_max - azimuth_min);
    }
    [[nodiscard]] bool contains(const Measurement& y) const {
        return y.range >= range_min && y.range <= range_max && y.azimuth >= azimuth_min &&
               y.azimuth <= azimuth_max;
    }
};

struct ScenarioSpec {
    std::vector<TargetSpec> targets;
    SurveillanceRegion region;
    PolarSensor sensor;
    double T = 1.0;
    int num_scans = 40;
    double pd = 0.95;
    double clutter_density = 1e-4;            // per unit m*rad
    std::optional<double> expected_clutter;   // overrides density * volume
    bool process_noise = false;               // false: deterministic truth
    double omega = 0.087;
    double q_pos = 0.01;
    double q_vel = 0.005;

    [[nodiscard]] double expected_clutter_count() const {
        return expected_clutter ? *expected_clutter : clutter_density * region.volume();
    }

    [[nodiscard]] std::vector<MotionModel> model_bank() const {
        return default_model_bank(T, omega, q_pos, q_vel);
    }

    void validate() const {
        if (!(T > 0.0)) throw std::invalid_argument("scenario: T must be positive");
        if (num_scans < 1) throw std::invalid_argument("scenario: num_scans must be >= 1");
        if (pd < 0.0 || pd > 1.0) throw std::invalid_argument("scenario: pd outside [0,1]");
        if (expected_clutter_count() < 0.0)
            throw std::invalid_argument("scenario: negative clutter rate");
        if (!(region.range_min < region.range_max) || !(region.azimuth_min < region.azimuth_max))
            throw std::invalid_argument("scenario: region bounds not ordered");
        for (std::size_t i = 0; i < targets.size(); ++i) {
            const auto& t = targets[i];
            const std::string who = "scenario: target " + std::to_string(i + 1);
            if (t.birth < 1 || t.death < t.birth)
                throw std::invalid_argument(who + " has an invalid lifetime");
            int next = t.birth;
            for (const auto& s : t.schedule) {
                if (s.first != next || s.last < s.first)
                    throw std::invalid_argument(who + " model schedule has a gap or overlap at scan " +
                                                std::to_string(next));
                next = s.last + 1;
            }
            if (next != t.death + 1)
                throw std::invalid_argument(who + " model schedule does not cover its lifetime");
        }
    }
};

/// Three-segment CV/CT/CV schedule of ten scans each starting at `birth`.
inline std::vector<ModelSegment> cv_ct_cv_schedule(int birth, int segment = 10) {
    return {{birth, birth + segment - 1, MotionKind::constant_velocity},
            {birth + segment, birth + 2 * segment - 1, MotionKind::coordinated_turn},
            {birth + 2 * segment, birth + 3 * segment - 1, MotionKind::constant_velocity}};
}

/// Two crossing groups of parallel targets. Group A moves along +Y from
/// x = 11400 - d*n, group B along -X from y = 11840 + d*n and appears ten
/// scans later. With n_targets = 4 and d = 100 this is the four-target
/// benchmark scenario.
inline ScenarioSpec crossing_groups_scenario(int n_targets = 4, double separation = 100.0) {
    if (n_targets < 1) throw std::invalid_argument("scenario: need at least one target");
    ScenarioSpec s;
    const int n_a = (n_targets + 1) / 2;
    const int n_b = n_targets - n_a;
    for (int n = 0; n < n_a; ++n) {
        TargetSpec t;
        t.initial << 11400.0 - separation * n, 0.0, 10200.0, 120.0;
        t.birth = 1;
        t.death = 30;
        t.schedule = cv_ct_cv_schedule(1);
        s.targets.push_back(t);
    }
    for (int n = 0; n < n_b; ++n) {
        TargetSpec t;
        t.initial << 11750.0, -120.0, 11840.0 + separation * n, 0.0;
        t.birth = 11;
        t.death = 40;
        t.schedule = cv_ct_cv_schedule(11);
        s.targets.push_back(t);
    }
    // Order as target 1, 2 (group A), 3, 4 (group B) for the default case.
    return s;
}

inline ScenarioSpec table1_scenario() { return crossing_groups_scenario(4, 100.0); }

/// Per-target, per-scan true states and active models.
struct GroundTruth {
    int num_scans = 0;
    std::vector<std::vector<std::optional<KinematicState>>> states;  // [target][scan-1]
    std::vector<std::vector<int>> models;                            // model id or -1

    [[nodiscard]] int targets() const { return static_cast<int>(states.size()); }
    [[nodiscard]] bool alive(int target, int scan) const {
        return scan >= 1 && scan <= num_scans && states[target][scan - 1].has_value();
    }
    [[nodiscard]] const KinematicState& state(int target, int scan) const {
        return *states[target][scan - 1];
    }
    [[nodiscard]] int model(int target, int scan) const { return models[target][scan - 1]; }
    [[nodiscard]] int alive_count(int scan) const {
        int n = 0;
        for (int i = 0; i < targets(); ++i) n += alive(i, scan) ? 1 : 0;
        return n;
    }
};

/// One scan of measurements. `origin[j]` is the generating target index or
/// -1 for clutter; it is hidden from the tracker and used only by metrics.
struct MeasurementFrame {
    int scan = 0;
    std::vector<Measurement> measurements;
    std::vector<int> origin;
    int clipped = 0;  // target measurements moved back inside the region

    [[nodiscard]] int size() const { return static_cast<int>(measurements.size()); }
    /// Index of the measurement generated by `target`, or -1 when missed.
    [[nodiscard]] int measurement_of(int target) const {
        for (std::size_t j = 0; j < origin.size(); ++j)
            if (origin[j] == target) return static_cast<int>(j);
        return -1;
    }
};

namespace detail {

inline Vec4 sample_gaussian(const Mat4& cov, Rng& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    Vec4 z;
    for (int i = 0; i < 4; ++i) z(i) = n01(rng);
    Eigen::LLT<Mat4> llt(cov);
    if (llt.info() != Eigen::Success) {
        Eigen::SelfAdjointEigenSolver<Mat4> es(cov);
        return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * z;
    }
    return llt.matrixL() * z;
}

}  // namespace detail

inline GroundTruth generate_truth(const ScenarioSpec& spec, Rng& rng) {
    spec.validate();
    const auto bank = spec.model_bank();
    GroundTruth gt;
    gt.num_scans = spec.num_scans;
    gt.states.assign(spec.targets.size(), std::vector<std::optional<KinematicState>>(spec.num_scans));
    gt.models.assign(spec.targets.size(), std::vector<int>(spec.num_scans, -1));
    for (std::size_t i = 0; i < spec.targets.size(); ++i) {
        const auto& t = spec.targets[i];
        KinematicState x = t.initial;
        for (const auto& seg : t.schedule) {
            const MotionModel& m =
                bank[seg.kind == MotionKind::constant_velocity ? 0 : 1];
            for (int k = seg.first; k <= seg.last; ++k) {
                if (k > t.birth) {
                    x = m.F * x;
                    if (spec.process_noise) x += detail::sample_gaussian(m.Q, rng);
                }
                if (k >= 1 && k <= spec.num_scans) {
                    gt.states[i][k - 1] = x;
                    gt.models[i][k - 1] = m.id;
                }
            }
        }
    }
    return gt;
}

/// Draws the measurements of one scan: detections of alive targets with
/// probability pd plus Poisson clutter uniform over the region.
inline MeasurementFrame generate_frame(const GroundTruth& truth, int scan, const ScenarioSpec& spec,
                                       Rng& rng) {
    MeasurementFrame f;
    f.scan = scan;
    std::bernoulli_distribution detect(spec.pd);
    std::normal_distribution<double> n01(0.0, 1.0);
    const Eigen::LLT<Mat2> R_llt(spec.sensor.R);
    const Mat2 L = R_llt.matrixL();
    const auto& reg = spec.region;
    for (int i = 0; i < truth.targets(); ++i) {
        if (!truth.alive(i, scan)) continue;
        if (!detect(rng)) continue;
        const Vec2 v(n01(rng), n01(rng));
        Vec2 y = spec.sensor.predict(truth.state(i, scan)) + L * v;
        y(1) = wrap_angle(y(1));
        Measurement meas = Measurement::from_vec(y);
        if (!reg.contains(meas)) {
            meas.range = std::clamp(meas.range, reg.range_min, reg.range_max);
            meas.azimuth = std::clamp(meas.azimuth, reg.azimuth_min, reg.azimuth_max);
            ++f.clipped;
        }
        f.measurements.push_back(meas);
        f.origin.push_back(i);
    }
    std::poisson_distribution<int> n_clutter(spec.expected_clutter_count());
    std::uniform_real_distribution<double> ur(reg.range_min, reg.range_max);
    std::uniform_real_distribution<double> ua(reg.azimuth_min, reg.azimuth_max);
    const int nc = spec.expected_clutter_count() > 0.0 ? n_clutter(rng) : 0;
    for (int c = 0; c < nc; ++c) {
        const double r = ur(rng);
        const double a = ua(rng);
        f.measurements.push_back({r, a});
        f.origin.push_back(-1);
    }
    // Shuffle so that measurement order carries no information.
    std::vector<std::size_t> perm(f.measurements.size());
    for (std::size_t j = 0; j < perm.size(); ++j) perm[j] = j;
    for (std::size_t j = perm.size(); j > 1; --j) {
        std::uniform_int_distribution<std::size_t> pick(0, j - 1);
        std::swap(perm[j - 1], perm[pick(rng)]);
    }
    MeasurementFrame shuffled = f;
    for (std::size_t j = 0; j < perm.size(); ++j) {
        shuffled.measurements[j] = f.measurements[perm[j]];
        shuffled.origin[j] = f.origin[perm[j]];
    }
    return shuffled;
}

/// Truth plus every frame of one simulated run.
struct SimulatedRun {
    GroundTruth truth;
    std::vector<MeasurementFrame> frames;  // frames[k-1] is scan k
};

inline SimulatedRun simulate(const ScenarioSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    SimulatedRun run;
    run.truth = generate_truth(spec, rng);
    run.frames.reserve(spec.num_scans);
    for (int k = 1; k <= spec.num_scans; ++k) run.frames.push_back(generate_frame(run.truth, k, spec, rng));
    return run;
}

}  // namespace mpmmtt
