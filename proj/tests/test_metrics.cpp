#include "mpmmtt/metrics.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mpmmtt;

namespace {

std::vector<Vec2> random_set(std::mt19937_64& rng, int max_size = 5) {
    std::uniform_int_distribution<int> n(0, max_size);
    std::uniform_real_distribution<double> u(0.0, 150.0);
    std::vector<Vec2> s(n(rng));
    for (auto& p : s) p = Vec2(u(rng), u(rng));
    return s;
}

/// Track that follows target g exactly on scans [from, to].
TrackOutput perfect_track(const GroundTruth& gt, int g, int from, int to, int id, double model_true = 1.0) {
    TrackOutput t;
    t.id = id;
    for (int k = from; k <= to; ++k) {
        if (!gt.alive(g, k)) continue;
        TrackEstimate e;
        e.scan = k;
        e.mean = gt.state(g, k);
        e.model_probs = Eigen::Vector2d::Zero();
        e.model_probs(gt.model(g, k)) = model_true;
        e.model_probs(1 - gt.model(g, k)) = 1.0 - model_true;
        t.estimates.push_back(e);
    }
    return t;
}

GroundTruth table1_truth() {
    Rng rng(1);
    return generate_truth(table1_scenario(), rng);
}

}  // namespace

TEST(Ospa, KnownValues) {
    const std::vector<Vec2> a = {Vec2(0, 0)}, b = {Vec2(30, 40)}, none;
    EXPECT_NEAR(ospa(a, b), 50.0, 1e-12);
    EXPECT_EQ(ospa(a, a), 0.0);
    EXPECT_EQ(ospa(none, b), 100.0);
    EXPECT_EQ(ospa(b, none), 100.0);
    EXPECT_EQ(ospa(none, none), 0.0);
    const std::vector<Vec2> far = {Vec2(1000, 0)};
    EXPECT_EQ(ospa(a, far), 100.0);
}

TEST(Ospa, CardinalityPenalty) {
    const std::vector<Vec2> a = {Vec2(0, 0)}, b = {Vec2(0, 0), Vec2(5, 5)};
    EXPECT_NEAR(ospa(a, b), std::sqrt(100.0 * 100.0 / 2.0), 1e-12);
}

TEST(Ospa, MetricAxioms) {
    std::mt19937_64 rng(41);
    for (int n = 0; n < 1000; ++n) {
        const auto x = random_set(rng), y = random_set(rng), z = random_set(rng);
        const double xy = ospa(x, y), yx = ospa(y, x);
        EXPECT_EQ(xy, yx);
        EXPECT_LE(ospa(x, z), xy + ospa(y, z) + 1e-12);
        EXPECT_GE(xy, 0.0);
        EXPECT_LE(xy, 100.0);
    }
}

TEST(Ospa, NonIncreasingInCutoff) {
    std::mt19937_64 rng(42);
    for (int n = 0; n < 200; ++n) {
        const auto x = random_set(rng), y = random_set(rng);
        double last = -1.0;
        for (double c : {10.0, 30.0, 60.0, 100.0, 200.0}) {
            const double d = ospa(x, y, 2.0, c);
            EXPECT_GE(d + 1e-12, last);
            last = d;
        }
    }
}

TEST(Ospa, HungarianAgreesOnLargeSets) {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> u(0.0, 300.0);
    std::vector<Vec2> a(9), b(8);
    for (auto& p : a) p = Vec2(u(rng), u(rng));
    for (auto& p : b) p = Vec2(u(rng), u(rng));
    // Shifting every point leaves the distance unchanged.
    std::vector<Vec2> a2 = a, b2 = b;
    for (auto& p : a2) p += Vec2(7, -3);
    for (auto& p : b2) p += Vec2(7, -3);
    EXPECT_NEAR(ospa(a, b), ospa(a2, b2), 1e-9);
    EXPECT_THROW(ospa(a, b, 0.5), std::invalid_argument);
}

TEST(AssignTracks, PerfectOutput) {
    const GroundTruth gt = table1_truth();
    std::vector<TrackOutput> tracks;
    for (int g = 0; g < 4; ++g) tracks.push_back(perfect_track(gt, g, 1, 40, g + 1));
    const auto a = assign_tracks(tracks, gt);
    EXPECT_EQ(a.valid_tracks, 4);
    EXPECT_EQ(a.false_tracks, 0);
    EXPECT_EQ(a.breakages, 0);
    EXPECT_NEAR(a.track_probability_of_detection, 1.0, 1e-12);
    for (int g = 0; g < 4; ++g) EXPECT_EQ(a.target_of[g], g);
}

TEST(AssignTracks, SequentialTracksCountAsBreakage) {
    const GroundTruth gt = table1_truth();
    std::vector<TrackOutput> tracks = {perfect_track(gt, 0, 1, 15, 1), perfect_track(gt, 0, 18, 30, 2)};
    const auto a = assign_tracks(tracks, gt);
    EXPECT_EQ(a.valid_tracks, 2);
    EXPECT_EQ(a.breakages, 1);
    EXPECT_NEAR(a.track_probability_of_detection, 0.5 * (15.0 / 30.0 + 13.0 / 30.0), 1e-12);
}

TEST(AssignTracks, DuplicateAndFarTracksAreFalse) {
    const GroundTruth gt = table1_truth();
    TrackOutput dup = perfect_track(gt, 0, 1, 30, 2);
    for (auto& e : dup.estimates) e.mean(0) += 20.0;
    TrackOutput far = perfect_track(gt, 0, 1, 30, 3);
    for (auto& e : far.estimates) e.mean(0) += 5000.0;
    std::vector<TrackOutput> tracks = {perfect_track(gt, 0, 1, 30, 1), dup, far};
    const auto a = assign_tracks(tracks, gt);
    EXPECT_EQ(a.valid_tracks, 1);
    EXPECT_EQ(a.false_tracks, 2);
    EXPECT_EQ(a.target_of[0], 0);
}

TEST(Maer, KnownValues) {
    const GroundTruth gt = table1_truth();
    std::vector<TrackOutput> good = {perfect_track(gt, 0, 1, 30, 1)};
    EXPECT_EQ(maer(good, assign_tracks(good, gt), gt), 0.0);
    std::vector<TrackOutput> flat = {perfect_track(gt, 0, 1, 30, 1, 0.5)};
    EXPECT_NEAR(maer(flat, assign_tracks(flat, gt), gt), 0.5, 1e-12);
}

TEST(Maer, RandomPosteriorsMatchHandAverage) {
    const GroundTruth gt = table1_truth();
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<TrackOutput> tracks = {perfect_track(gt, 0, 1, 30, 1), perfect_track(gt, 2, 11, 40, 2)};
    double sum = 0.0;
    int n = 0;
    for (auto& t : tracks)
        for (auto& e : t.estimates) {
            const double p = u(rng);
            e.model_probs = Eigen::Vector2d(p, 1.0 - p);
            sum += 1.0 - e.model_probs(gt.model(t.id == 1 ? 0 : 2, e.scan));
            ++n;
        }
    EXPECT_NEAR(maer(tracks, assign_tracks(tracks, gt), gt), sum / n, 1e-12);
}

TEST(Daer, KnownValues) {
    ScenarioSpec s = table1_scenario();
    const SimulatedRun run = simulate(s, 3);
    TrackOutput t = perfect_track(run.truth, 0, 1, 30, 1);
    for (auto& e : t.estimates) {
        const MeasurementFrame& f = run.frames[e.scan - 1];
        e.association.assign(f.measurements.size() + 1, 0.0);
        e.association[f.measurement_of(0) + 1] = 1.0;
    }
    std::vector<TrackOutput> tracks = {t};
    const auto a = assign_tracks(tracks, run.truth);
    EXPECT_EQ(daer(tracks, a, run.frames), 0.0);
    for (auto& e : tracks[0].estimates) {
        const MeasurementFrame& f = run.frames[e.scan - 1];
        const int j = f.measurement_of(0) + 1;
        std::fill(e.association.begin(), e.association.end(), 0.1 / static_cast<double>(std::max<std::size_t>(1, e.association.size() - 1)));
        e.association[j] = 0.9;
    }
    EXPECT_NEAR(daer(tracks, a, run.frames), 0.1, 1e-12);
}

TEST(Evaluate, PerfectRun) {
    ScenarioSpec s = table1_scenario();
    const SimulatedRun run = simulate(s, 3);
    std::vector<TrackOutput> tracks;
    for (int g = 0; g < 4; ++g) tracks.push_back(perfect_track(run.truth, g, 1, 40, g + 1));
    const MetricReport r = evaluate(tracks, run.truth, run.frames);
    EXPECT_EQ(r.nvt, 4);
    EXPECT_EQ(r.nft, 0);
    EXPECT_EQ(r.mospa, 0.0);
    EXPECT_EQ(r.aee_p, 0.0);
    EXPECT_EQ(r.series.size(), 40u);
    EXPECT_EQ(r.series[15].n_true, 4);
}
