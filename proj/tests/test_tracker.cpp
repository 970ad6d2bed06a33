#include "mpmmtt/simulator.hpp"
#include "mpmmtt/tracker.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mpmmtt;

namespace {

TrackerConfig table1_tracker() {
    TrackerConfig c;
    const ScenarioSpec s = table1_scenario();
    c.clutter_density = s.expected_clutter_count() / s.region.volume();
    return c;
}

Tracker run_tracker(const TrackerConfig& cfg, const SimulatedRun& sim) {
    Tracker tr(cfg);
    for (const auto& f : sim.frames) tr.process(f.measurements);
    return tr;
}

ScanBelief seed_belief(int scan, const Vec4& mean) {
    ScanBelief b;
    b.scan = scan;
    b.smoothed = {mean, Mat4(Vec4(100, 25, 100, 25).asDiagonal())};
    b.filtered = b.smoothed;
    b.model = Eigen::VectorXd::Ones(1);
    b.model_filtered = b.model;
    b.vis = Eigen::Vector2d(0.1, 0.9);
    b.vis_filtered = b.vis;
    b.assoc = {0.0, 1.0};
    return b;
}

}  // namespace

TEST(Gate, ThresholdForTable1GateProbability) {
    EXPECT_NEAR(gate_threshold(0.997), 11.618, 5e-4);
}

TEST(Gate, PredictedMeasurementAlwaysAdmitted) {
    const PolarSensor s;
    ModelMeasurementPrediction p;
    p.y_hat = Vec2(15000.0, 0.8);
    p.S = s.R;
    const std::vector<ModelMeasurementPrediction> preds = {p};
    const std::vector<Measurement> frame = {{15000.0, 0.8}, {15500.0, 0.8}, {15010.0, 0.8}};
    const auto admitted = gate(std::span<const ModelMeasurementPrediction>(preds), std::span<const Measurement>(frame), s, gate_threshold(0.997));
    EXPECT_EQ(admitted, (std::vector<int>{0, 2}));
    const std::vector<Measurement> empty;
    EXPECT_TRUE(gate(std::span<const ModelMeasurementPrediction>(preds), std::span<const Measurement>(empty), s, 11.6).empty());
}

TEST(Gate, AnyModelCanAdmit) {
    const PolarSensor s;
    ModelMeasurementPrediction narrow, wide;
    narrow.y_hat = wide.y_hat = Vec2(15000.0, 0.8);
    narrow.S = s.R;
    wide.S = s.R * 100.0;
    const std::vector<Measurement> frame = {{15200.0, 0.8}};
    const std::vector<ModelMeasurementPrediction> only_narrow = {narrow}, both = {narrow, wide};
    EXPECT_TRUE(gate(std::span<const ModelMeasurementPrediction>(only_narrow), std::span<const Measurement>(frame), s, 11.618).empty());
    EXPECT_EQ(gate(std::span<const ModelMeasurementPrediction>(both), std::span<const Measurement>(frame), s, 11.618).size(), 1u);
}

TEST(TwoPointInit, VelocityFromDisplacement) {
    const PolarSensor s;
    const auto init = two_point_init({10000.0, 0.0}, {10100.0, 0.0}, 1.0, 250.0, s);
    ASSERT_TRUE(init.has_value());
    EXPECT_NEAR(init->head.mean(1), 100.0, 1e-3);
    EXPECT_NEAR(init->head.mean(3), 0.0, 1e-9);
    EXPECT_NEAR(init->head.mean(0), 10100.0, 1e-2);
}

TEST(TwoPointInit, SpeedGateRejects) {
    const PolarSensor s;
    EXPECT_FALSE(two_point_init({10000.0, 0.0}, {10300.0, 0.0}, 1.0, 250.0, s).has_value());
    EXPECT_THROW(two_point_init({10000.0, 0.0}, {10100.0, 0.0}, 0.0, 250.0, s), std::invalid_argument);
}

TEST(TwoPointInit, CovarianceShape) {
    const PolarSensor s;
    const auto init = two_point_init({15000.0, 0.8}, {15050.0, 0.801}, 0.5, 250.0, s);
    ASSERT_TRUE(init.has_value());
    const Mat4& P = init->head.cov;
    EXPECT_TRUE(is_symmetric<4>(P));
    EXPECT_GE(min_eigenvalue<4>(P), -1e-9);
    EXPECT_GT(P(1, 1), P(0, 0));
    EXPECT_GT(P(3, 3), P(2, 2));
}

TEST(ManageTracks, ConfirmDeleteAndHold) {
    TrackerConfig cfg;
    auto make = [](std::vector<double> pv) {
        Track t;
        for (std::size_t i = 0; i < pv.size(); ++i) {
            ScanBelief b;
            b.scan = static_cast<int>(i) + 1;
            b.vis = Eigen::Vector2d(1.0 - pv[i], pv[i]);
            t.window.push_back(b);
        }
        return t;
    };
    std::vector<Track> tracks = {make({0.9, 0.9, 0.9}), make({0.2, 0.25, 0.28}), make({0.5, 0.5, 0.5}),
                                 make({0.9, 0.9})};
    const auto deleted = manage_tracks(tracks, cfg);
    EXPECT_EQ(tracks[0].status, TrackStatus::confirmed);
    EXPECT_EQ(tracks[1].status, TrackStatus::deleted);
    EXPECT_EQ(tracks[2].status, TrackStatus::preliminary);
    EXPECT_EQ(tracks[3].status, TrackStatus::tentative);
    EXPECT_EQ(deleted, (std::vector<std::size_t>{1}));
}

TEST(ManageTracks, InstantaneousRuleUsesNewestScan) {
    TrackerConfig cfg;
    cfg.confirmation = ConfirmationRule::instantaneous;
    Track t;
    for (double p : {0.6, 0.6, 0.9}) {
        ScanBelief b;
        b.vis = Eigen::Vector2d(1.0 - p, p);
        t.window.push_back(b);
    }
    std::vector<Track> tracks = {t};
    manage_tracks(tracks, cfg);
    EXPECT_EQ(tracks[0].status, TrackStatus::confirmed);
    cfg.confirmation = ConfirmationRule::averaged;
    std::vector<Track> again = {t};
    manage_tracks(again, cfg);
    EXPECT_EQ(again[0].status, TrackStatus::preliminary);
}

TEST(IterateWindow, SingleModelCleanSceneIsPlainSmoother) {
    // One CV target, one measurement per scan, clutter weight negligible.
    TrackerContext ctx(table1_tracker());
    ctx.bank = {ctx.bank[0]};
    ctx.cfg.model.prior = Eigen::VectorXd::Ones(1);
    ctx.cfg.model.transition = Eigen::MatrixXd::Ones(1, 1);
    ctx.clutter_w = -700.0;
    const PolarSensor& s = ctx.cfg.sensor;
    const MotionModel& cv = ctx.bank[0];

    std::mt19937_64 rng(5);
    std::normal_distribution<double> nr(0.0, 20.0), na(0.0, 1e-3);
    Vec4 x(11400, 0, 10200, 120);
    WindowState ws;
    Track tr;
    tr.id = 1;
    tr.first_scan = 1;
    tr.birth_prior = {x + Vec4(15, 3, -10, -2), Mat4(Vec4(900, 100, 900, 100).asDiagonal())};
    std::vector<Vec2> ys;
    const int K = 10;
    for (int k = 1; k <= K; ++k) {
        if (k > 1) x = cv.F * x;
        const Vec2 y = s.predict(x) + Vec2(nr(rng), na(rng));
        ys.push_back(y);
        WindowFrame f;
        f.scan = k;
        f.measurements = {Measurement::from_vec(y)};
        f.clutter = {0.0};
        ws.frames.push_back(f);
        tr.window.push_back(seed_belief(k, x));
    }
    ws.tracks.push_back(tr);
    iterate_window(ws, ctx);
    EXPECT_EQ(ws.iterations, 1);

    // Direct unscented filter and RTS smoother.
    std::vector<GaussianBelief> filt, pred;
    std::vector<Mat4> trans(K, cv.F);
    GaussianBelief p = tr.birth_prior;
    for (int k = 0; k < K; ++k) {
        if (k > 0) p = predict(filt.back(), cv);
        SyntheticMeasurement m;
        m.y_bar = ys[k];
        m.R_bar = s.R;
        m.miss_weight = 0.0;
        pred.push_back(p);
        filt.push_back(update(p, m, s, ctx.cfg.ut).posterior);
    }
    const RtsResult ref = rts_smooth(filt, pred, trans);
    const Track& out = ws.tracks[0];
    for (int k = 0; k < K; ++k) {
        EXPECT_NEAR(out.window[k].assoc[1], 1.0, 1e-12);
        EXPECT_LT((out.window[k].smoothed.mean - ref.smoothed[k].mean).cwiseAbs().maxCoeff(), 1e-6) << k;
        EXPECT_LT((out.window[k].smoothed.cov - ref.smoothed[k].cov).cwiseAbs().maxCoeff(), 1e-6) << k;
    }
}

TEST(RunWindow, EmptySceneTakesOneIteration) {
    Tracker tr(table1_tracker());
    const std::vector<Measurement> none;
    for (int k = 0; k < 5; ++k) tr.process(none);
    for (int n : tr.iteration_log()) EXPECT_EQ(n, 1);
    tr.finish();
    EXPECT_TRUE(tr.outputs(OutputMode::smoothed).empty());
}

TEST(RunWindow, OpenLoopKeepsInitializationBeliefs) {
    TrackerConfig cfg = table1_tracker();
    cfg.r_max = 0;
    Tracker tr = run_tracker(cfg, simulate(table1_scenario(), 3));
    for (int n : tr.iteration_log()) EXPECT_EQ(n, 0);
    tr.finish();
    int checked = 0;
    for (const Track* t : tr.all_tracks())
        for (const auto& b : t->history) {
            EXPECT_EQ(b.smoothed.mean, b.filtered.mean);
            ++checked;
        }
    EXPECT_GT(checked, 0);
}

TEST(RunWindow, BoundedByMaximumIterations) {
    Tracker tr = run_tracker(table1_tracker(), simulate(table1_scenario(), 4));
    for (int n : tr.iteration_log()) {
        EXPECT_GE(n, 1);
        EXPECT_LE(n, 10);
    }
}

TEST(RunWindow, LooserThresholdNeverNeedsMoreIterations) {
    const SimulatedRun sim = simulate(table1_scenario(), 6);
    TrackerConfig tight = table1_tracker(), loose = table1_tracker();
    loose.delta_T = 1e-1;
    const Tracker a = run_tracker(tight, sim), b = run_tracker(loose, sim);
    long ta = 0, tb = 0;
    for (int n : a.iteration_log()) ta += n;
    for (int n : b.iteration_log()) tb += n;
    EXPECT_LE(tb, ta);
}

TEST(RunWindow, ConvergedWindowIsStable) {
    const SimulatedRun sim = simulate(table1_scenario(), 8);
    const TrackerConfig cfg = table1_tracker();
    const TrackerContext ctx(cfg);
    Tracker tr(cfg);
    int checked = 0;
    for (const auto& f : sim.frames) {
        tr.process(f.measurements);
        if (tr.iteration_log().back() >= cfg.r_max || tr.window().tracks.empty()) continue;
        WindowState copy = tr.window();
        EXPECT_LT(iterate_window(copy, ctx), cfg.delta_T) << "scan " << tr.scan();
        ++checked;
    }
    EXPECT_GT(checked, 0);
}

TEST(Tracker, BeliefInvariantsAfterEachWindow) {
    const SimulatedRun sim = simulate(table1_scenario(), 9);
    Tracker tr(table1_tracker());
    std::vector<int> deleted_ids;
    for (const auto& f : sim.frames) {
        tr.process(f.measurements);
        const WindowState& ws = tr.window();
        for (const Track& t : ws.tracks) {
            EXPECT_TRUE(std::find(deleted_ids.begin(), deleted_ids.end(), t.id) == deleted_ids.end());
            for (const auto& b : t.window) {
                EXPECT_NEAR(b.model.sum(), 1.0, 1e-9);
                EXPECT_NEAR(b.vis.sum(), 1.0, 1e-9);
                double row = 0.0;
                for (double v : b.assoc) row += v;
                EXPECT_NEAR(row, 1.0, 1e-3);
                EXPECT_GE(min_eigenvalue<4>(b.smoothed.cov), -1e-9);
            }
        }
        // Column constraint: clutter plus every track's share of a measurement.
        for (const WindowFrame& wf : ws.frames) {
            for (std::size_t j = 0; j < wf.measurements.size(); ++j) {
                double col = wf.clutter[j];
                for (const Track& t : ws.tracks)
                    if (const ScanBelief* b = t.at(wf.scan); b && b->assoc.size() == wf.measurements.size() + 1)
                        col += b->assoc[j + 1];
                EXPECT_NEAR(col, 1.0, 1e-3) << "scan " << wf.scan;
            }
        }
        for (const Track* t : tr.all_tracks())
            if (t->status == TrackStatus::deleted) deleted_ids.push_back(t->id);
    }
}

TEST(Tracker, SlideAdvancesWindowByOne) {
    Tracker tr(table1_tracker());
    const SimulatedRun sim = simulate(table1_scenario(), 2);
    for (int k = 0; k < 15; ++k) {
        tr.process(sim.frames[k].measurements);
        EXPECT_EQ(tr.window().frames.back().scan, k + 1);
        EXPECT_EQ(tr.window().frames.front().scan, std::max(1, k + 1 - 9));
    }
}

TEST(Tracker, UnassociatedMeasurementStartsTrack) {
    Tracker tr(table1_tracker());
    const std::vector<Measurement> a = {{15000.0, 0.8}}, b = {{15100.0, 0.8}};
    tr.process(a);
    tr.process(b);
    ASSERT_EQ(tr.window().tracks.size(), 1u);
    EXPECT_EQ(tr.window().tracks[0].first_scan, 1);
    EXPECT_EQ(tr.window().tracks[0].window.size(), 2u);
}

TEST(Tracker, CleanSceneTracksEveryTarget) {
    ScenarioSpec s = table1_scenario();
    s.pd = 1.0;
    s.clutter_density = 0.0;
    TrackerConfig cfg = table1_tracker();
    cfg.clutter_density = 1e-6;
    Tracker tr = run_tracker(cfg, simulate(s, 1));
    tr.finish();
    EXPECT_EQ(tr.outputs(OutputMode::smoothed).size(), 4u);
}

TEST(Tracker, RepeatableBitForBit) {
    const SimulatedRun sim = simulate(table1_scenario(), 10);
    for (int r : {0, 3}) {
        TrackerConfig cfg = table1_tracker();
        cfg.r_max = r;
        Tracker a = run_tracker(cfg, sim), b = run_tracker(cfg, sim);
        a.finish();
        b.finish();
        const auto oa = a.outputs(OutputMode::smoothed), ob = b.outputs(OutputMode::smoothed);
        ASSERT_EQ(oa.size(), ob.size());
        for (std::size_t t = 0; t < oa.size(); ++t) {
            ASSERT_EQ(oa[t].estimates.size(), ob[t].estimates.size());
            for (std::size_t k = 0; k < oa[t].estimates.size(); ++k)
                EXPECT_EQ(oa[t].estimates[k].mean, ob[t].estimates[k].mean);
        }
    }
}

TEST(Tracker, ProcessAfterFinishThrows) {
    Tracker tr(table1_tracker());
    tr.finish();
    const std::vector<Measurement> none;
    EXPECT_THROW(tr.process(none), std::logic_error);
}

TEST(TrackerConfig, ValidateThresholdOrder) {
    TrackerConfig c;
    c.delta_d = 0.9;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = TrackerConfig{};
    c.P_g = 1.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}
