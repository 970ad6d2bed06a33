#pragma once

#include "mpmmtt/assignment.hpp"
#include "mpmmtt/association.hpp"
#include "mpmmtt/filters.hpp"
#include "mpmmtt/hmm.hpp"
#include "mpmmtt/linalg.hpp"
#include "mpmmtt/log.hpp"
#include "mpmmtt/models.hpp"
#include "mpmmtt/output.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpmmtt {

enum class TrackStatus { tentative, preliminary, confirmed, deleted };
enum class ConfirmationRule { averaged, instantaneous };
enum class OutputMode { smoothed, realtime };

inline std::string to_string(TrackStatus s) {
    switch (s) {
        case TrackStatus::tentative: return "tentative";
        case TrackStatus::preliminary: return "preliminary";
        case TrackStatus::confirmed: return "confirmed";
        case TrackStatus::deleted: return "deleted";
    }
    return "unknown";
}

inline std::string to_string(OutputMode m) { return m == OutputMode::smoothed ? "smoothed" : "realtime"; }

inline OutputMode output_mode_from_string(const std::string& s) {
    if (s == "smoothed") return OutputMode::smoothed;
    if (s == "realtime") return OutputMode::realtime;
    throw std::invalid_argument("unknown output mode '" + s + "' (expected smoothed or realtime)");
}

inline std::string to_string(ConfirmationRule r) {
    return r == ConfirmationRule::averaged ? "averaged" : "instantaneous";
}

inline ConfirmationRule confirmation_rule_from_string(const std::string& s) {
    if (s == "averaged") return ConfirmationRule::averaged;
    if (s == "instantaneous") return ConfirmationRule::instantaneous;
    throw std::invalid_argument("unknown confirmation rule '" + s + "'");
}

/// Visibility chain over {0: invisible, 1: visible}.
inline MarkovChain default_visibility_chain() {
    MarkovChain c;
    c.prior = Eigen::Vector2d(0.5, 0.5);
    c.transition = (Eigen::Matrix2d() << 0.85, 0.15, 0.15, 0.85).finished();
    return c;
}

/// Model chain over {0: CV, 1: CT}.
inline MarkovChain default_model_chain() {
    MarkovChain c;
    c.prior = Eigen::Vector2d(0.9, 0.1);
    c.transition = (Eigen::Matrix2d() << 0.9, 0.1, 0.1, 0.9).finished();
    return c;
}

struct TrackerConfig {
    int window = 10;             // l
    int slide = 1;               // s
    int r_max = 10;
    double delta_T = 1e-3;
    double delta_c = 0.85;
    double delta_d = 0.3;
    double P_g = 0.997;
    MarkovChain visibility = default_visibility_chain();
    MarkovChain model = default_model_chain();
    DetectionModel detection;
    double clutter_density = 1e-4;  // per unit m*rad
    double vmax = 250.0;            // m/s, two-point initiation speed gate
    double initiator_threshold = 0.9;
    double birth_inflation = 100.0;
    ConfirmationRule confirmation = ConfirmationRule::averaged;
    double report_threshold = 0.5;
    double T = 1.0;
    double omega = 0.087;
    double q_pos = 0.01;
    double q_vel = 0.005;
    PolarSensor sensor;
    UnscentedParams ut;
    LbpOptions lbp{1000, 1e-6, 0.5};

    [[nodiscard]] std::vector<MotionModel> model_bank() const {
        return default_model_bank(T, omega, q_pos, q_vel);
    }

    void validate() const {
        if (window < 2) throw std::invalid_argument("tracker: window must be >= 2");
        if (slide < 1 || slide > window) throw std::invalid_argument("tracker: slide must be in [1, window]");
        if (r_max < 0) throw std::invalid_argument("tracker: r_max must be >= 0");
        if (!(delta_T > 0.0)) throw std::invalid_argument("tracker: delta_T must be positive");
        if (!(0.0 < delta_d && delta_d < delta_c && delta_c < 1.0))
            throw std::invalid_argument("tracker: need 0 < delta_d < delta_c < 1");
        if (!(0.0 < P_g && P_g < 1.0)) throw std::invalid_argument("tracker: P_g must be in (0,1)");
        visibility.validate();
        model.validate();
        if (visibility.states() != 2) throw std::invalid_argument("tracker: visibility chain must have 2 states");
        if (model.states() != 2) throw std::invalid_argument("tracker: model chain must match the 2-model bank");
        auto in01 = [](double p) { return p > 0.0 && p < 1.0; };
        if (!in01(detection.pd_visible) || !in01(detection.pd_invisible))
            throw std::invalid_argument("tracker: detection probabilities must be in (0,1)");
        if (clutter_density < 0.0) throw std::invalid_argument("tracker: negative clutter density");
        if (!(vmax > 0.0)) throw std::invalid_argument("tracker: vmax must be positive");
        if (!(T > 0.0)) throw std::invalid_argument("tracker: T must be positive");
    }
};

/// Squared Mahalanobis gate for a 2-D measurement: the chi-square quantile
/// with two degrees of freedom, -2 ln(1 - P_g).
inline double gate_threshold(double P_g) { return -2.0 * std::log1p(-P_g); }

/// Indices of the measurements whose innovation lies inside the gate of at
/// least one model prediction.
template <MeasurementSensor Sensor>
std::vector<int> gate(std::span<const ModelMeasurementPrediction> predictions,
                      std::span<const Measurement> frame, const Sensor& sensor, double threshold) {
    std::vector<int> admitted;
    std::vector<Mat2> inv;
    inv.reserve(predictions.size());
    for (const auto& p : predictions) inv.push_back(spd_inverse<2>(p.S, "gate covariance"));
    for (std::size_t j = 0; j < frame.size(); ++j) {
        for (std::size_t m = 0; m < predictions.size(); ++m) {
            const Vec2 r = sensor.residual(frame[j].vec(), predictions[m].y_hat);
            if (r.dot(inv[m] * r) <= threshold) {
                admitted.push_back(static_cast<int>(j));
                break;
            }
        }
    }
    return admitted;
}

/// Unscented conversion of a polar measurement with noise R to a Cartesian
/// position mean and covariance.
inline std::pair<Vec2, Mat2> polar_to_cartesian(const Measurement& y, const PolarSensor& sensor) {
    constexpr int n = 2;
    constexpr double kappa = 1.0;
    const double c = n + kappa;
    const Eigen::LLT<Mat2> llt(c * sensor.R);
    const Mat2 L = llt.matrixL();
    std::array<Vec2, 2 * n + 1> pts;
    std::array<double, 2 * n + 1> w;
    pts[0] = sensor.to_cartesian(y.vec());
    w[0] = kappa / c;
    for (int i = 0; i < n; ++i) {
        pts[1 + i] = sensor.to_cartesian(y.vec() + L.col(i));
        pts[1 + n + i] = sensor.to_cartesian(y.vec() - L.col(i));
        w[1 + i] = w[1 + n + i] = 0.5 / c;
    }
    Vec2 mean = Vec2::Zero();
    for (std::size_t i = 0; i < pts.size(); ++i) mean += w[i] * pts[i];
    Mat2 cov = Mat2::Zero();
    for (std::size_t i = 0; i < pts.size(); ++i) cov += w[i] * (pts[i] - mean) * (pts[i] - mean).transpose();
    return {mean, symmetrize(cov)};
}

/// Track head from two detections on consecutive scans.
struct TwoPointInit {
    GaussianBelief head;         // at the second scan
    GaussianBelief birth_prior;  // weak prior at the first scan
};

/// Position from y2, velocity (p2 - p1) / T. Covariance per axis pair is
/// [[R, R/T], [R/T, 2R/T^2]] with R the Cartesian position covariance.
/// Returns nothing when the implied speed exceeds vmax.
inline std::optional<TwoPointInit> two_point_init(const Measurement& y1, const Measurement& y2,
                                                  double T, double vmax, const PolarSensor& sensor,
                                                  double birth_inflation = 100.0) {
    if (!(T > 0.0)) throw std::invalid_argument("two_point_init: T must be positive");
    const auto [p1, R1] = polar_to_cartesian(y1, sensor);
    const auto [p2, R2] = polar_to_cartesian(y2, sensor);
    const Vec2 v = (p2 - p1) / T;
    if (v.norm() > vmax) return std::nullopt;

    // State index of each Cartesian axis: position and velocity.
    constexpr int pos[2] = {0, 2};
    constexpr int vel[2] = {1, 3};
    TwoPointInit out;
    out.head.mean << p2(0), v(0), p2(1), v(1);
    out.head.cov.setZero();
    const Mat2 Rv = (R1 + R2) / (T * T);
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            out.head.cov(pos[a], pos[b]) = R2(a, b);
            out.head.cov(pos[a], vel[b]) = R2(a, b) / T;
            out.head.cov(vel[a], pos[b]) = R2(a, b) / T;
            out.head.cov(vel[a], vel[b]) = Rv(a, b);
        }
    }
    out.head.cov = symmetrize(out.head.cov);
    out.birth_prior.mean << p1(0), v(0), p1(1), v(1);
    out.birth_prior.cov.setZero();
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            out.birth_prior.cov(pos[a], pos[b]) = birth_inflation * R1(a, b);
            out.birth_prior.cov(vel[a], vel[b]) = birth_inflation * Rv(a, b);
        }
    return out;
}

// ---- Track and window state ------------------------------------------------------

/// Beliefs of one track at one scan.
struct ScanBelief {
    int scan = 0;
    GaussianBelief smoothed;
    GaussianBelief filtered;
    Mat4 cross_cov = Mat4::Zero();  // cov(x_scan, x_{scan-1})
    DiscreteBelief model;           // b_M
    DiscreteBelief model_filtered;
    DiscreteBelief vis;             // b_E over {invisible, visible}
    DiscreteBelief vis_filtered;
    SyntheticMeasurement synth;
    std::vector<double> assoc;  // [miss, measurement 0, ...]
    std::vector<ModelConditioned> conditioned;  // per model

    [[nodiscard]] double p_visible() const { return vis(1); }
};

/// Final beliefs at the scan just before a track's window.
struct TrackAnchor {
    int scan = 0;
    GaussianBelief filtered;
    GaussianBelief smoothed;
    std::vector<GaussianBelief> per_model;
    DiscreteBelief model;
    DiscreteBelief model_filtered;
    DiscreteBelief vis_filtered;
};

struct Track {
    int id = 0;
    TrackStatus status = TrackStatus::tentative;
    int first_scan = 0;
    bool ever_confirmed = false;
    GaussianBelief birth_prior;
    std::optional<TrackAnchor> anchor;
    std::deque<ScanBelief> window;     // consecutive scans, oldest first
    std::vector<ScanBelief> history;   // finalized scans
    std::vector<TrackEstimate> realtime;

    [[nodiscard]] int last_scan() const { return window.empty() ? first_scan - 1 : window.back().scan; }
    [[nodiscard]] ScanBelief* at(int scan) {
        if (window.empty() || scan < window.front().scan || scan > window.back().scan) return nullptr;
        return &window[static_cast<std::size_t>(scan - window.front().scan)];
    }
    [[nodiscard]] const ScanBelief* at(int scan) const {
        return const_cast<Track*>(this)->at(scan);
    }
};

struct WindowFrame {
    int scan = 0;
    std::vector<Measurement> measurements;
    std::vector<double> clutter;  // â(0, j) from the latest association pass
};

struct WindowState {
    std::deque<WindowFrame> frames;  // oldest first, consecutive scans
    std::vector<Track> tracks;       // active (not deleted) tracks
    int iterations = 0;              // outer iterations of the last run_window
    long lbp_nonconverged = 0;

    [[nodiscard]] int newest_scan() const { return frames.empty() ? 0 : frames.back().scan; }
    [[nodiscard]] WindowFrame* frame(int scan) {
        if (frames.empty() || scan < frames.front().scan || scan > frames.back().scan) return nullptr;
        return &frames[static_cast<std::size_t>(scan - frames.front().scan)];
    }
};

/// Read-only quantities shared by every tracker step.
struct TrackerContext {
    TrackerConfig cfg;
    std::vector<MotionModel> bank;
    double gate_thr = 0.0;
    double clutter_w = 0.0;

    explicit TrackerContext(TrackerConfig c) : cfg(std::move(c)) {
        cfg.validate();
        bank = cfg.model_bank();
        gate_thr = gate_threshold(cfg.P_g);
        clutter_w = std::log(std::max(cfg.clutter_density, 1e-300));
    }
};

namespace detail {

inline double max_abs_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) return 1.0;
    return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return 1.0;
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

/// Log visibility emission: xi(e) = (1 - a0) ln P_d(e) + a0 ln(1 - P_d(e)).
inline Eigen::VectorXd visibility_emission(double miss, const DetectionModel& det) {
    Eigen::VectorXd e(2);
    e(0) = (1.0 - miss) * std::log(det.pd_invisible) + miss * std::log1p(-det.pd_invisible);
    e(1) = (1.0 - miss) * std::log(det.pd_visible) + miss * std::log1p(-det.pd_visible);
    return e;
}

/// Normalizes a row of association expectations to sum to one.
inline void normalize_row(std::vector<double>& row) {
    double s = 0.0;
    for (double& v : row) {
        v = std::clamp(v, 0.0, 1.0);
        s += v;
    }
    if (s > 0.0)
        for (double& v : row) v /= s;
    else
        row.assign(row.size(), 0.0), row[0] = 1.0;
}

/// Association summary of a track inside the window, from its smoothed beliefs.
inline TrackAssociationInput window_prediction(const Track& tr, std::size_t idx,
                                               const TrackerContext& ctx) {
    const ScanBelief& b = tr.window[idx];
    const GaussianBelief* prev = idx > 0 ? &tr.window[idx - 1].smoothed
                                         : (tr.anchor ? &tr.anchor->smoothed : nullptr);
    const auto& sensor = ctx.cfg.sensor;
    TrackAssociationInput in;
    in.p_visible = b.p_visible();
    const Vec2 y_hat = sensor.predict(b.smoothed.mean);
    const Mat24 H = sensor.jacobian(b.smoothed.mean);
    const Mat2 spread = symmetrize(H * b.smoothed.cov * H.transpose());
    for (std::size_t m = 0; m < ctx.bank.size(); ++m) {
        const MotionModel& mm = ctx.bank[m];
        const Mat4 Pp = prev ? Mat4(mm.F * prev->cov * mm.F.transpose() + mm.Q) : Mat4(b.smoothed.cov + mm.Q);
        ModelMeasurementPrediction p;
        p.weight = b.model(static_cast<Eigen::Index>(m));
        p.y_hat = y_hat;
        p.S = symmetrize(H * Pp * H.transpose() + sensor.R);
        p.spread = spread;
        in.models.push_back(p);
    }
    return in;
}

/// Association summary of a track at a new scan, predicted from the mixed
/// model-conditioned beliefs at the previous scan. The mixed priors are
/// returned through `mixed_out`.
inline TrackAssociationInput forward_prediction(const ScanBelief& last, const TrackerContext& ctx,
                                                std::vector<GaussianBelief>* mixed_out = nullptr) {
    TrackAssociationInput in;
    const DiscreteBelief vis_pred = ctx.cfg.visibility.transition.transpose() * last.vis_filtered;
    const DiscreteBelief mod_pred = ctx.cfg.model.transition.transpose() * last.model_filtered;
    in.p_visible = vis_pred(1) / vis_pred.sum();
    const std::vector<GaussianBelief> mixed =
        mix_models(posteriors_of(last.conditioned), last.model, ctx.cfg.model.transition);
    if (mixed_out) *mixed_out = mixed;
    for (std::size_t m = 0; m < ctx.bank.size(); ++m) {
        const GaussianBelief pred = predict(mixed[m], ctx.bank[m]);
        const MeasurementMoments mom = unscented_moments(pred, ctx.cfg.sensor, ctx.cfg.ut);
        ModelMeasurementPrediction p;
        p.weight = mod_pred(static_cast<Eigen::Index>(m)) / mod_pred.sum();
        p.y_hat = mom.mean;
        p.S = symmetrize(mom.cov + ctx.cfg.sensor.R);
        p.spread.setZero();
        in.models.push_back(p);
    }
    return in;
}

/// Runs LBP for one scan over the given track inputs, gating first.
inline AssociationMatrix associate(std::vector<TrackAssociationInput>& inputs,
                                   std::span<const Measurement> frame, const TrackerContext& ctx,
                                   long& nonconverged) {
    for (auto& in : inputs) {
        in.admitted.assign(frame.size(), 0);
        for (int j : gate(std::span<const ModelMeasurementPrediction>(in.models), frame,
                          ctx.cfg.sensor, ctx.gate_thr))
            in.admitted[static_cast<std::size_t>(j)] = 1;
    }
    const AssociationWeights w = build_weights(std::span<const TrackAssociationInput>(inputs), frame,
                                               ctx.cfg.sensor, ctx.cfg.detection, ctx.clutter_w);
    AssociationMatrix a = lbp_marginals(w, ctx.cfg.lbp);
    if (!a.converged) ++nonconverged;
    return a;
}

}  // namespace detail

// ---- Window iteration ---------------------------------------------------------------

/// Data association for every scan of the window: per-scan LBP over the
/// tracks present at that scan, followed by the synthetic measurements.
/// Returns the largest change of any association expectation.
inline double associate_window(WindowState& ws, const TrackerContext& ctx) {
    double change = 0.0;
    for (WindowFrame& f : ws.frames) {
        std::vector<std::size_t> who;
        std::vector<TrackAssociationInput> inputs;
        for (std::size_t t = 0; t < ws.tracks.size(); ++t) {
            const Track& tr = ws.tracks[t];
            if (!tr.at(f.scan)) continue;
            who.push_back(t);
            inputs.push_back(detail::window_prediction(
                tr, static_cast<std::size_t>(f.scan - tr.window.front().scan), ctx));
        }
        const AssociationMatrix a = detail::associate(inputs, f.measurements, ctx, ws.lbp_nonconverged);
        std::vector<double> clutter(f.measurements.size());
        for (std::size_t j = 0; j < clutter.size(); ++j) clutter[j] = a.clutter(static_cast<int>(j));
        change = std::max(change, detail::max_abs_diff(clutter, f.clutter));
        f.clutter = std::move(clutter);
        for (std::size_t n = 0; n < who.size(); ++n) {
            ScanBelief& b = *ws.tracks[who[n]].at(f.scan);
            std::vector<double> row = a.row(static_cast<int>(n));
            detail::normalize_row(row);
            change = std::max(change, detail::max_abs_diff(row, b.assoc));
            b.assoc = std::move(row);
            b.synth = synthetic_measurement(std::span<const double>(b.assoc),
                                            std::span<const Measurement>(f.measurements),
                                            ctx.cfg.sensor, ctx.cfg.sensor.R);
        }
    }
    return change;
}

/// Visibility beliefs b_E of one track by forward-backward over the window.
inline double update_visibility(Track& tr, const TrackerContext& ctx) {
    EmissionSequence em;
    em.reserve(tr.window.size());
    for (const auto& b : tr.window) em.push_back(detail::visibility_emission(b.assoc[0], ctx.cfg.detection));
    const MarkovChain chain =
        tr.anchor ? ctx.cfg.visibility.started_after(tr.anchor->vis_filtered) : ctx.cfg.visibility;
    const ForwardBackwardResult fb = forward_backward(chain, em);
    double change = 0.0;
    for (std::size_t t = 0; t < tr.window.size(); ++t) {
        change = std::max(change, detail::max_abs_diff(fb.posterior[t], tr.window[t].vis));
        tr.window[t].vis = fb.posterior[t];
        tr.window[t].vis_filtered = fb.filtered[t];
    }
    return change;
}

/// Model emission of one scan: dynamics term plus measurement term per model,
/// both evaluated on the model-conditioned belief of that scan.
inline Eigen::VectorXd model_emission(const Track& tr, std::size_t idx, const TrackerContext& ctx) {
    const ScanBelief& b = tr.window[idx];
    const auto& sensor = ctx.cfg.sensor;
    Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ctx.bank.size()));
    if (b.conditioned.size() != ctx.bank.size()) return e;
    for (std::size_t m = 0; m < ctx.bank.size(); ++m) {
        const ModelConditioned& c = b.conditioned[m];
        const double mx = c.has_prior ? model_dynamics_loglik(c.prior, c.posterior, c.cross_cov, ctx.bank[m]) : 0.0;
        double my = 0.0;
        if (b.synth.has_update()) {
            const Mat24 H = sensor.jacobian(c.posterior.mean);
            const Mat2 S = symmetrize(H * c.predicted.cov * H.transpose() + b.synth.R_bar);
            my = model_measurement_loglik(c.posterior, b.synth, sensor, S);
        }
        e(static_cast<Eigen::Index>(m)) = mx + my;
    }
    return e;
}

/// Model beliefs b_M of one track by forward-backward over the window.
inline double update_models(Track& tr, const TrackerContext& ctx) {
    EmissionSequence em;
    em.reserve(tr.window.size());
    for (std::size_t t = 0; t < tr.window.size(); ++t) em.push_back(model_emission(tr, t, ctx));
    const MarkovChain chain =
        tr.anchor ? ctx.cfg.model.started_after(tr.anchor->model_filtered) : ctx.cfg.model;
    const ForwardBackwardResult fb = forward_backward(chain, em);
    double change = 0.0;
    for (std::size_t t = 0; t < tr.window.size(); ++t) {
        change = std::max(change, detail::max_abs_diff(fb.posterior[t], tr.window[t].model));
        tr.window[t].model = fb.posterior[t];
        tr.window[t].model_filtered = fb.filtered[t];
    }
    return change;
}

/// Kinematic beliefs b_X of one track by the model-interacting smoother.
/// Returns the largest Mahalanobis shift of a smoothed mean.
inline double update_kinematics(Track& tr, const TrackerContext& ctx) {
    WindowKinematicsInput in;
    if (tr.anchor) in.anchor = WindowAnchor{tr.anchor->filtered, tr.anchor->per_model, tr.anchor->model};
    in.first_prior = tr.birth_prior;
    in.model_transition = ctx.cfg.model.transition;
    for (const auto& b : tr.window) {
        in.synthetic.push_back(b.synth);
        in.model_probs.push_back(b.model);
    }
    const SmoothedSequence seq = smooth_window(in, std::span<const MotionModel>(ctx.bank),
                                               ctx.cfg.sensor, ctx.cfg.ut);
    double change = 0.0;
    for (std::size_t t = 0; t < tr.window.size(); ++t) {
        ScanBelief& b = tr.window[t];
        const Vec4 d = seq.smoothed[t].mean - b.smoothed.mean;
        const Mat4 Pi = spd_inverse<4>(seq.smoothed[t].cov, "smoothed covariance");
        change = std::max(change, std::sqrt(std::max(0.0, d.dot(Pi * d))));
        b.smoothed = seq.smoothed[t];
        b.filtered = seq.filtered[t];
        b.cross_cov = seq.cross_cov[t];
        b.conditioned = seq.conditioned[t];
    }
    if (tr.anchor && seq.anchor_smoothed) tr.anchor->smoothed = *seq.anchor_smoothed;
    return change;
}

/// One outer iteration over the window in the order: data association,
/// visibility, model association, kinematics. Returns the belief change.
inline double iterate_window(WindowState& ws, const TrackerContext& ctx) {
    double change = associate_window(ws, ctx);
    for (Track& tr : ws.tracks) change = std::max(change, update_visibility(tr, ctx));
    for (Track& tr : ws.tracks) change = std::max(change, update_models(tr, ctx));
    for (Track& tr : ws.tracks) change = std::max(change, update_kinematics(tr, ctx));
    ++ws.iterations;
    return change;
}

/// Iterates until the belief change drops below delta_T or r_max is reached.
inline int run_window(WindowState& ws, const TrackerContext& ctx) {
    ws.iterations = 0;
    for (int r = 0; r < ctx.cfg.r_max; ++r)
        if (iterate_window(ws, ctx) < ctx.cfg.delta_T) break;
    return ws.iterations;
}

// ---- Track management -----------------------------------------------------------------

/// Confirmation and deletion from the visibility posteriors of the last three
/// scans. Returns the indices of tracks that were deleted.
inline std::vector<std::size_t> manage_tracks(std::vector<Track>& tracks, const TrackerConfig& cfg) {
    std::vector<std::size_t> deleted;
    for (std::size_t t = 0; t < tracks.size(); ++t) {
        Track& tr = tracks[t];
        if (tr.status == TrackStatus::deleted) continue;
        const std::size_t n = tr.window.size();
        if (n < 3) continue;
        double avg = 0.0;
        for (std::size_t i = n - 3; i < n; ++i) avg += tr.window[i].p_visible();
        avg /= 3.0;
        if (avg < cfg.delta_d) {
            tr.status = TrackStatus::deleted;
            deleted.push_back(t);
            continue;
        }
        const double score =
            cfg.confirmation == ConfirmationRule::averaged ? avg : tr.window.back().p_visible();
        if (tr.status != TrackStatus::confirmed && score > cfg.delta_c) {
            tr.status = TrackStatus::confirmed;
            tr.ever_confirmed = true;
        } else if (tr.status == TrackStatus::tentative) {
            tr.status = TrackStatus::preliminary;
        }
    }
    return deleted;
}

inline TrackEstimate to_estimate(const ScanBelief& b) {
    TrackEstimate e;
    e.scan = b.scan;
    e.mean = b.smoothed.mean;
    e.cov = b.smoothed.cov;
    e.model_probs = b.model;
    e.p_visible = b.p_visible();
    e.association = b.assoc;
    return e;
}

// ---- Driver ---------------------------------------------------------------------------

/// Sliding-window tracker. Feed one frame per scan with `process`, then call
/// `finish` and read the outputs.
class Tracker {
public:
    explicit Tracker(TrackerConfig cfg) : ctx_(std::move(cfg)) {}

    [[nodiscard]] const TrackerConfig& config() const { return ctx_.cfg; }
    [[nodiscard]] const WindowState& window() const { return ws_; }
    [[nodiscard]] const std::vector<int>& iteration_log() const { return iteration_log_; }
    [[nodiscard]] int scan() const { return scan_; }

    void process(std::span<const Measurement> frame) {
        if (finished_) throw std::logic_error("Tracker: process called after finish");
        ++scan_;
        slide();
        WindowFrame wf;
        wf.scan = scan_;
        wf.measurements.assign(frame.begin(), frame.end());
        wf.clutter.assign(frame.size(), 1.0);
        ws_.frames.push_back(std::move(wf));

        forward_step();
        initiate();
        if ((scan_ - 1) % ctx_.cfg.slide == 0) {
            iteration_log_.push_back(run_window(ws_, ctx_));
        } else {
            iteration_log_.push_back(0);
        }
        const auto deleted = manage_tracks(ws_.tracks, ctx_.cfg);
        retire(deleted);
        set_initiators();
        record_realtime();
    }

    /// Finalizes every remaining window scan.
    void finish() {
        if (finished_) return;
        for (Track& tr : ws_.tracks) {
            for (auto& b : tr.window) tr.history.push_back(b);
            tr.window.clear();
            retired_.push_back(std::move(tr));
        }
        ws_.tracks.clear();
        finished_ = true;
    }

    /// Reported tracks, ordered by id. Smoothed mode reports the finalized
    /// estimates of every track that was ever confirmed; real-time mode
    /// reports the newest-scan estimate of confirmed tracks at each scan.
    [[nodiscard]] std::vector<TrackOutput> outputs(OutputMode mode) const {
        std::vector<const Track*> all;
        for (const auto& t : retired_) all.push_back(&t);
        for (const auto& t : ws_.tracks) all.push_back(&t);
        std::sort(all.begin(), all.end(), [](const Track* a, const Track* b) { return a->id < b->id; });
        std::vector<TrackOutput> out;
        for (const Track* t : all) {
            TrackOutput o;
            o.id = t->id;
            if (mode == OutputMode::realtime) {
                o.estimates = t->realtime;
            } else if (t->ever_confirmed) {
                for (const auto& b : t->history)
                    if (b.p_visible() >= ctx_.cfg.report_threshold) o.estimates.push_back(to_estimate(b));
            }
            if (!o.estimates.empty()) out.push_back(std::move(o));
        }
        return out;
    }

    /// Every track ever created (retired first), for diagnostics.
    [[nodiscard]] std::vector<const Track*> all_tracks() const {
        std::vector<const Track*> all;
        for (const auto& t : retired_) all.push_back(&t);
        for (const auto& t : ws_.tracks) all.push_back(&t);
        return all;
    }

private:
    void slide() {
        const int oldest_kept = scan_ - ctx_.cfg.window + 1;
        while (!ws_.frames.empty() && ws_.frames.front().scan < oldest_kept) {
            const int dropped = ws_.frames.front().scan;
            ws_.frames.pop_front();
            for (Track& tr : ws_.tracks) {
                if (tr.window.empty() || tr.window.front().scan != dropped) continue;
                const ScanBelief& b = tr.window.front();
                TrackAnchor a;
                a.scan = b.scan;
                a.filtered = b.filtered;
                a.smoothed = b.smoothed;
                a.per_model = posteriors_of(b.conditioned);
                a.model = b.model;
                a.model_filtered = b.model_filtered;
                a.vis_filtered = b.vis_filtered;
                tr.anchor = a;
                tr.history.push_back(b);
                tr.window.pop_front();
            }
        }
    }

    /// Extends every existing track to the new scan with a forward-only step.
    void forward_step() {
        WindowFrame& f = ws_.frames.back();
        std::vector<TrackAssociationInput> inputs;
        std::vector<std::vector<GaussianBelief>> preds(ws_.tracks.size());
        for (std::size_t t = 0; t < ws_.tracks.size(); ++t)
            inputs.push_back(detail::forward_prediction(ws_.tracks[t].window.back(), ctx_, &preds[t]));
        const AssociationMatrix a = detail::associate(inputs, f.measurements, ctx_, ws_.lbp_nonconverged);
        for (std::size_t j = 0; j < f.measurements.size(); ++j) f.clutter[j] = a.clutter(static_cast<int>(j));

        for (std::size_t t = 0; t < ws_.tracks.size(); ++t) {
            Track& tr = ws_.tracks[t];
            const ScanBelief& last = tr.window.back();
            ScanBelief b;
            b.scan = scan_;
            b.assoc = a.row(static_cast<int>(t));
            detail::normalize_row(b.assoc);
            b.synth = synthetic_measurement(std::span<const double>(b.assoc),
                                            std::span<const Measurement>(f.measurements),
                                            ctx_.cfg.sensor, ctx_.cfg.sensor.R);
            b.vis_filtered = forward_step_visibility(last.vis_filtered, b.assoc[0]);
            b.vis = b.vis_filtered;
            extend_kinematics(last, preds[t], b);
            tr.window.push_back(std::move(b));
        }
    }

    DiscreteBelief forward_step_visibility(const DiscreteBelief& prev, double miss) const {
        return mpmmtt::forward_step(prev, ctx_.cfg.visibility,
                                    detail::visibility_emission(miss, ctx_.cfg.detection));
    }

    /// Model-conditioned filter step of every model, the model filter step
    /// with their likelihoods, and the fused kinematic belief.
    void extend_kinematics(const ScanBelief& last, const std::vector<GaussianBelief>& mixed,
                           ScanBelief& b) const {
        b.conditioned = conditioned_step(std::span<const GaussianBelief>(mixed), b.synth,
                                         std::span<const MotionModel>(ctx_.bank), ctx_.cfg.sensor,
                                         ctx_.cfg.ut);
        Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ctx_.bank.size()));
        for (std::size_t m = 0; m < ctx_.bank.size(); ++m)
            e(static_cast<Eigen::Index>(m)) = b.conditioned[m].log_likelihood;
        b.model_filtered = mpmmtt::forward_step(last.model_filtered, ctx_.cfg.model, e);
        b.model = b.model_filtered;
        const FusedStep f = fuse_step(b.conditioned, b.model, std::span<const MotionModel>(ctx_.bank));
        b.filtered = f.filtered;
        b.smoothed = f.filtered;
        const Mat4 G = last.filtered.cov * f.transition.transpose() *
                       spd_inverse<4>(f.predicted.cov, "predicted covariance");
        b.cross_cov = b.smoothed.cov * G.transpose();
    }

    /// Pairs last scan's initiators with unassociated measurements of this
    /// scan and starts a track for every accepted pair.
    void initiate() {
        WindowFrame& f = ws_.frames.back();
        if (initiators_.empty() || ws_.frames.size() < 2) return;
        WindowFrame& prev = ws_.frames[ws_.frames.size() - 2];
        std::vector<int> fresh;
        for (std::size_t j = 0; j < f.measurements.size(); ++j)
            if (f.clutter[j] > ctx_.cfg.initiator_threshold) fresh.push_back(static_cast<int>(j));
        if (fresh.empty()) return;

        const auto& sensor = ctx_.cfg.sensor;
        const double T = ctx_.cfg.T;
        const double limit = ctx_.cfg.vmax * T;
        Eigen::MatrixXd cost(initiators_.size(), fresh.size());
        for (std::size_t a = 0; a < initiators_.size(); ++a)
            for (std::size_t b = 0; b < fresh.size(); ++b) {
                const Vec2 p1 = sensor.to_cartesian(prev.measurements[initiators_[a]].vec());
                const Vec2 p2 = sensor.to_cartesian(f.measurements[fresh[b]].vec());
                const double d = (p2 - p1).norm();
                cost(a, b) = d <= limit ? d : 1e3 * limit + d;
            }
        const Assignment as = hungarian(cost);
        for (std::size_t a = 0; a < initiators_.size(); ++a) {
            const int b = as.row_to_col[a];
            if (b < 0 || cost(a, b) > limit) continue;
            const int j1 = initiators_[a];
            const int j2 = fresh[static_cast<std::size_t>(b)];
            const auto init = two_point_init(prev.measurements[j1], f.measurements[j2], T,
                                             ctx_.cfg.vmax, sensor, ctx_.cfg.birth_inflation);
            if (!init) continue;
            start_track(*init, prev, j1, f, j2);
        }
    }

    void start_track(const TwoPointInit& init, WindowFrame& f1, int j1, WindowFrame& f2, int j2) {
        Track tr;
        tr.id = next_id_++;
        tr.first_scan = f1.scan;
        tr.birth_prior = init.birth_prior;
        const auto one_hot = [](std::size_t n, int j) {
            std::vector<double> r(n + 1, 0.0);
            r[static_cast<std::size_t>(j) + 1] = 1.0;
            return r;
        };
        ScanBelief b1;
        b1.scan = f1.scan;
        b1.assoc = one_hot(f1.measurements.size(), j1);
        b1.synth = synthetic_measurement(std::span<const double>(b1.assoc),
                                         std::span<const Measurement>(f1.measurements),
                                         ctx_.cfg.sensor, ctx_.cfg.sensor.R);
        b1.vis_filtered = forward_step_visibility_first(b1.assoc[0]);
        b1.vis = b1.vis_filtered;
        b1.model_filtered = ctx_.cfg.model.prior;
        b1.model = b1.model_filtered;
        b1.conditioned = conditioned_first(init.birth_prior, b1.synth, ctx_.bank.size(),
                                           ctx_.cfg.sensor, ctx_.cfg.ut);
        b1.filtered = b1.conditioned.front().posterior;
        b1.smoothed = b1.filtered;

        ScanBelief b2;
        b2.scan = f2.scan;
        b2.assoc = one_hot(f2.measurements.size(), j2);
        b2.synth = synthetic_measurement(std::span<const double>(b2.assoc),
                                         std::span<const Measurement>(f2.measurements),
                                         ctx_.cfg.sensor, ctx_.cfg.sensor.R);
        b2.vis_filtered = forward_step_visibility(b1.vis_filtered, b2.assoc[0]);
        b2.vis = b2.vis_filtered;
        const std::vector<GaussianBelief> mixed =
            mix_models(posteriors_of(b1.conditioned), b1.model, ctx_.cfg.model.transition);
        extend_kinematics(b1, mixed, b2);

        f1.clutter[static_cast<std::size_t>(j1)] = 0.0;
        f2.clutter[static_cast<std::size_t>(j2)] = 0.0;
        tr.window.push_back(std::move(b1));
        tr.window.push_back(std::move(b2));
        ws_.tracks.push_back(std::move(tr));
    }

    DiscreteBelief forward_step_visibility_first(double miss) const {
        const Eigen::VectorXd e = detail::visibility_emission(miss, ctx_.cfg.detection);
        DiscreteBelief b = ctx_.cfg.visibility.prior.cwiseProduct((e.array() - e.maxCoeff()).exp().matrix());
        return b / b.sum();
    }

    void retire(const std::vector<std::size_t>& deleted) {
        if (deleted.empty()) return;
        std::vector<Track> keep;
        std::size_t d = 0;
        for (std::size_t t = 0; t < ws_.tracks.size(); ++t) {
            if (d < deleted.size() && deleted[d] == t) {
                Track& tr = ws_.tracks[t];
                // Measurements held by a deleted track go back to clutter.
                for (const auto& b : tr.window) {
                    WindowFrame* f = ws_.frame(b.scan);
                    if (!f || b.assoc.size() != f->measurements.size() + 1) continue;
                    for (std::size_t j = 0; j < f->measurements.size(); ++j)
                        f->clutter[j] = std::min(1.0, f->clutter[j] + b.assoc[j + 1]);
                }
                for (auto& b : tr.window) tr.history.push_back(b);
                tr.window.clear();
                retired_.push_back(std::move(tr));
                ++d;
            } else {
                keep.push_back(std::move(ws_.tracks[t]));
            }
        }
        ws_.tracks = std::move(keep);
    }

    void set_initiators() {
        initiators_.clear();
        const WindowFrame& f = ws_.frames.back();
        for (std::size_t j = 0; j < f.measurements.size(); ++j)
            if (f.clutter[j] > ctx_.cfg.initiator_threshold) initiators_.push_back(static_cast<int>(j));
    }

    void record_realtime() {
        for (Track& tr : ws_.tracks) {
            if (tr.status != TrackStatus::confirmed || tr.window.empty()) continue;
            const ScanBelief& b = tr.window.back();
            if (b.scan == scan_ && b.p_visible() >= ctx_.cfg.report_threshold)
                tr.realtime.push_back(to_estimate(b));
        }
    }

    TrackerContext ctx_;
    WindowState ws_;
    std::vector<Track> retired_;
    std::vector<int> initiators_;
    std::vector<int> iteration_log_;
    int scan_ = 0;
    int next_id_ = 1;
    bool finished_ = false;
};

}  // namespace mpmmtt
