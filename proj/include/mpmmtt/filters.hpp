#pragma once

#include "mpmmtt/linalg.hpp"
#include "mpmmtt/models.hpp"

#include <array>
#include <cassert>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace mpmmtt {

/// Gaussian belief N(mean, cov) over the kinematic state.
struct GaussianBelief {
    Vec4 mean = Vec4::Zero();
    Mat4 cov = Mat4::Identity();
};

struct UnscentedParams {
    double alpha = 1e-3;
    double beta = 2.0;
    double kappa = 0.0;
};

/// Association-weighted measurement with inflated covariance. When the
/// track's miss weight is (numerically) one the scan carries no kinematic
/// information and `has_update()` is false.
struct SyntheticMeasurement {
    Vec2 y_bar = Vec2::Zero();
    Mat2 R_bar = Mat2::Identity();
    double miss_weight = 1.0;

    static constexpr double kNoUpdateThreshold = 1.0 - 1e-9;

    [[nodiscard]] bool has_update() const { return miss_weight < kNoUpdateThreshold; }
};

struct MeasurementMoments {
    Vec2 mean = Vec2::Zero();
    Mat2 cov = Mat2::Zero();
    Mat42 cross = Mat42::Zero();  // cov(x, y)
};

struct UpdateResult {
    GaussianBelief posterior;
    Mat2 S = Mat2::Identity();  // innovation covariance
    Vec2 innovation = Vec2::Zero();
    Vec2 predicted_measurement = Vec2::Zero();
    double log_likelihood = 0.0;  // ln N(innovation; 0, S)
};

// ---- Prediction ----------------------------------------------------------

inline GaussianBelief predict(const GaussianBelief& prior, const MotionModel& model) {
    GaussianBelief out;
    out.mean = model.F * prior.mean;
    out.cov = symmetrize(model.F * prior.cov * model.F.transpose() + model.Q);
    return out;
}

// ---- Unscented transform ---------------------------------------------------

namespace detail {

/// Columns of a square root of `c * P`, falling back to an eigen-decomposition
/// when P is only semi-definite.
inline Mat4 scaled_sqrt(const Mat4& P, double c) {
    Eigen::LLT<Mat4> llt(c * symmetrize(P));
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::SelfAdjointEigenSolver<Mat4> es(c * symmetrize(P));
    const Vec4 ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal();
}

}  // namespace detail

/// Unscented approximation of the mean and covariance of sensor.predict(x)
/// for x ~ belief, and the state/measurement cross-covariance. Averages are
/// accumulated as residuals against the central sigma point, so angular
/// components never straddle the wrap.
template <MeasurementSensor Sensor>
MeasurementMoments unscented_moments(const GaussianBelief& belief, const Sensor& sensor,
                                     const UnscentedParams& ut = {}) {
    constexpr int n = kStateDim;
    const double lambda = ut.alpha * ut.alpha * (n + ut.kappa) - n;
    const double c = n + lambda;
    const double wm0 = lambda / c;
    const double wc0 = wm0 + (1.0 - ut.alpha * ut.alpha + ut.beta);
    const double wi = 1.0 / (2.0 * c);

    const Mat4 L = detail::scaled_sqrt(belief.cov, c);
    const Vec2 y0 = sensor.predict(belief.mean);

    std::array<Vec2, 2 * n> dy;  // residual(Y_i, Y_0)
    for (int i = 0; i < n; ++i) {
        dy[i] = sensor.residual(sensor.predict(belief.mean + L.col(i)), y0);
        dy[n + i] = sensor.residual(sensor.predict(belief.mean - L.col(i)), y0);
    }
    Vec2 shift = Vec2::Zero();
    for (const auto& d : dy) shift += wi * d;

    MeasurementMoments out;
    out.mean = y0 + shift;
    out.cov = wc0 * shift * shift.transpose();
    out.cross.setZero();
    for (int i = 0; i < n; ++i) {
        const Vec2 dp = dy[i] - shift;
        const Vec2 dm = dy[n + i] - shift;
        out.cov += wi * (dp * dp.transpose() + dm * dm.transpose());
        out.cross += wi * (L.col(i) * dp.transpose() - L.col(i) * dm.transpose());
    }
    out.cov = symmetrize(out.cov);
    return out;
}

// ---- Synthetic measurement ------------------------------------------------

/// Builds the association-weighted synthetic measurement for one track at one
/// scan. `weights[0]` is the miss weight; `weights[j]` pairs with
/// `measurements[j-1]`.
template <MeasurementSensor Sensor>
SyntheticMeasurement synthetic_measurement(std::span<const double> weights,
                                           std::span<const Measurement> measurements,
                                           const Sensor& sensor, const Mat2& R) {
    if (weights.size() != measurements.size() + 1)
        throw std::invalid_argument("synthetic_measurement: weight row size mismatch");
    double total = 0.0;
    for (double w : weights) {
        if (w < -1e-12 || w > 1.0 + 1e-12)
            throw std::invalid_argument("synthetic_measurement: weight outside [0,1]");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-6)
        throw std::invalid_argument("synthetic_measurement: weights do not sum to one");

    SyntheticMeasurement out;
    out.miss_weight = std::clamp(weights[0], 0.0, 1.0);
    if (!out.has_update() || measurements.empty()) {
        out.miss_weight = 1.0;
        out.R_bar = R;
        return out;
    }
    // Reference is the weight-maximal measurement; residuals keep azimuth continuous.
    std::size_t ref = 0;
    for (std::size_t j = 1; j < measurements.size(); ++j)
        if (weights[j + 1] > weights[ref + 1]) ref = j;
    const Vec2 y_ref = measurements[ref].vec();
    Vec2 acc = Vec2::Zero();
    for (std::size_t j = 0; j < measurements.size(); ++j)
        acc += weights[j + 1] * sensor.residual(measurements[j].vec(), y_ref);
    const double detect = 1.0 - out.miss_weight;
    out.y_bar = y_ref + acc / detect;
    out.R_bar = R / detect;
    return out;
}

// ---- Measurement update ---------------------------------------------------

inline double gaussian_log_density(const Vec2& r, const Mat2& S) {
    const Mat2 Si = spd_inverse<2>(S, "innovation covariance");
    return -0.5 * r.dot(Si * r) - std::log(2.0 * std::numbers::pi) - 0.5 * std::log(S.determinant());
}

/// Unscented measurement update of `pred` with the synthetic measurement.
template <MeasurementSensor Sensor>
UpdateResult update(const GaussianBelief& pred, const SyntheticMeasurement& synth,
                    const Sensor& sensor, const UnscentedParams& ut = {}) {
    UpdateResult out;
    const MeasurementMoments mom = unscented_moments(pred, sensor, ut);
    out.predicted_measurement = mom.mean;
    out.S = symmetrize(mom.cov + synth.R_bar);
    if (!synth.has_update()) {
        out.posterior = pred;
        return out;
    }
    const Mat2 Si = spd_inverse<2>(out.S, "innovation covariance");
    const Mat42 K = mom.cross * Si;
    out.innovation = sensor.residual(synth.y_bar, mom.mean);
    out.posterior.mean = pred.mean + K * out.innovation;
    out.posterior.cov = symmetrize(pred.cov - K * out.S * K.transpose());
    out.log_likelihood = gaussian_log_density(out.innovation, out.S);
    return out;
}

// ---- Model fusion ----------------------------------------------------------

/// Information-form fusion of model-conditioned beliefs:
/// P^-1 = sum_m w_m (P^m)^-1,  x = P sum_m w_m (P^m)^-1 x^m.
inline GaussianBelief fuse_models(std::span<const GaussianBelief> per_model,
                                  std::span<const double> weights) {
    if (per_model.size() != weights.size() || per_model.empty())
        throw std::invalid_argument("fuse_models: size mismatch");
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("fuse_models: negative model weight");
        total += w;
    }
    if (total <= 0.0) throw std::invalid_argument("fuse_models: all model weights are zero");
    if (std::abs(total - 1.0) > 1e-6)
        throw std::invalid_argument("fuse_models: model weights do not sum to one");

    Mat4 info = Mat4::Zero();
    Vec4 info_mean = Vec4::Zero();
    for (std::size_t m = 0; m < per_model.size(); ++m) {
        if (weights[m] == 0.0) continue;
        const Mat4 Pi = spd_inverse<4>(per_model[m].cov, "model covariance");
        info += weights[m] * Pi;
        info_mean += weights[m] * (Pi * per_model[m].mean);
    }
    GaussianBelief out;
    out.cov = spd_inverse<4>(info, "fused information");
    out.mean = out.cov * info_mean;
    return out;
}

// ---- Smoothing -------------------------------------------------------------

/// One model-conditioned filter step: the mixed prior at t-1, its prediction
/// through the model and the update with the synthetic measurement.
struct ModelConditioned {
    GaussianBelief prior;
    GaussianBelief predicted;
    GaussianBelief posterior;
    Mat4 cross_cov = Mat4::Zero();  // cov(x_t, x_{t-1}) given the model
    double log_likelihood = 0.0;
    bool has_prior = false;         // false at the first scan of a track
};

/// Output of a fixed-interval smoothing pass over one window.
struct SmoothedSequence {
    std::vector<GaussianBelief> smoothed;
    std::vector<GaussianBelief> filtered;
    /// cov(x_t, x_{t-1} | all data). Zero at t = 0 unless an anchor exists.
    std::vector<Mat4> cross_cov;
    /// Per time, per model: the model-conditioned filter step.
    std::vector<std::vector<ModelConditioned>> conditioned;
    /// Smoothed belief at the anchor time (the scan before the window), if any.
    std::optional<GaussianBelief> anchor_smoothed;

    [[nodiscard]] std::size_t size() const { return smoothed.size(); }
};

struct RtsResult {
    std::vector<GaussianBelief> smoothed;
    std::vector<Mat4> cross_cov;  // cov(x_t, x_{t-1}); [0] is zero
};

/// Rauch-Tung-Striebel backward pass. `predicted[t]` and `transition[t]`
/// describe the step t-1 -> t; entry 0 of both is ignored.
inline RtsResult rts_smooth(std::span<const GaussianBelief> filtered,
                            std::span<const GaussianBelief> predicted,
                            std::span<const Mat4> transition) {
    const std::size_t K = filtered.size();
    if (predicted.size() != K || transition.size() != K)
        throw std::invalid_argument("rts_smooth: sequence length mismatch");
    RtsResult out;
    out.smoothed.assign(filtered.begin(), filtered.end());
    out.cross_cov.assign(K, Mat4::Zero());
    if (K == 0) return out;
    for (std::size_t t = K - 1; t > 0; --t) {
        const GaussianBelief& f = filtered[t - 1];
        const Mat4 Ppi = spd_inverse<4>(predicted[t].cov, "predicted covariance");
        const Mat4 G = f.cov * transition[t].transpose() * Ppi;
        const GaussianBelief& s_next = out.smoothed[t];
        GaussianBelief& s = out.smoothed[t - 1];
        s.mean = f.mean + G * (s_next.mean - predicted[t].mean);
        s.cov = symmetrize(f.cov + G * (s_next.cov - predicted[t].cov) * G.transpose());
        out.cross_cov[t] = s_next.cov * G.transpose();
    }
    return out;
}

/// Moment-matched mixing of model-conditioned beliefs. The mixed prior of
/// model m weights belief n by transition(n, m) * probs(n).
inline std::vector<GaussianBelief> mix_models(std::span<const GaussianBelief> per_model,
                                              const Eigen::VectorXd& probs,
                                              const Eigen::MatrixXd& transition) {
    const auto nm = static_cast<Eigen::Index>(per_model.size());
    if (probs.size() != nm || transition.rows() != nm || transition.cols() != nm)
        throw std::invalid_argument("mix_models: size mismatch");
    std::vector<GaussianBelief> out(per_model.size());
    for (Eigen::Index m = 0; m < nm; ++m) {
        Eigen::VectorXd w = transition.col(m).cwiseProduct(probs);
        const double total = w.sum();
        if (total > 0.0) w /= total;
        else w.setConstant(1.0 / static_cast<double>(nm));
        Vec4 x = Vec4::Zero();
        for (Eigen::Index n = 0; n < nm; ++n) x += w(n) * per_model[n].mean;
        Mat4 P = Mat4::Zero();
        for (Eigen::Index n = 0; n < nm; ++n) {
            const Vec4 d = per_model[n].mean - x;
            P += w(n) * (per_model[n].cov + d * d.transpose());
        }
        out[m].mean = x;
        out[m].cov = symmetrize(P);
    }
    return out;
}

/// Model-conditioned filter step of every model from its mixed prior.
template <MeasurementSensor Sensor>
std::vector<ModelConditioned> conditioned_step(std::span<const GaussianBelief> mixed,
                                               const SyntheticMeasurement& synth,
                                               std::span<const MotionModel> models,
                                               const Sensor& sensor, const UnscentedParams& ut = {}) {
    if (mixed.size() != models.size()) throw std::invalid_argument("conditioned_step: size mismatch");
    std::vector<ModelConditioned> out(models.size());
    for (std::size_t m = 0; m < models.size(); ++m) {
        ModelConditioned& c = out[m];
        c.prior = mixed[m];
        c.has_prior = true;
        c.predicted = predict(mixed[m], models[m]);
        if (synth.has_update()) {
            const UpdateResult u = update(c.predicted, synth, sensor, ut);
            c.posterior = u.posterior;
            c.log_likelihood = u.log_likelihood;
        } else {
            c.posterior = c.predicted;
        }
        c.cross_cov = c.posterior.cov * spd_inverse<4>(c.predicted.cov, "model predicted covariance") *
                      models[m].F * mixed[m].cov;
    }
    return out;
}

/// First scan of a track: every model starts from the same prior, without a
/// transition.
template <MeasurementSensor Sensor>
std::vector<ModelConditioned> conditioned_first(const GaussianBelief& prior,
                                                const SyntheticMeasurement& synth,
                                                std::size_t num_models, const Sensor& sensor,
                                                const UnscentedParams& ut = {}) {
    std::vector<ModelConditioned> out(num_models);
    for (auto& c : out) {
        c.prior = prior;
        c.predicted = prior;
        if (synth.has_update()) {
            const UpdateResult u = update(prior, synth, sensor, ut);
            c.posterior = u.posterior;
            c.log_likelihood = u.log_likelihood;
        } else {
            c.posterior = prior;
        }
    }
    return out;
}

inline std::vector<GaussianBelief> posteriors_of(std::span<const ModelConditioned> c) {
    std::vector<GaussianBelief> out;
    out.reserve(c.size());
    for (const auto& x : c) out.push_back(x.posterior);
    return out;
}

/// Fused view of one interacting step.
struct FusedStep {
    GaussianBelief predicted;
    GaussianBelief filtered;
    /// Effective transition from the previous fused belief,
    /// P_pred sum_m w_m (P^m_pred)^-1 F_m.
    Mat4 transition = Mat4::Identity();
};

/// Information-form fusion of the conditioned predictions and posteriors with
/// the model probabilities `w`.
inline FusedStep fuse_step(std::span<const ModelConditioned> c, const Eigen::VectorXd& w,
                           std::span<const MotionModel> models) {
    const std::size_t nm = c.size();
    if (models.size() != nm || static_cast<std::size_t>(w.size()) != nm)
        throw std::invalid_argument("fuse_step: size mismatch");
    FusedStep out;
    Mat4 info = Mat4::Zero();
    Vec4 info_mean = Vec4::Zero();
    Mat4 info_F = Mat4::Zero();
    for (std::size_t m = 0; m < nm; ++m) {
        const double wm = w(static_cast<Eigen::Index>(m));
        if (wm <= 0.0) continue;
        const Mat4 Pi = spd_inverse<4>(c[m].predicted.cov, "predicted covariance");
        info += wm * Pi;
        info_mean += wm * (Pi * c[m].predicted.mean);
        info_F += wm * (Pi * models[m].F);
    }
    out.predicted.cov = spd_inverse<4>(info, "fused predicted information");
    out.predicted.mean = out.predicted.cov * info_mean;
    out.transition = c.empty() || !c[0].has_prior ? Mat4::Identity() : Mat4(out.predicted.cov * info_F);
    std::vector<GaussianBelief> posts = posteriors_of(c);
    std::vector<double> wv(w.data(), w.data() + w.size());
    out.filtered = fuse_models(posts, wv);
    return out;
}

/// Beliefs at the scan before a window.
struct WindowAnchor {
    GaussianBelief filtered;                 // fused
    std::vector<GaussianBelief> per_model;   // model-conditioned posteriors
    Eigen::VectorXd model_probs;             // model probabilities used for mixing
};

/// Inputs of the model-interacting window smoother for one track.
struct WindowKinematicsInput {
    /// When absent, the first window scan starts every model from `first_prior`.
    std::optional<WindowAnchor> anchor;
    GaussianBelief first_prior;
    std::vector<SyntheticMeasurement> synthetic;    // per scan
    std::vector<Eigen::VectorXd> model_probs;       // per scan, sums to one
    Eigen::MatrixXd model_transition;               // row-stochastic
};

/// Model-interacting fixed-interval smoother over one window. The forward
/// pass runs one filter per model from mixed priors and fuses the
/// model-conditioned posteriors with the model probabilities; the backward
/// pass is an RTS recursion through the effective fused transition.
template <MeasurementSensor Sensor>
SmoothedSequence smooth_window(const WindowKinematicsInput& in,
                               std::span<const MotionModel> models, const Sensor& sensor,
                               const UnscentedParams& ut = {}) {
    const std::size_t K = in.synthetic.size();
    if (in.model_probs.size() != K) throw std::invalid_argument("smooth_window: length mismatch");
    if (K == 0) throw std::invalid_argument("smooth_window: empty window");

    const std::size_t offset = in.anchor ? 1 : 0;
    const std::size_t N = K + offset;
    std::vector<GaussianBelief> filt(N), pred(N);
    std::vector<Mat4> trans(N, Mat4::Identity());
    SmoothedSequence out;
    out.conditioned.resize(K);
    if (in.anchor) {
        filt[0] = in.anchor->filtered;
        pred[0] = in.anchor->filtered;
    }
    for (std::size_t t = 0; t < K; ++t) {
        std::vector<ModelConditioned> c;
        if (t == 0 && !in.anchor) {
            c = conditioned_first(in.first_prior, in.synthetic[0], models.size(), sensor, ut);
        } else {
            const std::vector<GaussianBelief> prev =
                t == 0 ? in.anchor->per_model : posteriors_of(out.conditioned[t - 1]);
            const Eigen::VectorXd& p = t == 0 ? in.anchor->model_probs : in.model_probs[t - 1];
            const auto mixed = mix_models(prev, p, in.model_transition);
            c = conditioned_step(std::span<const GaussianBelief>(mixed), in.synthetic[t], models,
                                 sensor, ut);
        }
        const FusedStep f = fuse_step(c, in.model_probs[t], models);
        filt[t + offset] = f.filtered;
        pred[t + offset] = f.predicted;
        trans[t + offset] = f.transition;
        out.conditioned[t] = std::move(c);
    }
    RtsResult rts = rts_smooth(filt, pred, trans);
    out.filtered.assign(filt.begin() + offset, filt.end());
    out.smoothed.assign(rts.smoothed.begin() + offset, rts.smoothed.end());
    out.cross_cov.assign(rts.cross_cov.begin() + offset, rts.cross_cov.end());
    if (in.anchor) out.anchor_smoothed = rts.smoothed[0];
    return out;
}

// ---- Model log-likelihood terms ---------------------------------------------

/// Expected transition log-likelihood term of one model between two
/// consecutive smoothed beliefs, normalized by the predicted covariance
/// F P_{k-1} F^T + Q built from the smoothed previous covariance.
inline double model_dynamics_loglik(const GaussianBelief& prev, const GaussianBelief& cur,
                                    const Mat4& cross_cov, const MotionModel& model) {
    const Mat4& F = model.F;
    const Mat4 Pp = F * prev.cov * F.transpose() + model.Q;
    const Vec4 d = cur.mean - F * prev.mean;
    const Mat4 E = cur.cov - cross_cov * F.transpose() - F * cross_cov.transpose() +
                   F * prev.cov * F.transpose() + d * d.transpose();
    return -0.5 * (spd_inverse<4>(Pp, "model predicted covariance") * E).trace();
}

/// Per-scan dynamics terms over a smoothed window. The first scan contributes
/// zero unless the sequence carries an anchor.
inline std::vector<double> model_dynamics_loglik(const SmoothedSequence& seq,
                                                 const MotionModel& model) {
    std::vector<double> out(seq.size(), 0.0);
    for (std::size_t t = 0; t < seq.size(); ++t) {
        if (t == 0) {
            if (seq.anchor_smoothed)
                out[0] = model_dynamics_loglik(*seq.anchor_smoothed, seq.smoothed[0],
                                               seq.cross_cov[0], model);
            continue;
        }
        out[t] = model_dynamics_loglik(seq.smoothed[t - 1], seq.smoothed[t], seq.cross_cov[t], model);
    }
    return out;
}

/// Expected measurement log-likelihood term of one model:
/// -1/2 tr{ S^-1 ((y - h(x))(y - h(x))^T + H P H^T) }.
template <MeasurementSensor Sensor>
double model_measurement_loglik(const GaussianBelief& belief, const SyntheticMeasurement& synth,
                                const Sensor& sensor, const Mat2& S) {
    if (!synth.has_update()) return 0.0;
    const Vec2 r = sensor.residual(synth.y_bar, sensor.predict(belief.mean));
    const Mat24 H = sensor.jacobian(belief.mean);
    const Mat2 E = r * r.transpose() + H * belief.cov * H.transpose();
    return -0.5 * (spd_inverse<2>(S, "innovation covariance") * E).trace();
}

}  // namespace mpmmtt
