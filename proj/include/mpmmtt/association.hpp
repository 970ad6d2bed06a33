#pragma once

#include "mpmmtt/filters.hpp"
#include "mpmmtt/linalg.hpp"
#include "mpmmtt/models.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace mpmmtt {

/// Log-domain inputs of the association problem for one scan.
/// Target i explains measurement j with weight exp(detect_w[i] + lik_w(i,j)),
/// is missed with weight exp(miss_w[i]), and each measurement left to clutter
/// contributes exp(clutter_w).
struct AssociationWeights {
    std::vector<double> detect_w;  // ln <P_d(e)>
    std::vector<double> miss_w;    // ln <1 - P_d(e)>
    Eigen::MatrixXd lik_w;         // N_T x N_E, -inf when gated out
    double clutter_w = 0.0;

    [[nodiscard]] int targets() const { return static_cast<int>(detect_w.size()); }
    [[nodiscard]] int measurements() const { return static_cast<int>(lik_w.cols()); }

    /// ln(<P_d> / <1 - P_d>) for target i.
    [[nodiscard]] double detection_log_ratio(int i) const { return detect_w[i] - miss_w[i]; }

    void validate() const {
        if (miss_w.size() != detect_w.size() || lik_w.rows() != targets())
            throw std::invalid_argument("AssociationWeights: inconsistent dimensions");
    }
};

/// Association expectations over the (N_T+1) x (N_E+1) grid. Row 0 holds the
/// clutter indicators, column 0 the miss indicators; entry (0,0) is zero.
struct AssociationMatrix {
    Eigen::MatrixXd a_hat;
    int iterations_used = 0;
    bool converged = true;

    [[nodiscard]] int targets() const { return static_cast<int>(a_hat.rows()) - 1; }
    [[nodiscard]] int measurements() const { return static_cast<int>(a_hat.cols()) - 1; }
    [[nodiscard]] double miss(int i) const { return a_hat(i + 1, 0); }
    [[nodiscard]] double clutter(int j) const { return a_hat(0, j + 1); }
    /// Expectation that target i (0-based) generated measurement j (0-based).
    [[nodiscard]] double pair(int i, int j) const { return a_hat(i + 1, j + 1); }

    /// Row of target i as [miss, m_1, ..., m_NE].
    [[nodiscard]] std::vector<double> row(int i) const {
        std::vector<double> r(a_hat.cols());
        for (Eigen::Index j = 0; j < a_hat.cols(); ++j) r[j] = a_hat(i + 1, j);
        return r;
    }

    static AssociationMatrix empty(int n_targets, int n_meas) {
        AssociationMatrix a;
        a.a_hat = Eigen::MatrixXd::Zero(n_targets + 1, n_meas + 1);
        for (int i = 1; i <= n_targets; ++i) a.a_hat(i, 0) = 1.0;
        for (int j = 1; j <= n_meas; ++j) a.a_hat(0, j) = 1.0;
        return a;
    }
};

struct LbpOptions {
    int max_iters = 200;
    double tol = 1e-9;
    double damping = 0.5;  // weight of the previous log-message
};

namespace detail {

/// logistic(a - b) with -inf handled: returns 0 when a = -inf, 1 when only b = -inf.
inline double logistic_diff(double a, double b) {
    if (a == kNegInf) return 0.0;
    if (b == kNegInf) return 1.0;
    return logistic(a - b);
}

inline double message_delta(double a, double b) {
    if (a == b) return 0.0;
    if (!std::isfinite(a) || !std::isfinite(b)) return std::numeric_limits<double>::infinity();
    return std::abs(a - b);
}

}  // namespace detail

/// Loopy belief propagation over the one-to-one frame constraints.
///
/// Messages are kept as log-ratios. With D_ij = detect_w[i] + lik_w(i,j):
///   R_ij = -ln( e^{miss_w[i]} + sum_{j' != j} e^{D_ij' + C_ij'} )
///   C_ij = -ln( e^{clutter_w} + sum_{i' != i} e^{D_i'j + R_i'j} )
/// Each sweep updates all row messages and then all column messages.
inline AssociationMatrix lbp_marginals(const AssociationWeights& w, const LbpOptions& opt = {}) {
    w.validate();
    const int nt = w.targets();
    const int ne = w.measurements();
    AssociationMatrix out = AssociationMatrix::empty(nt, ne);
    if (nt == 0 || ne == 0) {
        out.iterations_used = 0;
        return out;
    }

    Eigen::MatrixXd D(nt, ne);
    for (int i = 0; i < nt; ++i)
        for (int j = 0; j < ne; ++j)
            D(i, j) = w.lik_w(i, j) == kNegInf ? kNegInf : w.detect_w[i] + w.lik_w(i, j);

    // Start from "every target missed, every measurement clutter".
    Eigen::MatrixXd R(nt, ne), C(nt, ne);
    for (int i = 0; i < nt; ++i) R.row(i).setConstant(-w.miss_w[i]);
    C.setConstant(-w.clutter_w);

    std::vector<double> terms;
    terms.reserve(static_cast<std::size_t>(std::max(nt, ne)) + 1);
    const double keep = opt.damping;
    bool converged = false;
    int it = 0;
    for (; it < opt.max_iters && !converged; ++it) {
        double delta = 0.0;
        for (int i = 0; i < nt; ++i) {
            for (int j = 0; j < ne; ++j) {
                if (D(i, j) == kNegInf) continue;
                terms.clear();
                terms.push_back(w.miss_w[i]);
                for (int j1 = 0; j1 < ne; ++j1)
                    if (j1 != j) terms.push_back(D(i, j1) + C(i, j1));
                double fresh = -log_sum_exp(terms);
                if (it > 0 && std::isfinite(fresh) && std::isfinite(R(i, j)))
                    fresh = keep * R(i, j) + (1.0 - keep) * fresh;
                delta = std::max(delta, detail::message_delta(fresh, R(i, j)));
                R(i, j) = fresh;
            }
        }
        for (int j = 0; j < ne; ++j) {
            for (int i = 0; i < nt; ++i) {
                if (D(i, j) == kNegInf) continue;
                terms.clear();
                terms.push_back(w.clutter_w);
                for (int i1 = 0; i1 < nt; ++i1)
                    if (i1 != i) terms.push_back(D(i1, j) + R(i1, j));
                double fresh = -log_sum_exp(terms);
                if (it > 0 && std::isfinite(fresh) && std::isfinite(C(i, j)))
                    fresh = keep * C(i, j) + (1.0 - keep) * fresh;
                delta = std::max(delta, detail::message_delta(fresh, C(i, j)));
                C(i, j) = fresh;
            }
        }
        converged = it > 0 && delta < opt.tol;
    }
    out.iterations_used = it;
    out.converged = converged;

    // Final undamped row refresh so every target row sums to one exactly.
    for (int i = 0; i < nt; ++i) {
        for (int j = 0; j < ne; ++j) {
            if (D(i, j) == kNegInf) continue;
            terms.clear();
            terms.push_back(w.miss_w[i]);
            for (int j1 = 0; j1 < ne; ++j1)
                if (j1 != j) terms.push_back(D(i, j1) + C(i, j1));
            R(i, j) = -log_sum_exp(terms);
        }
    }

    for (int i = 0; i < nt; ++i) {
        terms.clear();
        for (int j = 0; j < ne; ++j) {
            if (D(i, j) == kNegInf) continue;
            terms.push_back(D(i, j) + C(i, j));
            out.a_hat(i + 1, j + 1) = logistic(D(i, j) + R(i, j) + C(i, j));
        }
        out.a_hat(i + 1, 0) = detail::logistic_diff(w.miss_w[i], log_sum_exp(terms));
    }
    for (int j = 0; j < ne; ++j) {
        terms.clear();
        for (int i = 0; i < nt; ++i)
            if (D(i, j) != kNegInf) terms.push_back(D(i, j) + R(i, j));
        out.a_hat(0, j + 1) = detail::logistic_diff(w.clutter_w, log_sum_exp(terms));
    }
    out.a_hat(0, 0) = 0.0;
    return out;
}

/// Exact marginals by enumerating every feasible one-to-one event.
/// Limited to N_T <= 6 and N_E <= 6.
inline AssociationMatrix enumerate_marginals(const AssociationWeights& w) {
    w.validate();
    const int nt = w.targets();
    const int ne = w.measurements();
    if (nt > 6 || ne > 6) throw std::invalid_argument("enumerate_marginals: problem too large");

    // acc(i, j) accumulates log weights; row nt holds clutter indicators.
    Eigen::MatrixXd acc = Eigen::MatrixXd::Constant(nt + 1, ne + 1, kNegInf);
    double total = kNegInf;
    std::vector<int> choice(nt, 0);  // 0 = miss, j = measurement j-1
    std::vector<char> used(ne, 0);

    std::function<void(int, double)> visit = [&](int i, double lw) {
        if (i == nt) {
            for (int j = 0; j < ne; ++j)
                if (!used[j]) lw += w.clutter_w;
            total = log_sum_exp(total, lw);
            for (int t = 0; t < nt; ++t) acc(t, choice[t]) = log_sum_exp(acc(t, choice[t]), lw);
            for (int j = 0; j < ne; ++j)
                if (!used[j]) acc(nt, j + 1) = log_sum_exp(acc(nt, j + 1), lw);
            return;
        }
        choice[i] = 0;
        visit(i + 1, lw + w.miss_w[i]);
        for (int j = 0; j < ne; ++j) {
            if (used[j] || w.lik_w(i, j) == kNegInf) continue;
            used[j] = 1;
            choice[i] = j + 1;
            visit(i + 1, lw + w.detect_w[i] + w.lik_w(i, j));
            used[j] = 0;
        }
        choice[i] = 0;
    };
    visit(0, 0.0);

    AssociationMatrix out = AssociationMatrix::empty(nt, ne);
    out.iterations_used = 0;
    out.converged = true;
    if (total == kNegInf) return out;
    for (int i = 0; i < nt; ++i)
        for (int j = 0; j <= ne; ++j) out.a_hat(i + 1, j) = std::exp(acc(i, j) - total);
    for (int j = 1; j <= ne; ++j) out.a_hat(0, j) = std::exp(acc(nt, j) - total);
    out.a_hat(0, 0) = 0.0;
    return out;
}

struct AssociationDiagnostics {
    double max_row_deviation = 0.0;  // max_i |sum_j a_ij - 1| over targets
    double max_col_deviation = 0.0;  // max_j |sum_i a_ij - 1| over measurements
    int iterations = 0;
    bool converged = true;
};

inline AssociationDiagnostics consistency_check(const AssociationMatrix& a) {
    AssociationDiagnostics d;
    d.iterations = a.iterations_used;
    d.converged = a.converged;
    for (Eigen::Index i = 1; i < a.a_hat.rows(); ++i)
        d.max_row_deviation = std::max(d.max_row_deviation, std::abs(a.a_hat.row(i).sum() - 1.0));
    for (Eigen::Index j = 1; j < a.a_hat.cols(); ++j)
        d.max_col_deviation = std::max(d.max_col_deviation, std::abs(a.a_hat.col(j).sum() - 1.0));
    return d;
}

// ---- Weight construction -----------------------------------------------------

/// Detection probabilities of the visible (e = 1) and invisible (e = 0) states.
struct DetectionModel {
    double pd_visible = 0.9;
    double pd_invisible = 0.1;

    [[nodiscard]] double expected_pd(double p_visible) const {
        return p_visible * pd_visible + (1.0 - p_visible) * pd_invisible;
    }
};

/// Per-model measurement prediction of one track: weight m̂, predicted
/// measurement h(x̂), innovation covariance S and the spread term H P H^T.
struct ModelMeasurementPrediction {
    double weight = 1.0;
    Vec2 y_hat = Vec2::Zero();
    Mat2 S = Mat2::Identity();
    Mat2 spread = Mat2::Zero();
};

/// Association-relevant summary of one track at one scan.
struct TrackAssociationInput {
    double p_visible = 1.0;
    std::vector<ModelMeasurementPrediction> models;
    std::vector<char> admitted;  // per measurement; empty means all admitted
};

/// Expected log-likelihood of measurement y under one track:
/// sum_m m̂ [-1/2 tr{S^-1 (r r^T + H P H^T)} - ln 2pi - 1/2 ln|S|].
template <MeasurementSensor Sensor>
double expected_log_likelihood(const TrackAssociationInput& track, const Vec2& y,
                               const Sensor& sensor) {
    double x = 0.0;
    for (const auto& m : track.models) {
        if (m.weight <= 0.0) continue;
        const Vec2 r = sensor.residual(y, m.y_hat);
        const Mat2 Si = spd_inverse<2>(m.S, "innovation covariance");
        const double quad = (Si * (r * r.transpose() + m.spread)).trace();
        x += m.weight * (-0.5 * quad - std::log(2.0 * std::numbers::pi) -
                         0.5 * std::log(m.S.determinant()));
    }
    return x;
}

template <MeasurementSensor Sensor>
AssociationWeights build_weights(std::span<const TrackAssociationInput> tracks,
                                 std::span<const Measurement> frame, const Sensor& sensor,
                                 const DetectionModel& det, double clutter_log_weight) {
    AssociationWeights w;
    const auto nt = static_cast<Eigen::Index>(tracks.size());
    const auto ne = static_cast<Eigen::Index>(frame.size());
    w.detect_w.resize(tracks.size());
    w.miss_w.resize(tracks.size());
    w.lik_w = Eigen::MatrixXd::Constant(nt, ne, kNegInf);
    w.clutter_w = clutter_log_weight;
    for (Eigen::Index i = 0; i < nt; ++i) {
        const auto& t = tracks[i];
        const double pd = det.expected_pd(t.p_visible);
        w.detect_w[i] = std::log(pd);
        w.miss_w[i] = std::log1p(-pd);
        for (Eigen::Index j = 0; j < ne; ++j) {
            if (!t.admitted.empty() && !t.admitted[j]) continue;
            w.lik_w(i, j) = expected_log_likelihood(t, frame[j].vec(), sensor);
        }
    }
    return w;
}

}  // namespace mpmmtt
