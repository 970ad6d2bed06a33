#pragma once

#include "mpmmtt/assignment.hpp"
#include "mpmmtt/linalg.hpp"
#include "mpmmtt/output.hpp"
#include "mpmmtt/simulator.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace mpmmtt {

// ---- OSPA --------------------------------------------------------------------

/// OSPA distance between two finite sets of 2-D points with order p and
/// cutoff c. The optimal assignment is found exhaustively when both sets have
/// at most six points and with the Hungarian algorithm otherwise.
inline double ospa(std::span<const Vec2> est, std::span<const Vec2> truth, double p = 2.0,
                   double c = 100.0) {
    if (!(p >= 1.0) || !(c > 0.0)) throw std::invalid_argument("ospa: need p >= 1 and c > 0");
    const std::size_t m = est.size();
    const std::size_t n = truth.size();
    if (m == 0 && n == 0) return 0.0;
    if (m == 0 || n == 0) return c;
    Eigen::MatrixXd cost(m, n);
    const double cp = std::pow(c, p);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            cost(i, j) = std::min(std::pow((est[i] - truth[j]).norm(), p), cp);
    const Assignment a = std::max(m, n) <= 6 ? exhaustive_assignment(cost) : hungarian(cost);
    // Sum matched costs in sorted order so that ospa(x, y) == ospa(y, x) exactly.
    std::vector<double> matched;
    for (std::size_t i = 0; i < m; ++i)
        if (a.row_to_col[i] >= 0) matched.push_back(cost(i, a.row_to_col[i]));
    std::sort(matched.begin(), matched.end());
    double total = 0.0;
    for (double v : matched) total += v;
    const double big = static_cast<double>(std::max(m, n));
    const double missing = static_cast<double>(std::max(m, n) - std::min(m, n));
    return std::pow((total + cp * missing) / big, 1.0 / p);
}

inline Vec2 position_of(const Vec4& x) { return {x(0), x(2)}; }
inline Vec2 velocity_of(const Vec4& x) { return {x(1), x(3)}; }

// ---- Track-to-truth assignment ----------------------------------------------------

struct TrackToTruthAssignment {
    std::vector<int> target_of;          // per track: target index, or -1 for a false track
    std::vector<double> mean_error;      // per track: mean position error to its best target
    int valid_tracks = 0;                // NVT
    int false_tracks = 0;                // NFT
    int breakages = 0;                   // NTB
    double track_probability_of_detection = 0.0;  // TPD, mean over valid pairs
};

/// Assigns every track to the target with the smallest mean position error
/// over their common scans, provided that error is within `gate`. Tracks that
/// claim the same target at overlapping scans keep only the closest one; the
/// others count as false tracks.
inline TrackToTruthAssignment assign_tracks(std::span<const TrackOutput> tracks,
                                            const GroundTruth& truth, double gate = 100.0) {
    TrackToTruthAssignment out;
    const std::size_t nt = tracks.size();
    out.target_of.assign(nt, -1);
    out.mean_error.assign(nt, std::numeric_limits<double>::infinity());
    for (std::size_t t = 0; t < nt; ++t) {
        for (int g = 0; g < truth.targets(); ++g) {
            double sum = 0.0;
            int count = 0;
            for (const auto& e : tracks[t].estimates) {
                if (!truth.alive(g, e.scan)) continue;
                sum += (position_of(e.mean) - position_of(truth.state(g, e.scan))).norm();
                ++count;
            }
            if (count == 0) continue;
            const double err = sum / count;
            if (err <= gate && err < out.mean_error[t]) {
                out.mean_error[t] = err;
                out.target_of[t] = g;
            }
        }
    }
    // Resolve temporally overlapping claims on the same target.
    std::vector<std::size_t> order(nt);
    for (std::size_t t = 0; t < nt; ++t) order[t] = t;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return out.mean_error[a] < out.mean_error[b];
    });
    std::vector<std::vector<char>> covered(truth.targets(), std::vector<char>(truth.num_scans + 1, 0));
    for (std::size_t t : order) {
        const int g = out.target_of[t];
        if (g < 0) continue;
        bool overlap = false;
        for (const auto& e : tracks[t].estimates)
            if (truth.alive(g, e.scan) && covered[g][e.scan]) overlap = true;
        if (overlap) {
            out.target_of[t] = -1;
            continue;
        }
        for (const auto& e : tracks[t].estimates)
            if (truth.alive(g, e.scan)) covered[g][e.scan] = 1;
    }

    std::vector<int> per_target(truth.targets(), 0);
    double tpd_sum = 0.0;
    for (std::size_t t = 0; t < nt; ++t) {
        const int g = out.target_of[t];
        if (g < 0) {
            ++out.false_tracks;
            continue;
        }
        ++out.valid_tracks;
        ++per_target[g];
        int lifetime = 0;
        for (int k = 1; k <= truth.num_scans; ++k) lifetime += truth.alive(g, k) ? 1 : 0;
        int length = 0;
        for (const auto& e : tracks[t].estimates) length += truth.alive(g, e.scan) ? 1 : 0;
        tpd_sum += lifetime > 0 ? static_cast<double>(length) / lifetime : 0.0;
    }
    for (int n : per_target) out.breakages += std::max(0, n - 1);
    out.track_probability_of_detection = out.valid_tracks > 0 ? tpd_sum / out.valid_tracks : 0.0;
    return out;
}

// ---- Error rates ------------------------------------------------------------------

/// Mode-model association error rate: mean of 1 - m̂(true model) pooled over
/// (valid track, scan) pairs where the assigned target exists.
inline double maer(std::span<const TrackOutput> tracks, const TrackToTruthAssignment& assignment,
                   const GroundTruth& truth) {
    double sum = 0.0;
    long count = 0;
    for (std::size_t t = 0; t < tracks.size(); ++t) {
        const int g = assignment.target_of[t];
        if (g < 0) continue;
        for (const auto& e : tracks[t].estimates) {
            if (!truth.alive(g, e.scan) || e.model_probs.size() == 0) continue;
            sum += 1.0 - e.model_probs(truth.model(g, e.scan));
            ++count;
        }
    }
    return count > 0 ? sum / count : 0.0;
}

/// Data association error rate: mean of 1 - â(i, j*) where j* is the
/// measurement the assigned target actually generated (the miss entry when it
/// was not detected), pooled over (valid track, scan) pairs.
inline double daer(std::span<const TrackOutput> tracks, const TrackToTruthAssignment& assignment,
                   std::span<const MeasurementFrame> frames) {
    double sum = 0.0;
    long count = 0;
    for (std::size_t t = 0; t < tracks.size(); ++t) {
        const int g = assignment.target_of[t];
        if (g < 0) continue;
        for (const auto& e : tracks[t].estimates) {
            if (e.association.empty() || e.scan < 1 ||
                e.scan > static_cast<int>(frames.size()))
                continue;
            const MeasurementFrame& f = frames[e.scan - 1];
            if (e.association.size() != f.measurements.size() + 1) continue;
            const int j = f.measurement_of(g);
            sum += 1.0 - e.association[j + 1];
            ++count;
        }
    }
    return count > 0 ? sum / count : 0.0;
}

// ---- Report ------------------------------------------------------------------------

struct ScanMetrics {
    int scan = 0;
    double ospa = 0.0;
    double maer = 0.0;
    double daer = 0.0;
    int n_est = 0;
    int n_true = 0;
};

struct MetricReport {
    int nvt = 0;
    double tpd = 0.0;
    int nft = 0;
    int ntb = 0;
    double maer = 0.0;
    double daer = 0.0;
    double aee_p = 0.0;
    double aee_v = 0.0;
    double mospa = 0.0;
    double tet_s = 0.0;
    std::vector<ScanMetrics> series;
};

struct MetricOptions {
    double ospa_p = 2.0;
    double ospa_c = 100.0;
    double gate = 100.0;
};

inline MetricReport evaluate(std::span<const TrackOutput> tracks, const GroundTruth& truth,
                             std::span<const MeasurementFrame> frames,
                             const MetricOptions& opt = {}) {
    MetricReport r;
    const TrackToTruthAssignment a = assign_tracks(tracks, truth, opt.gate);
    r.nvt = a.valid_tracks;
    r.nft = a.false_tracks;
    r.ntb = a.breakages;
    r.tpd = a.track_probability_of_detection;
    r.maer = maer(tracks, a, truth);
    r.daer = daer(tracks, a, frames);

    double ep = 0.0, ev = 0.0;
    long ne = 0;
    for (std::size_t t = 0; t < tracks.size(); ++t) {
        const int g = a.target_of[t];
        if (g < 0) continue;
        for (const auto& e : tracks[t].estimates) {
            if (!truth.alive(g, e.scan)) continue;
            ep += (position_of(e.mean) - position_of(truth.state(g, e.scan))).norm();
            ev += (velocity_of(e.mean) - velocity_of(truth.state(g, e.scan))).norm();
            ++ne;
        }
    }
    r.aee_p = ne > 0 ? ep / ne : 0.0;
    r.aee_v = ne > 0 ? ev / ne : 0.0;

    double ospa_sum = 0.0;
    for (int k = 1; k <= truth.num_scans; ++k) {
        ScanMetrics s;
        s.scan = k;
        std::vector<Vec2> est, tru;
        double m_sum = 0.0, d_sum = 0.0;
        int m_n = 0, d_n = 0;
        for (std::size_t t = 0; t < tracks.size(); ++t) {
            const TrackEstimate* e = tracks[t].at(k);
            if (!e) continue;
            est.push_back(position_of(e->mean));
            const int g = a.target_of[t];
            if (g < 0 || !truth.alive(g, k)) continue;
            if (e->model_probs.size() > 0) {
                m_sum += 1.0 - e->model_probs(truth.model(g, k));
                ++m_n;
            }
            const MeasurementFrame& f = frames[k - 1];
            if (e->association.size() == f.measurements.size() + 1) {
                d_sum += 1.0 - e->association[f.measurement_of(g) + 1];
                ++d_n;
            }
        }
        for (int g = 0; g < truth.targets(); ++g)
            if (truth.alive(g, k)) tru.push_back(position_of(truth.state(g, k)));
        s.ospa = ospa(est, tru, opt.ospa_p, opt.ospa_c);
        s.maer = m_n > 0 ? m_sum / m_n : 0.0;
        s.daer = d_n > 0 ? d_sum / d_n : 0.0;
        s.n_est = static_cast<int>(est.size());
        s.n_true = static_cast<int>(tru.size());
        ospa_sum += s.ospa;
        r.series.push_back(s);
    }
    r.mospa = truth.num_scans > 0 ? ospa_sum / truth.num_scans : 0.0;
    return r;
}

}  // namespace mpmmtt
