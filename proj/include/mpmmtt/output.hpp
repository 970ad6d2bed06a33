#pragma once

#include "mpmmtt/linalg.hpp"

#include <Eigen/Dense>
#include <vector>

namespace mpmmtt {

/// Reported estimate of one track at one scan.
struct TrackEstimate {
    int scan = 0;
    Vec4 mean = Vec4::Zero();
    Mat4 cov = Mat4::Identity();
    Eigen::VectorXd model_probs;  // m̂ over the model bank
    double p_visible = 0.0;
    /// Association row for this scan: [miss, measurement 0, measurement 1, ...].
    std::vector<double> association;
};

/// Everything reported for one track, ordered by scan.
struct TrackOutput {
    int id = 0;
    std::vector<TrackEstimate> estimates;

    [[nodiscard]] const TrackEstimate* at(int scan) const {
        for (const auto& e : estimates)
            if (e.scan == scan) return &e;
        return nullptr;
    }
};

}  // namespace mpmmtt
