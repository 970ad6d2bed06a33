#pragma once

#include "mpmmtt/linalg.hpp"
#include "mpmmtt/log.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace mpmmtt {

/// Probability vector over a finite alphabet.
using DiscreteBelief = Eigen::VectorXd;

/// First-order Markov chain: `prior` is the distribution at the first step
/// of a sequence, `transition(a, b) = Pr(next = b | current = a)`.
struct MarkovChain {
    Eigen::VectorXd prior;
    Eigen::MatrixXd transition;

    [[nodiscard]] int states() const { return static_cast<int>(prior.size()); }

    void validate() const {
        if (prior.size() == 0 || transition.rows() != prior.size() ||
            transition.cols() != prior.size())
            throw std::invalid_argument("MarkovChain: inconsistent dimensions");
        if ((prior.array() < 0.0).any() || std::abs(prior.sum() - 1.0) > 1e-12)
            throw std::invalid_argument("MarkovChain: prior is not a probability vector");
        for (Eigen::Index r = 0; r < transition.rows(); ++r)
            if ((transition.row(r).array() < 0.0).any() ||
                std::abs(transition.row(r).sum() - 1.0) > 1e-12)
                throw std::invalid_argument("MarkovChain: transition row is not stochastic");
    }

    /// Same chain started from `T^T * belief` (one prediction step).
    [[nodiscard]] MarkovChain started_after(const DiscreteBelief& belief) const {
        MarkovChain c = *this;
        c.prior = transition.transpose() * belief;
        c.prior /= c.prior.sum();
        return c;
    }
};

/// Per-time emission log-weights, one vector per step.
using EmissionSequence = std::vector<Eigen::VectorXd>;

struct ForwardBackwardResult {
    std::vector<DiscreteBelief> posterior;  // smoothed marginals
    std::vector<DiscreteBelief> filtered;   // normalized forward messages
    std::vector<double> log_normalizer;     // per-step log scale factors
    [[nodiscard]] double log_likelihood() const {
        double s = 0.0;
        for (double c : log_normalizer) s += c;
        return s;
    }
};

namespace detail {

/// exp(log_w - max), substituting a uniform emission when every entry is -inf.
inline Eigen::VectorXd scaled_emission(const Eigen::VectorXd& log_w, double& shift) {
    shift = log_w.maxCoeff();
    if (!std::isfinite(shift)) {
        log_warning("HMM emission is zero for every state; substituting a uniform emission");
        shift = 0.0;
        return Eigen::VectorXd::Ones(log_w.size());
    }
    return (log_w.array() - shift).exp().matrix();
}

}  // namespace detail

/// Single forward-algorithm step: predict with the chain, weight by the
/// emission (log domain), normalize.
inline DiscreteBelief forward_step(const DiscreteBelief& prev, const MarkovChain& chain,
                                   const Eigen::VectorXd& log_emission) {
    if (log_emission.size() != chain.states() || prev.size() != chain.states())
        throw std::invalid_argument("forward_step: dimension mismatch");
    double shift = 0.0;
    const Eigen::VectorXd e = detail::scaled_emission(log_emission, shift);
    DiscreteBelief b = (chain.transition.transpose() * prev).cwiseProduct(e);
    const double z = b.sum();
    if (!(z > 0.0)) {
        log_warning("forward_step: emission incompatible with prediction; keeping prediction");
        b = chain.transition.transpose() * prev;
        return b / b.sum();
    }
    return b / z;
}

/// Scaled forward-backward smoothing of a discrete chain under log-domain
/// emissions.
inline ForwardBackwardResult forward_backward(const MarkovChain& chain,
                                              const EmissionSequence& log_emissions) {
    const std::size_t K = log_emissions.size();
    if (K == 0) throw std::invalid_argument("forward_backward: empty sequence");
    const int n = chain.states();
    const Eigen::MatrixXd& T = chain.transition;

    ForwardBackwardResult out;
    out.filtered.resize(K);
    out.posterior.resize(K);
    out.log_normalizer.resize(K);
    std::vector<Eigen::VectorXd> e(K);
    for (std::size_t k = 0; k < K; ++k) {
        if (log_emissions[k].size() != n)
            throw std::invalid_argument("forward_backward: emission dimension mismatch");
        double shift = 0.0;
        e[k] = detail::scaled_emission(log_emissions[k], shift);
        Eigen::VectorXd a = (k == 0 ? chain.prior : Eigen::VectorXd(T.transpose() * out.filtered[k - 1]))
                                .cwiseProduct(e[k]);
        double z = a.sum();
        if (!(z > 0.0)) {
            log_warning("forward_backward: emission incompatible with prior; using uniform emission");
            e[k].setOnes();
            a = (k == 0 ? chain.prior : Eigen::VectorXd(T.transpose() * out.filtered[k - 1]));
            z = a.sum();
            shift = 0.0;
        }
        out.filtered[k] = a / z;
        out.log_normalizer[k] = std::log(z) + shift;
    }
    Eigen::VectorXd beta = Eigen::VectorXd::Ones(n);
    out.posterior[K - 1] = out.filtered[K - 1];
    for (std::size_t k = K - 1; k > 0; --k) {
        beta = T * e[k].cwiseProduct(beta);
        beta /= beta.sum();
        Eigen::VectorXd p = out.filtered[k - 1].cwiseProduct(beta);
        out.posterior[k - 1] = p / p.sum();
    }
    return out;
}

}  // namespace mpmmtt
