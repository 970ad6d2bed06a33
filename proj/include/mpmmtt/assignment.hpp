#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace mpmmtt {

/// Minimum-cost assignment of rows to columns. `row_to_col[r]` is the column
/// given to row r, or -1 when the matrix has more rows than columns and r is
/// left unassigned.
struct Assignment {
    std::vector<int> row_to_col;
    double cost = 0.0;
};

/// Hungarian algorithm (shortest augmenting path with potentials), O(n^2 m).
/// Entries must be finite.
inline Assignment hungarian(const Eigen::MatrixXd& cost) {
    const bool transposed = cost.rows() > cost.cols();
    const Eigen::MatrixXd a = transposed ? Eigen::MatrixXd(cost.transpose()) : cost;
    const int n = static_cast<int>(a.rows());
    const int m = static_cast<int>(a.cols());
    if (!a.allFinite()) throw std::invalid_argument("hungarian: non-finite cost");
    Assignment out;
    out.row_to_col.assign(cost.rows(), -1);
    if (n == 0) return out;

    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    for (int j = 1; j <= m; ++j) {
        if (p[j] == 0) continue;
        const int r = p[j] - 1;
        const int c = j - 1;
        if (transposed)
            out.row_to_col[c] = r;
        else
            out.row_to_col[r] = c;
        out.cost += a(r, c);
    }
    return out;
}

/// Exhaustive search over all injective maps of the smaller side into the
/// larger one. Intended for small problems and as a reference for `hungarian`.
inline Assignment exhaustive_assignment(const Eigen::MatrixXd& cost) {
    const bool transposed = cost.rows() > cost.cols();
    const Eigen::MatrixXd a = transposed ? Eigen::MatrixXd(cost.transpose()) : cost;
    const int n = static_cast<int>(a.rows());
    const int m = static_cast<int>(a.cols());
    if (m > 10) throw std::invalid_argument("exhaustive_assignment: problem too large");
    Assignment out;
    out.row_to_col.assign(cost.rows(), -1);
    if (n == 0) return out;

    std::vector<int> cols(m);
    std::iota(cols.begin(), cols.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> best_cols;
    // Permutations of all columns; the first n entries define the map. Each
    // distinct prefix is visited (m-n)! times, which is fine at this size.
    do {
        double c = 0.0;
        for (int i = 0; i < n; ++i) c += a(i, cols[i]);
        if (c < best) {
            best = c;
            best_cols.assign(cols.begin(), cols.begin() + n);
        }
    } while (std::next_permutation(cols.begin(), cols.end()));
    for (int i = 0; i < n; ++i) {
        if (transposed)
            out.row_to_col[best_cols[i]] = i;
        else
            out.row_to_col[i] = best_cols[i];
    }
    out.cost = best;
    return out;
}

}  // namespace mpmmtt
