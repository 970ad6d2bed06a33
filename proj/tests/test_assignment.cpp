#include "mpmmtt/assignment.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace mpmmtt;

TEST(Hungarian, HandExample) {
    Eigen::MatrixXd c(3, 3);
    c << 4, 1, 3, 2, 0, 5, 3, 2, 2;
    const Assignment a = hungarian(c);
    EXPECT_EQ(a.cost, 5.0);
    EXPECT_EQ(a.row_to_col, (std::vector<int>{1, 0, 2}));
}

TEST(Hungarian, MatchesExhaustiveSearch) {
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<int> size(1, 6);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    for (int n = 0; n < 300; ++n) {
        const int r = size(rng), c = size(rng);
        Eigen::MatrixXd m(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) m(i, j) = u(rng);
        const Assignment h = hungarian(m), e = exhaustive_assignment(m);
        EXPECT_NEAR(h.cost, e.cost, 1e-9) << r << "x" << c;
        std::set<int> used;
        int assigned = 0;
        for (int col : h.row_to_col) {
            if (col < 0) continue;
            ++assigned;
            EXPECT_TRUE(used.insert(col).second);
        }
        EXPECT_EQ(assigned, std::min(r, c));
    }
}

TEST(Hungarian, TallMatrixLeavesRowsUnassigned) {
    Eigen::MatrixXd c(3, 1);
    c << 5, 1, 3;
    const Assignment a = hungarian(c);
    EXPECT_EQ(a.row_to_col, (std::vector<int>{-1, 0, -1}));
    EXPECT_EQ(a.cost, 1.0);
}

TEST(Hungarian, EmptyAndNonFinite) {
    EXPECT_TRUE(hungarian(Eigen::MatrixXd(0, 3)).row_to_col.empty());
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2, 2);
    c(0, 0) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(hungarian(c), std::invalid_argument);
}
