#include "mpmmtt/models.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace mpmmtt;

TEST(CvModel, MatricesForUnitPeriod) {
    const MotionModel m = cv_model(1.0, 0.01, 0.005);
    Mat4 F;
    F << 1, 1, 0, 0, 0, 1, 0, 0, 0, 0, 1, 1, 0, 0, 0, 1;
    EXPECT_EQ(m.F, F);
    const Vec4 q(0.01, 0.005, 0.01, 0.005);
    EXPECT_EQ(Mat4(m.Q), Mat4(q.asDiagonal()));
}

TEST(CvModel, ZeroNoiseAndLongerPeriod) {
    const MotionModel m = cv_model(2.0, 0.0, 0.0);
    EXPECT_EQ(m.F(0, 1), 2.0);
    EXPECT_EQ(m.F(2, 3), 2.0);
    EXPECT_TRUE(m.Q.isZero());
}

TEST(CvModel, RejectsNonPositivePeriod) {
    EXPECT_THROW(cv_model(0.0, 0.01, 0.005), std::invalid_argument);
    EXPECT_THROW(cv_model(-1.0, 0.01, 0.005), std::invalid_argument);
}

TEST(CtModel, EntriesAtBenchmarkTurnRate) {
    const MotionModel cv = cv_model(1.0, 0.01, 0.005);
    const MotionModel m = ct_model(1.0, 0.087, cv.Q);
    EXPECT_NEAR(m.F(0, 1), std::sin(0.087) / 0.087, 1e-15);
    EXPECT_NEAR(m.F(0, 1), 0.99874, 1e-5);
    EXPECT_NEAR(m.F(1, 1), 0.99622, 1e-5);
    EXPECT_TRUE(m.Q.isApprox(10.0 * cv.Q));
}

TEST(CtModel, RejectsZeroTurnRate) {
    EXPECT_THROW(ct_model(1.0, 0.0, Mat4::Identity()), std::invalid_argument);
}

TEST(CtModel, SmallTurnRateApproachesCv) {
    const MotionModel cv = cv_model(1.0, 0.01, 0.005);
    const MotionModel ct = ct_model(1.0, 1e-8, cv.Q);
    EXPECT_LT((ct.F - cv.F).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(CtModel, FullTurnRestoresVelocityDirection) {
    const double omega = 0.087;
    const double period = 2.0 * std::numbers::pi / omega;
    const MotionModel m = ct_model(period, omega, Mat4::Zero());
    const Vec4 x(0.0, 120.0, 0.0, 0.0);
    const Vec4 y = m.F * x;
    EXPECT_NEAR(y(1), 120.0, 1e-6);
    EXPECT_NEAR(y(3), 0.0, 1e-6);
    EXPECT_NEAR(y(0), 0.0, 1e-6);
    EXPECT_NEAR(y(2), 0.0, 1e-6);
}

TEST(CtModel, NoiseIsSymmetricPsd) {
    for (const auto& m : default_model_bank()) {
        EXPECT_TRUE(is_symmetric<4>(m.Q));
        EXPECT_GE(min_eigenvalue<4>(m.Q), 0.0);
    }
}

TEST(PolarSensor, MeasuresRangeAndAzimuth) {
    const PolarSensor s;
    const Measurement y = measure(Vec4(11400, 0, 10200, 120), s);
    EXPECT_NEAR(y.range, std::hypot(11400.0, 10200.0), 1e-9);
    EXPECT_NEAR(y.range, 15297.06, 0.01);
    EXPECT_NEAR(y.azimuth, std::atan2(10200.0, 11400.0), 1e-12);
    EXPECT_NEAR(y.azimuth, 0.7304, 1e-3);
    EXPECT_EQ(measure(Vec4(7, 0, 0, 0), s).azimuth, 0.0);
    EXPECT_DOUBLE_EQ(measure(Vec4(3, 0, 4, 0), s).range, 5.0);
}

TEST(PolarSensor, RejectsZeroRange) {
    const PolarSensor s;
    EXPECT_THROW(measure(Vec4::Zero(), s), std::domain_error);
    EXPECT_THROW(measure_jacobian(Vec4::Zero(), s), std::domain_error);
}

TEST(PolarSensor, InversePolarRoundTrip) {
    const PolarSensor s;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> r(13000, 19000), a(0.7, 1.0);
    for (int n = 0; n < 100; ++n) {
        const Vec2 y(r(rng), a(rng));
        const Vec2 p = s.to_cartesian(y);
        const Vec2 back = s.predict(Vec4(p(0), 0, p(1), 0));
        EXPECT_NEAR(back(0), y(0), 1e-9 * y(0));
        EXPECT_NEAR(back(1), y(1), 1e-9 * y(1));
    }
}

TEST(PolarSensor, JacobianAxisAlignedCase) {
    const PolarSensor s;
    const Mat24 H = measure_jacobian(Vec4(500, 3, 0, -2), s);
    EXPECT_DOUBLE_EQ(H(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(H(1, 2), 1.0 / 500.0);
    EXPECT_EQ(H.col(1), Vec2::Zero());
    EXPECT_EQ(H.col(3), Vec2::Zero());
}

TEST(PolarSensor, JacobianMatchesCentralDifferences) {
    const PolarSensor s;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> r(13000, 19000), a(0.7, 1.0), v(-200, 200);
    double worst = 0.0;
    for (int n = 0; n < 100; ++n) {
        const double rr = r(rng), aa = a(rng);
        const Vec4 x(rr * std::cos(aa), v(rng), rr * std::sin(aa), v(rng));
        const Mat24 H = s.jacobian(x);
        for (int c : {0, 2}) {
            const double h = 1e-3;
            Vec4 xp = x, xm = x;
            xp(c) += h;
            xm(c) -= h;
            const Vec2 fd = s.residual(s.predict(xp), s.predict(xm)) / (2 * h);
            for (int r2 = 0; r2 < 2; ++r2)
                worst = std::max(worst, std::abs(fd(r2) - H(r2, c)) / std::abs(H(r2, c)));
        }
        EXPECT_EQ(H.col(1), Vec2::Zero());
        EXPECT_EQ(H.col(3), Vec2::Zero());
    }
    EXPECT_LT(worst, 1e-5);
}

TEST(PolarSensor, ResidualWrapsAzimuth) {
    const PolarSensor s;
    const Vec2 r = s.residual(Vec2(10, std::numbers::pi - 0.01), Vec2(10, -std::numbers::pi + 0.01));
    EXPECT_NEAR(r(1), -0.02, 1e-12);
}
