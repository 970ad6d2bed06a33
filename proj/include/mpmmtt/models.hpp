#pragma once

#include "mpmmtt/linalg.hpp"

#include <cmath>
#include <concepts>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpmmtt {

/// Kinematic state ordered [x, vx, y, vy] (meters, m/s).
using KinematicState = Vec4;

enum class MotionKind { constant_velocity, coordinated_turn };

inline std::string to_string(MotionKind k) {
    return k == MotionKind::constant_velocity ? "CV" : "CT";
}

inline MotionKind motion_kind_from_string(const std::string& s) {
    if (s == "CV") return MotionKind::constant_velocity;
    if (s == "CT") return MotionKind::coordinated_turn;
    throw std::invalid_argument("unknown motion model '" + s + "' (expected CV or CT)");
}

/// One member of the model bank: x_k = F x_{k-1} + w, w ~ N(0, Q).
struct MotionModel {
    int id = 0;
    MotionKind kind = MotionKind::constant_velocity;
    Mat4 F = Mat4::Identity();
    Mat4 Q = Mat4::Zero();
};

/// Range/azimuth measurement (meters, radians).
struct Measurement {
    double range = 0.0;
    double azimuth = 0.0;

    [[nodiscard]] Vec2 vec() const { return {range, azimuth}; }
    static Measurement from_vec(const Vec2& v) { return {v(0), v(1)}; }
};

/// Constant-velocity model: F = I2 (x) [[1,T],[0,1]], Q = I2 (x) diag(q_pos, q_vel).
inline MotionModel cv_model(double T, double q_pos, double q_vel, int id = 0) {
    if (!(T > 0.0)) throw std::invalid_argument("cv_model: sampling period must be positive");
    if (q_pos < 0.0 || q_vel < 0.0) throw std::invalid_argument("cv_model: negative noise intensity");
    MotionModel m;
    m.id = id;
    m.kind = MotionKind::constant_velocity;
    m.F.setIdentity();
    m.F(0, 1) = T;
    m.F(2, 3) = T;
    m.Q.setZero();
    m.Q.diagonal() << q_pos, q_vel, q_pos, q_vel;
    return m;
}

/// Coordinated-turn model with known turn rate omega (rad/s, counter-clockwise
/// positive) and process noise Q = 10 * Q_cv.
inline MotionModel ct_model(double T, double omega, const Mat4& Q_cv, int id = 1) {
    if (!(T > 0.0)) throw std::invalid_argument("ct_model: sampling period must be positive");
    if (omega == 0.0) throw std::invalid_argument("ct_model: zero turn rate, use cv_model");
    const double th = omega * T;
    const double s = std::sin(th);
    const double c = std::cos(th);
    MotionModel m;
    m.id = id;
    m.kind = MotionKind::coordinated_turn;
    // clang-format off
    m.F << 1.0, s / omega,         0.0, (c - 1.0) / omega,
           0.0, c,                 0.0, -s,
           0.0, (1.0 - c) / omega, 1.0, s / omega,
           0.0, s,                 0.0, c;
    // clang-format on
    m.Q = 10.0 * Q_cv;
    return m;
}

/// Anything that maps a kinematic state into a 2-vector measurement space.
/// `residual(a, b)` returns a - b with any angular component wrapped.
template <typename S>
concept MeasurementSensor = requires(const S& s, const Vec4& x, const Vec2& a, const Vec2& b) {
    { s.predict(x) } -> std::convertible_to<Vec2>;
    { s.jacobian(x) } -> std::convertible_to<Mat24>;
    { s.residual(a, b) } -> std::convertible_to<Vec2>;
    { s.noise() } -> std::convertible_to<Mat2>;
};

/// Single polar sensor measuring range and azimuth atan2(dy, dx).
struct PolarSensor {
    Vec2 origin = Vec2::Zero();
    Mat2 R = (Mat2() << 400.0, 0.0, 0.0, 1e-6).finished();

    [[nodiscard]] Vec2 predict(const Vec4& x) const {
        const double dx = x(0) - origin(0);
        const double dy = x(2) - origin(1);
        const double r = std::hypot(dx, dy);
        if (r <= 0.0) throw std::domain_error("PolarSensor: state coincides with sensor origin");
        return {r, std::atan2(dy, dx)};
    }

    [[nodiscard]] Mat24 jacobian(const Vec4& x) const {
        const double dx = x(0) - origin(0);
        const double dy = x(2) - origin(1);
        const double r2 = dx * dx + dy * dy;
        if (r2 <= 0.0) throw std::domain_error("PolarSensor: zero range in Jacobian");
        const double r = std::sqrt(r2);
        Mat24 H = Mat24::Zero();
        H(0, 0) = dx / r;
        H(0, 2) = dy / r;
        H(1, 0) = -dy / r2;
        H(1, 2) = dx / r2;
        return H;
    }

    [[nodiscard]] Vec2 residual(const Vec2& a, const Vec2& b) const {
        return {a(0) - b(0), wrap_angle(a(1) - b(1))};
    }

    [[nodiscard]] Mat2 noise() const { return R; }

    /// Inverse of the noise-free measurement: Cartesian position of a polar point.
    [[nodiscard]] Vec2 to_cartesian(const Vec2& y) const {
        return origin + Vec2(y(0) * std::cos(y(1)), y(0) * std::sin(y(1)));
    }
};

/// Linear sensor y = C x + v. Used as the linear surrogate of the polar sensor
/// when comparing filters against closed-form Kalman results.
struct LinearSensor {
    Mat24 C = (Mat24() << 1, 0, 0, 0, 0, 0, 1, 0).finished();
    Mat2 R = Mat2::Identity();

    [[nodiscard]] Vec2 predict(const Vec4& x) const { return C * x; }
    [[nodiscard]] Mat24 jacobian(const Vec4&) const { return C; }
    [[nodiscard]] Vec2 residual(const Vec2& a, const Vec2& b) const { return a - b; }
    [[nodiscard]] Mat2 noise() const { return R; }
};

inline Measurement measure(const KinematicState& x, const PolarSensor& sensor) {
    return Measurement::from_vec(sensor.predict(x));
}

inline Mat24 measure_jacobian(const KinematicState& x, const PolarSensor& sensor) {
    return sensor.jacobian(x);
}

/// The two-model bank used throughout: CV (id 0) and CT (id 1).
inline std::vector<MotionModel> default_model_bank(double T = 1.0, double omega = 0.087,
                                                   double q_pos = 0.01, double q_vel = 0.005) {
    auto cv = cv_model(T, q_pos, q_vel, 0);
    auto ct = ct_model(T, omega, cv.Q, 1);
    return {cv, ct};
}

}  // namespace mpmmtt
