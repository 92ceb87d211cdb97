#pragma once

#include <array>
#include <cmath>
#include <string>

#include "telearm/mat.hpp"

namespace telearm {

/// Real quaternion w + x·î + y·ĵ + z·k̂. Coefficients are stored scalar-first
/// everywhere, matching vec4 ordering.
struct Quaternion {
    double w = 0.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Quaternion() = default;
    constexpr Quaternion(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}
    constexpr explicit Quaternion(double scalar) : w(scalar) {}

    static constexpr Quaternion i() { return {0.0, 1.0, 0.0, 0.0}; }
    static constexpr Quaternion j() { return {0.0, 0.0, 1.0, 0.0}; }
    static constexpr Quaternion k() { return {0.0, 0.0, 0.0, 1.0}; }

    constexpr Quaternion conj() const { return {w, -x, -y, -z}; }
    constexpr double squared_norm() const { return w * w + x * x + y * y + z * z; }
    double norm() const { return std::sqrt(squared_norm()); }

    constexpr std::array<double, 4> vec4() const { return {w, x, y, z}; }
    static constexpr Quaternion from_vec4(const std::array<double, 4>& v) { return {v[0], v[1], v[2], v[3]}; }

    constexpr Quaternion& operator+=(const Quaternion& o) {
        w += o.w; x += o.x; y += o.y; z += o.z;
        return *this;
    }
    constexpr Quaternion& operator-=(const Quaternion& o) {
        w -= o.w; x -= o.x; y -= o.y; z -= o.z;
        return *this;
    }
    constexpr Quaternion& operator*=(double s) {
        w *= s; x *= s; y *= s; z *= s;
        return *this;
    }

    friend constexpr Quaternion operator+(Quaternion a, const Quaternion& b) { return a += b; }
    friend constexpr Quaternion operator-(Quaternion a, const Quaternion& b) { return a -= b; }
    friend constexpr Quaternion operator-(const Quaternion& a) { return {-a.w, -a.x, -a.y, -a.z}; }
    friend constexpr Quaternion operator*(Quaternion a, double s) { return a *= s; }
    friend constexpr Quaternion operator*(double s, Quaternion a) { return a *= s; }

    /// Hamilton product.
    friend constexpr Quaternion operator*(const Quaternion& a, const Quaternion& b) {
        return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
                a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
                a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
                a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
    }

    friend constexpr bool operator==(const Quaternion&, const Quaternion&) = default;

    std::string to_string() const;
};

constexpr Quaternion mul(const Quaternion& a, const Quaternion& b) { return a * b; }
constexpr Quaternion conj(const Quaternion& q) { return q.conj(); }
constexpr std::array<double, 4> vec4(const Quaternion& q) { return q.vec4(); }

/// Returns q/‖q‖. Quaternions already unit to within a few ulps are returned
/// untouched, which makes the operation exactly idempotent.
Quaternion normalize(const Quaternion& q);

/// Quaternion with zero real part; the 3-vector (x, y, z).
class PureQuaternion {
public:
    constexpr PureQuaternion() = default;
    constexpr PureQuaternion(double x, double y, double z) : q_(0.0, x, y, z) {}
    /// Throws std::invalid_argument when |Re(q)| > 1e-9.
    explicit PureQuaternion(const Quaternion& q);

    constexpr double x() const { return q_.x; }
    constexpr double y() const { return q_.y; }
    constexpr double z() const { return q_.z; }
    constexpr const Quaternion& quat() const { return q_; }
    constexpr operator const Quaternion&() const { return q_; }  // NOLINT(google-explicit-constructor)
    std::array<double, 3> vec3() const { return {q_.x, q_.y, q_.z}; }
    double norm() const { return q_.norm(); }

    friend constexpr bool operator==(const PureQuaternion&, const PureQuaternion&) = default;

private:
    Quaternion q_;
};

/// Quaternion of unit norm (|‖q‖ − 1| ≤ 1e-9).
class UnitQuaternion {
public:
    static constexpr double kTolerance = 1e-9;
    static constexpr double kRenormalizeWindow = 1e-6;

    constexpr UnitQuaternion() : q_(1.0) {}
    /// Accepts q when its norm is within 1e-6 of one and renormalizes it;
    /// anything further away throws std::invalid_argument.
    explicit UnitQuaternion(const Quaternion& q);

    constexpr double w() const { return q_.w; }
    constexpr double x() const { return q_.x; }
    constexpr double y() const { return q_.y; }
    constexpr double z() const { return q_.z; }
    constexpr const Quaternion& quat() const { return q_; }
    constexpr operator const Quaternion&() const { return q_; }  // NOLINT(google-explicit-constructor)

    UnitQuaternion conj() const { return UnitQuaternion(q_.conj(), Trusted{}); }
    UnitQuaternion operator-() const { return UnitQuaternion(-q_, Trusted{}); }
    friend UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b) {
        return UnitQuaternion(normalize(a.q_ * b.q_), Trusted{});
    }
    friend constexpr bool operator==(const UnitQuaternion&, const UnitQuaternion&) = default;

private:
    struct Trusted {};
    constexpr UnitQuaternion(const Quaternion& q, Trusted) : q_(q) {}
    Quaternion q_;
};

/// cos(φ/2) + v·sin(φ/2). Throws std::invalid_argument unless ‖v‖ = 1 ± 1e-9.
UnitQuaternion from_axis_angle(const PureQuaternion& axis, double angle);

/// Rotates the 3-vector p by r: r·p·r*.
PureQuaternion rotate(const UnitQuaternion& r, const PureQuaternion& p);

/// 4x4 matrices with vec4(a·b) = hamilton_left(a)·vec4(b) = hamilton_right(b)·vec4(a).
Mat hamilton_left(const Quaternion& q);
Mat hamilton_right(const Quaternion& q);

}  // namespace telearm
