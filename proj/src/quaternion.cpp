#include "telearm/quaternion.hpp"

#include <limits>
#include <sstream>
#include <stdexcept>

namespace telearm {

std::string Quaternion::to_string() const {
    std::ostringstream os;
    os.precision(10);
    os << w << " + " << x << "i + " << y << "j + " << z << "k";
    return os.str();
}

Quaternion normalize(const Quaternion& q) {
    const double n = q.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw std::domain_error("normalize: zero or non-finite quaternion");
    if (std::abs(n - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon()) return q;
    return q * (1.0 / n);
}

PureQuaternion::PureQuaternion(const Quaternion& q) : q_(0.0, q.x, q.y, q.z) {
    if (std::abs(q.w) > 1e-9) throw std::invalid_argument("PureQuaternion: non-zero real part");
}

UnitQuaternion::UnitQuaternion(const Quaternion& q) {
    const double n = q.norm();
    if (!std::isfinite(n) || std::abs(n - 1.0) > kRenormalizeWindow) {
        throw std::invalid_argument("UnitQuaternion: norm " + std::to_string(n) + " is not close to 1");
    }
    q_ = normalize(q);
}

UnitQuaternion from_axis_angle(const PureQuaternion& axis, double angle) {
    if (std::abs(axis.norm() - 1.0) > UnitQuaternion::kTolerance) {
        throw std::invalid_argument("from_axis_angle: axis is not a unit vector");
    }
    const double c = std::cos(0.5 * angle);
    const double s = std::sin(0.5 * angle);
    return UnitQuaternion(Quaternion(c, s * axis.x(), s * axis.y(), s * axis.z()));
}

PureQuaternion rotate(const UnitQuaternion& r, const PureQuaternion& p) {
    const Quaternion out = r.quat() * p.quat() * r.quat().conj();
    return {out.x, out.y, out.z};
}

Mat hamilton_left(const Quaternion& q) {
    return Mat(4, 4,
               {q.w, -q.x, -q.y, -q.z,
                q.x,  q.w, -q.z,  q.y,
                q.y,  q.z,  q.w, -q.x,
                q.z, -q.y,  q.x,  q.w});
}

Mat hamilton_right(const Quaternion& q) {
    return Mat(4, 4,
               {q.w, -q.x, -q.y, -q.z,
                q.x,  q.w,  q.z, -q.y,
                q.y, -q.z,  q.w,  q.x,
                q.z,  q.y, -q.x,  q.w});
}

}  // namespace telearm
