#include <doctest.h>

#include <numbers>
#include <random>
#include <stdexcept>

#include "support/oracles.hpp"
#include "telearm/quaternion.hpp"

using telearm::Mat;
using telearm::PureQuaternion;
using telearm::Quaternion;
using telearm::UnitQuaternion;

namespace {

Quaternion random_quaternion(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    return {u(rng), u(rng), u(rng), u(rng)};
}

double max_abs_diff(const Quaternion& a, const Quaternion& b) {
    return std::max({std::abs(a.w - b.w), std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(a.z - b.z)});
}

}  // namespace

TEST_CASE("basis products") {
    CHECK(Quaternion::i() * Quaternion::j() == Quaternion::k());
    CHECK(Quaternion::j() * Quaternion::k() == Quaternion::i());
    CHECK(Quaternion::k() * Quaternion::i() == Quaternion::j());
    CHECK(Quaternion::i() * Quaternion::i() == Quaternion(-1.0));
    CHECK(Quaternion::i() * Quaternion::j() * Quaternion::k() == Quaternion(-1.0));
}

TEST_CASE("product matches 16-term expansion, is associative and norm multiplicative") {
    std::mt19937_64 rng(7);
    for (int n = 0; n < 100; ++n) {
        const Quaternion a = random_quaternion(rng), b = random_quaternion(rng), c = random_quaternion(rng);
        const auto expected = oracle::quat_product(a.vec4(), b.vec4());
        CHECK(max_abs_diff(a * b, Quaternion::from_vec4(expected)) < 1e-14);
        CHECK(max_abs_diff((a * b) * c, a * (b * c)) < 1e-12);
        CHECK(std::abs((a * b).norm() - a.norm() * b.norm()) < 1e-12);
        CHECK(max_abs_diff(a * Quaternion(1.0), a) == 0.0);
    }
}

TEST_CASE("conjugate") {
    CHECK(conj(Quaternion(1.0)) == Quaternion(1.0));
    const double phi = 0.7;
    const PureQuaternion v(0.0, 0.6, 0.8);
    const UnitQuaternion r = telearm::from_axis_angle(v, phi);
    const Quaternion expected(std::cos(phi / 2), 0.0, -0.6 * std::sin(phi / 2), -0.8 * std::sin(phi / 2));
    CHECK(max_abs_diff(r.conj(), expected) < 1e-15);

    std::mt19937_64 rng(11);
    for (int n = 0; n < 100; ++n) {
        const Quaternion a = random_quaternion(rng), b = random_quaternion(rng);
        CHECK(max_abs_diff(conj(a * b), conj(b) * conj(a)) < 1e-12);
        CHECK(max_abs_diff(conj(a) * a, Quaternion(a.squared_norm())) < 1e-12);
    }
}

TEST_CASE("vec4 ordering and round trip") {
    const PureQuaternion t(0.1, -0.2, 0.3);
    CHECK(t.quat().vec4() == std::array<double, 4>{0.0, 0.1, -0.2, 0.3});
    CHECK(Quaternion(1.0).vec4() == std::array<double, 4>{1.0, 0.0, 0.0, 0.0});
    std::mt19937_64 rng(3);
    const Quaternion q = random_quaternion(rng);
    CHECK(Quaternion::from_vec4(q.vec4()) == q);
}

TEST_CASE("hamilton operators agree with the product") {
    CHECK(telearm::hamilton_left(Quaternion(1.0)) == Mat::identity(4));
    CHECK(telearm::hamilton_right(Quaternion(1.0)) == Mat::identity(4));
    std::mt19937_64 rng(5);
    for (int n = 0; n < 100; ++n) {
        const Quaternion a = random_quaternion(rng), b = random_quaternion(rng);
        const auto ab = (a * b).vec4();
        const auto va = a.vec4(), vb = b.vec4();
        const auto left = telearm::hamilton_left(a) * std::span<const double>(vb);
        const auto right = telearm::hamilton_right(b) * std::span<const double>(va);
        for (int k = 0; k < 4; ++k) {
            CHECK(std::abs(left[k] - ab[k]) < 1e-12);
            CHECK(std::abs(right[k] - ab[k]) < 1e-12);
        }
    }
}

TEST_CASE("axis-angle") {
    const PureQuaternion i(1, 0, 0);
    CHECK(telearm::from_axis_angle(PureQuaternion(0, 0, 1), 0.0).quat() == Quaternion(1.0));
    CHECK(max_abs_diff(telearm::from_axis_angle(i, std::numbers::pi), Quaternion::i()) < 1e-16);
    CHECK_THROWS_AS(telearm::from_axis_angle(PureQuaternion(1, 1, 0), 0.3), std::invalid_argument);

    const PureQuaternion v(2.0 / 3, -1.0 / 3, 2.0 / 3);
    const auto a = telearm::from_axis_angle(v, 0.4), b = telearm::from_axis_angle(v, 1.1);
    const Quaternion composed = a.quat() * b.quat();
    CHECK(max_abs_diff(composed, telearm::from_axis_angle(v, 1.5)) < 1e-15);
}

TEST_CASE("unit quaternion construction and normalize") {
    CHECK_NOTHROW(UnitQuaternion(Quaternion(1.0 + 5e-7, 0, 0, 0)));
    CHECK_THROWS_AS(UnitQuaternion(Quaternion(1.1, 0, 0, 0)), std::invalid_argument);
    const UnitQuaternion u(Quaternion(1.0 + 5e-7, 0, 0, 0));
    CHECK(std::abs(u.quat().norm() - 1.0) < 1e-12);

    std::mt19937_64 rng(9);
    for (int n = 0; n < 1000; ++n) {
        const Quaternion q = telearm::normalize(random_quaternion(rng));
        CHECK(telearm::normalize(q) == q);
        CHECK(std::abs(q.norm() - 1.0) < 1e-9);
    }
    CHECK_THROWS(telearm::normalize(Quaternion()));
}

TEST_CASE("pure quaternion rejects a real part") {
    CHECK_THROWS_AS(PureQuaternion(Quaternion(0.1, 1, 2, 3)), std::invalid_argument);
    const auto rotated = telearm::rotate(telearm::from_axis_angle(PureQuaternion(0, 0, 1), std::numbers::pi / 2),
                                         PureQuaternion(1, 0, 0));
    CHECK(std::abs(rotated.x()) < 1e-15);
    CHECK(std::abs(rotated.y() - 1.0) < 1e-15);
}

TEST_CASE("matrix helpers") {
    const Mat a(2, 3, {1, 2, 3, 4, 5, 6});
    CHECK(a.transpose().rows() == 3);
    CHECK((a * a.transpose())(1, 1) == doctest::Approx(77));
    CHECK(Mat::at_b(a, a) == a.transpose() * a);
    CHECK_THROWS_AS(a * a, std::invalid_argument);
    const Mat spd(2, 2, {4, 1, 1, 3});
    const auto x = telearm::Cholesky(spd).solve(std::vector<double>{1, 2});
    CHECK(x[0] == doctest::Approx(1.0 / 11));
    CHECK(x[1] == doctest::Approx(7.0 / 11));
    CHECK_THROWS_AS(telearm::Cholesky(Mat(2, 2, {1, 2, 2, 1})), std::domain_error);
    const auto y = telearm::solve_lu(Mat(2, 2, {0, 1, 1, 0}), {3, 4});
    CHECK(y == std::vector<double>{4, 3});
}
