#include <doctest.h>

#include <numbers>
#include <random>
#include <stdexcept>
#include <sstream>

#include "support/oracles.hpp"
#include "telearm/kinematics.hpp"

using namespace telearm;
constexpr double kPi = std::numbers::pi;

namespace {

std::vector<oracle::DhParams> oracle_rows(const DHChain& chain) {
    std::vector<oracle::DhParams> rows;
    for (const auto& r : chain.rows()) rows.push_back({r.theta_offset, r.d, r.a, r.alpha});
    return rows;
}

JointVector random_q(std::mt19937_64& rng, std::size_t n, double lo = -kPi / 2, double hi = kPi / 2) {
    std::uniform_real_distribution<double> u(lo, hi);
    JointVector q(n);
    for (auto& v : q) v = u(rng);
    return q;
}

// Largest component error between fkm and the homogeneous-matrix oracle,
// taking the closer of ±r for the rotation.
std::pair<double, double> oracle_error(const DHChain& chain, const JointVector& q) {
    const Pose pose = fkm(chain, q);
    const auto rows = oracle_rows(chain);
    const auto m = oracle::fk_matrix(rows, q);
    double et = std::max({std::abs(pose.t.x() - m[0][3]), std::abs(pose.t.y() - m[1][3]), std::abs(pose.t.z() - m[2][3])});
    const auto qo = oracle::matrix_to_quaternion(m);
    const auto qr = pose.r.quat().vec4();
    double plus = 0.0, minus = 0.0;
    for (int k = 0; k < 4; ++k) {
        plus = std::max(plus, std::abs(qr[k] - qo[k]));
        minus = std::max(minus, std::abs(qr[k] + qo[k]));
    }
    return {et, std::min(plus, minus)};
}

}  // namespace

TEST_CASE("UMIRobot DH table") {
    const DHChain c = umirobot_chain();
    REQUIRE(c.dof() == 5);
    CHECK(c.rows()[1] == DHRow{-kPi / 2, 0.0, 0.0813, kPi});
    CHECK(c.rows()[3] == DHRow{0.0, 0.16519, 0.0, -kPi / 2});
    CHECK(c.rows()[0] == DHRow{0.0, 0.00245, 0.0, -kPi / 2});
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(c.q_min()[i] == -kPi / 2);
        CHECK(c.q_max()[i] == kPi / 2);
    }
}

TEST_CASE("chain validation") {
    CHECK_THROWS_AS(DHChain({{0, 0, 0, 0}}, {1.0}, {0.0}), std::invalid_argument);
    CHECK_THROWS_AS(DHChain({{0, 0, 0, 0}}, {-1.0, 0.0}, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(DHChain({{0, std::nan(""), 0, 0}}, {-1.0}, {1.0}), std::invalid_argument);
    const DHChain c = umirobot_chain();
    CHECK_THROWS_AS(fkm(c, JointVector(4, 0.0)), std::invalid_argument);
    CHECK_THROWS_AS(rotation_jacobian(c, JointVector(6, 0.0)), std::invalid_argument);
    CHECK(c.clamp(JointVector{3, -3, 0, 0.5, -0.5}) == JointVector{kPi / 2, -kPi / 2, 0, 0.5, -0.5});
}

TEST_CASE("fkm agrees with homogeneous-matrix oracle") {
    const DHChain c = umirobot_chain();
    const auto [et0, er0] = oracle_error(c, JointVector(5, 0.0));
    CHECK(et0 < 1e-12);
    CHECK(er0 < 1e-12);
    std::mt19937_64 rng(42);
    for (int n = 0; n < 1000; ++n) {
        const JointVector q = random_q(rng, 5);
        const auto [et, er] = oracle_error(c, q);
        CHECK(et < 1e-12);
        CHECK(er < 1e-12);
        CHECK(std::abs(fkm(c, q).r.quat().norm() - 1.0) < 1e-9);
    }
}

TEST_CASE("single z-revolute joint") {
    const DHChain z({{0, 0, 0, 0}}, {-kPi}, {kPi});
    const Pose p = fkm(z, JointVector{0.8});
    CHECK(std::abs(p.r.w() - std::cos(0.4)) < 1e-15);
    CHECK(std::abs(p.r.z() - std::sin(0.4)) < 1e-15);
    CHECK(p.t.norm() == 0.0);

    // ∂/∂θ (cos θ/2 + k̂ sin θ/2) at 0 = ½k̂.
    const Mat jr = rotation_jacobian(z, JointVector{0.0});
    CHECK(jr.col(0) == std::vector<double>{0.0, 0.0, 0.0, 0.5});

    const double L = 0.3;
    const DHChain arm({{0, 0, L, 0}}, {-kPi}, {kPi});
    const Mat jt = translation_jacobian(arm, JointVector{0.0});
    CHECK(std::abs(jt(0, 0)) == 0.0);
    CHECK(std::abs(jt(1, 0)) < 1e-16);
    CHECK(std::abs(jt(2, 0) - L) < 1e-16);
    CHECK(std::abs(jt(3, 0)) < 1e-16);
}

TEST_CASE("empty chain") {
    const DHChain empty({}, {}, {});
    const Mat jr = rotation_jacobian(empty, JointVector{});
    CHECK(jr.rows() == 4);
    CHECK(jr.cols() == 0);
    CHECK(fkm(empty, JointVector{}).r.quat() == Quaternion(1.0));
}

TEST_CASE("Jacobians match central finite differences") {
    const DHChain c = umirobot_chain();
    std::mt19937_64 rng(1);
    for (int n = 0; n < 100; ++n) {
        const JointVector q = random_q(rng, 5);
        const Mat jr = rotation_jacobian(c, q);
        const Mat jt = translation_jacobian(c, q);
        const auto fd_r = oracle::finite_difference([&](const std::vector<double>& x) { return fkm(c, x).r.quat().vec4(); }, q, 1e-6);
        const auto fd_t = oracle::finite_difference([&](const std::vector<double>& x) { return fkm(c, x).t.quat().vec4(); }, q, 1e-6);
        for (std::size_t j = 0; j < 5; ++j) {
            CHECK(jt(0, j) == 0.0);
            for (std::size_t k = 0; k < 4; ++k) {
                CHECK(std::abs(jr(k, j) - fd_r[j][k]) < 1e-6);
                CHECK(std::abs(jt(k, j) - fd_t[j][k]) < 1e-6);
            }
        }
    }
}

TEST_CASE("first-order prediction error is second order in dt") {
    const DHChain c = umirobot_chain();
    std::mt19937_64 rng(8);
    for (int n = 0; n < 20; ++n) {
        const JointVector q = random_q(rng, 5, -1.2, 1.2);
        const JointVector qdot = random_q(rng, 5, -1.0, 1.0);
        const Mat jt = translation_jacobian(c, q);
        auto prediction_error = [&](double dt) {
            const JointVector q2 = axpy(dt, qdot, q);
            const auto t0 = fkm(c, q).t.quat().vec4();
            const auto t1 = fkm(c, q2).t.quat().vec4();
            const Vec lin = jt * std::span<const double>(qdot);
            double e = 0.0;
            for (int k = 0; k < 4; ++k) e = std::max(e, std::abs(t1[k] - (t0[k] + lin[k] * dt)));
            return e;
        };
        const double e1 = prediction_error(1e-2), e2 = prediction_error(5e-3);
        if (e1 < 1e-9) continue;  // locally linear direction
        CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.1));
    }
}

TEST_CASE("link origins end at the end-effector") {
    const DHChain c = umirobot_chain();
    const JointVector q{0.1, -0.2, 0.3, 0.4, -0.5};
    const auto origins = link_origins(c, q);
    REQUIRE(origins.size() == 6);
    CHECK(origins.front() == std::array<double, 3>{0, 0, 0});
    const Pose p = fkm(c, q);
    CHECK(origins.back()[0] == p.t.x());
    CHECK(origins.back()[2] == p.t.z());
}

TEST_CASE("chain file round trip and errors") {
    const DHChain c = umirobot_chain();
    std::istringstream in(serialize_chain(c));
    CHECK(parse_chain(in) == c);

    std::istringstream uniform("0 0.1 0 0\n0 0 0.2 1.5 # comment\nlimits -1 1\n");
    const DHChain u = parse_chain(uniform);
    CHECK(u.dof() == 2);
    CHECK(u.q_max() == JointVector{1, 1});

    std::istringstream missing("0 0 0 0\n");
    CHECK_THROWS_AS(parse_chain(missing), std::invalid_argument);
    std::istringstream short_row("0 0 0\nlimits -1 1\n");
    CHECK_THROWS_AS(parse_chain(short_row), std::invalid_argument);
    std::istringstream bad_limits("0 0 0 0\nlimits -1 1 2\n");
    CHECK_THROWS_AS(parse_chain(bad_limits), std::invalid_argument);
}
