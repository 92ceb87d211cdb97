#include <doctest.h>

#include <numbers>
#include <random>
#include <stdexcept>

#include "support/oracles.hpp"
#include "telearm/controller.hpp"

using namespace telearm;
constexpr double kPi = std::numbers::pi;

namespace {

JointVector random_q(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    JointVector q(5);
    for (auto& v : q) v = u(rng);
    return q;
}

std::array<double, 4> switching_error(const Pose& current, const Pose& target) {
    const auto e = oracle::quat_product(current.r.conj().quat().vec4(), target.r.quat().vec4());
    std::array<double, 4> minus = e, plus = e;
    minus[0] -= 1.0;
    plus[0] += 1.0;
    double nm = 0.0, np = 0.0;
    for (int k = 0; k < 4; ++k) {
        nm += minus[k] * minus[k];
        np += plus[k] * plus[k];
    }
    return nm < np ? minus : plus;
}

}  // namespace

TEST_CASE("config validation") {
    CHECK_NOTHROW(ControllerConfig{}.validate());
    CHECK_THROWS_AS((ControllerConfig{1.5}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((ControllerConfig{0.5, 0.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((ControllerConfig{0.5, 0.01, -1.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((ControllerConfig{0.5, 0.01, 4.0, 0.0}.validate()), std::invalid_argument);
}

TEST_CASE("rotation error picks the shorter branch") {
    const DHChain c = umirobot_chain();
    std::mt19937_64 rng(17);
    for (int n = 0; n < 200; ++n) {
        const Pose a = fkm(c, random_q(rng, -kPi / 2, kPi / 2));
        const Pose b = fkm(c, random_q(rng, -kPi / 2, kPi / 2));
        const Quaternion e = rotation_error(a.r, b.r);
        const auto expected = switching_error(a, b);
        for (int k = 0; k < 4; ++k) CHECK(std::abs(e.vec4()[k] - expected[k]) < 1e-15);
        CHECK(e.norm() <= std::sqrt(2.0) + 1e-12);
        CHECK(rotation_error(a.r, a.r).norm() < 1e-15);
        CHECK(rotation_error(a.r, -a.r).norm() < 1e-15);
    }
    // conj(r)·r_d = k̂ is equidistant from ±1; the + branch wins.
    const UnitQuaternion r;
    const UnitQuaternion rd(Quaternion::k());
    CHECK(rotation_error(r, rd) == Quaternion(1.0, 0.0, 0.0, 1.0));
}

TEST_CASE("rotation error Jacobian matches finite differences") {
    const DHChain c = umirobot_chain();
    std::mt19937_64 rng(19);
    for (int n = 0; n < 100; ++n) {
        const JointVector q = random_q(rng, -kPi / 2, kPi / 2);
        const Pose target = fkm(c, random_q(rng, -kPi / 2, kPi / 2));
        const Mat je = rotation_error_jacobian(rotation_jacobian(c, q), target.r);
        const auto fd = oracle::finite_difference(
            [&](const std::vector<double>& x) { return (fkm(c, x).r.conj() * target.r).quat().vec4(); }, q, 1e-6);
        for (std::size_t j = 0; j < 5; ++j)
            for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(je(k, j) - fd[j][k]) < 1e-6);
    }
}

TEST_CASE("joint-limit rows") {
    const DHChain c = umirobot_chain();
    const JointVector q{0.0, 0.5, -0.5, 1.0, -1.5};
    const auto lc = joint_limit_constraints(q, c, 2.0);
    REQUIRE(lc.W.rows() == 10);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(lc.W(i, i) == -1.0);
        CHECK(lc.W(5 + i, i) == 1.0);
        CHECK(lc.w[i] == doctest::Approx(2.0 * (q[i] + kPi / 2)));
        CHECK(lc.w[5 + i] == doctest::Approx(2.0 * (kPi / 2 - q[i])));
    }
}

TEST_CASE("inactive limits reduce to damped least squares") {
    const DHChain c = umirobot_chain();
    const ControllerConfig cfg;
    std::mt19937_64 rng(23);
    int checked = 0;
    for (int n = 0; n < 200; ++n) {
        const JointVector q = random_q(rng, -1.0, 1.0);
        JointVector q2 = q;
        for (auto& v : q2) v += 0.02;
        const Pose target = fkm(c, q2);
        const auto cmd = compute_velocity(c, q, target, cfg);
        if (cmd.active_constraints != 0) continue;
        ++checked;

        const Pose now = fkm(c, q);
        const Mat jt = translation_jacobian(c, q), jr = rotation_error_jacobian(rotation_jacobian(c, q), target.r);
        std::array<double, 4> et{};
        for (int k = 0; k < 4; ++k) et[k] = now.t.quat().vec4()[k] - target.t.quat().vec4()[k];
        const auto er = switching_error(now, target);
        std::vector<std::vector<double>> a(5, std::vector<double>(5, 0.0));
        std::vector<double> b(5, 0.0);
        for (std::size_t i = 0; i < 5; ++i) {
            for (std::size_t j = 0; j < 5; ++j) {
                for (std::size_t k = 0; k < 4; ++k)
                    a[i][j] += cfg.alpha * jt(k, i) * jt(k, j) + (1 - cfg.alpha) * jr(k, i) * jr(k, j);
                if (i == j) a[i][j] += cfg.lambda * cfg.lambda;
            }
            for (std::size_t k = 0; k < 4; ++k)
                b[i] -= cfg.eta * (cfg.alpha * jt(k, i) * et[k] + (1 - cfg.alpha) * jr(k, i) * er[k]);
        }
        const auto expected = oracle::gauss_solve(a, b);
        for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(cmd.u[i] - expected[i]) < 1e-9);
    }
    CHECK(checked > 150);
}

TEST_CASE("the commanded velocity minimises the cost over feasible perturbations") {
    const DHChain c = umirobot_chain();
    const ControllerConfig cfg;
    std::mt19937_64 rng(31);
    std::normal_distribution<double> g(0.0, 0.05);
    for (int n = 0; n < 50; ++n) {
        const JointVector q = random_q(rng, -kPi / 2, kPi / 2);
        const Pose target = fkm(c, random_q(rng, -kPi / 2, kPi / 2));
        const auto problem = build_control_problem(c, q, target, cfg);
        const auto cmd = compute_velocity(c, q, target, cfg);
        const double best = control_cost(problem, cfg, cmd.u);
        CHECK(best == doctest::Approx(cmd.cost));
        const auto lc = joint_limit_constraints(q, c, cfg.limit_gain);
        for (int trial = 0; trial < 50; ++trial) {
            JointVector u = cmd.u;
            for (auto& v : u) v += g(rng);
            bool ok = true;
            for (std::size_t r = 0; r < lc.W.rows(); ++r) {
                double s = 0.0;
                for (std::size_t k = 0; k < 5; ++k) s += lc.W(r, k) * u[k];
                ok = ok && s <= lc.w[r];
            }
            if (ok) CHECK(control_cost(problem, cfg, u) >= best - 1e-12);
        }
    }
}

TEST_CASE("limits bind when the target lies past them") {
    const DHChain c = umirobot_chain();
    // Joint 1 pinned at its upper limit while the target needs it further.
    const JointVector q{kPi / 2, 0.3, 0.2, 0.4, 0.1};
    JointVector beyond = q;
    beyond[0] = kPi / 2 + 0.4;
    const DHChain wide(c.rows(), JointVector(5, -kPi), JointVector(5, kPi));
    const Pose target = fkm(wide, beyond);
    const auto cmd = compute_velocity(c, q, target, ControllerConfig{});
    CHECK(cmd.active_constraints >= 1);
    CHECK(cmd.u[0] <= 1e-12);
}

TEST_CASE("closed loop converges on interior targets") {
    const DHChain c = umirobot_chain();
    std::mt19937_64 rng(3);
    for (int n = 0; n < 20; ++n) {
        const Pose target = fkm(c, random_q(rng, -kPi / 4, kPi / 4));
        Controller ctl(c, ControllerConfig{}, JointVector(5, 0.0));
        for (int tick = 0; tick < 2000; ++tick) CHECK(c.within_limits(ctl.tick(PoseTarget{target}).q_d, 0.0));
        CHECK((fkm(c, ctl.q_d()).t.quat() - target.t.quat()).norm() < 1e-3);
    }
}

TEST_CASE("limits hold for targets anywhere in the box over 10^4 ticks") {
    const DHChain c = umirobot_chain();
    std::mt19937_64 rng(4);
    for (int n = 0; n < 5; ++n) {
        const Pose target = fkm(c, random_q(rng, -kPi / 2, kPi / 2));
        Controller ctl(c, ControllerConfig{}, random_q(rng, -kPi / 2, kPi / 2));
        bool inside = true;
        for (int tick = 0; tick < 10000; ++tick) inside = inside && c.within_limits(ctl.tick(PoseTarget{target}).q_d, 1e-9);
        CHECK(inside);
    }
}

TEST_CASE("joint mode clamps and does not move through the QP") {
    Controller ctl(umirobot_chain(), ControllerConfig{}, JointVector(5, 0.0));
    const auto res = ctl.tick(JointTarget{{3.0, -0.2, 0.1, 0.0, -9.0}});
    CHECK(res.q_d == JointVector{kPi / 2, -0.2, 0.1, 0.0, -kPi / 2});
    CHECK(res.u == JointVector(5, 0.0));
    CHECK(ctl.q_d() == res.q_d);
    CHECK_THROWS_AS(ctl.tick(JointTarget{{0.0, 0.0}}), std::invalid_argument);
}

TEST_CASE("integrate clamps") {
    const DHChain c = umirobot_chain();
    const JointVector q{1.5, 0, 0, 0, 0}, u{10, 1, 0, 0, -1};
    const JointVector out = integrate(q, u, 0.01, c);
    CHECK(out[0] == kPi / 2);
    CHECK(out[1] == doctest::Approx(0.01));
    CHECK(out[4] == doctest::Approx(-0.01));
}

TEST_CASE("ticks are deterministic") {
    const DHChain c = umirobot_chain();
    const Pose target = fkm(c, JointVector{0.4, -0.3, 0.6, 0.2, -0.5});
    Controller a(c, ControllerConfig{}, JointVector(5, 0.0)), b(c, ControllerConfig{}, JointVector(5, 0.0));
    for (int i = 0; i < 200; ++i) CHECK(a.tick(PoseTarget{target}).q_d == b.tick(PoseTarget{target}).q_d);
}
