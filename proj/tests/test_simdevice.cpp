#include <doctest.h>

#include <numbers>
#include <random>
#include <stdexcept>

#include "telearm/simdevice.hpp"

using namespace telearm;
constexpr double kPi = std::numbers::pi;

TEST_CASE("servo model validation") {
    CHECK_NOTHROW(ServoModel{}.validate());
    CHECK_THROWS_AS((ServoModel{0.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((ServoModel{1.0, -0.1}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((ServoModel{1.0, 0.0, 0.0}.validate()), std::invalid_argument);
}

TEST_CASE("rate limit and exact landing") {
    const DHChain c = umirobot_chain();
    const ServoModel m{2.0, 0.0, 1.0};
    RobotState s{JointVector(5, 0.0), 0.0, 0.0};
    const JointVector target{1.0, -0.005, 0.0, 0.3, -1.0};
    s = tick(c, s, target, 1.0, 0.01, m);
    CHECK(s.q[0] == doctest::Approx(0.02));
    CHECK(s.q[1] == -0.005);
    CHECK(s.q[2] == 0.0);
    CHECK(s.q[4] == doctest::Approx(-0.02));
    CHECK(s.gripper == doctest::Approx(0.01));
    CHECK(s.t_sim == doctest::Approx(0.01));
    for (int i = 0; i < 100; ++i) s = tick(c, s, target, 1.0, 0.01, m);
    CHECK(s.q == target);
    CHECK(s.gripper == 1.0);
}

TEST_CASE("targets are clamped and deadband holds small errors") {
    const DHChain c = umirobot_chain();
    RobotState s{JointVector(5, 0.0), 0.0, 0.0};
    const JointVector far{9.0, -9.0, 0.0, 0.0, 0.0};
    for (int i = 0; i < 200; ++i) s = tick(c, s, far, 7.0, 0.01, ServoModel{});
    CHECK(s.q[0] == kPi / 2);
    CHECK(s.q[1] == -kPi / 2);
    CHECK(s.gripper == 1.0);

    const ServoModel sticky{6.0, 0.01, 2.0};
    RobotState h{JointVector(5, 0.0), 0.0, 0.0};
    h = tick(c, h, JointVector{0.005, 0.02, 0, 0, 0}, 0.0, 0.01, sticky);
    CHECK(h.q[0] == 0.0);
    CHECK(h.q[1] == doctest::Approx(0.02));
}

TEST_CASE("state never leaves the limits and motion is bounded per tick") {
    const DHChain c = umirobot_chain();
    const ServoModel m;
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-3.0, 3.0), dt(0.001, 0.05);
    SimulatedRobot robot(c, m);
    for (int i = 0; i < 5000; ++i) {
        if (i % 50 == 0) {
            JointVector q(5);
            for (auto& v : q) v = u(rng);
            robot.set_targets(q, u(rng));
        }
        const JointVector before = robot.state().q;
        const double step = dt(rng);
        const RobotState& s = robot.advance(step);
        CHECK(c.within_limits(s.q, 0.0));
        CHECK(s.gripper >= 0.0);
        CHECK(s.gripper <= 1.0);
        for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(s.q[j] - before[j]) <= m.max_speed * step + 1e-15);
    }
}

TEST_CASE("simulated robot bookkeeping") {
    const DHChain c = umirobot_chain();
    SimulatedRobot robot(c, ServoModel{}, JointVector{0.1, 0, 0, 0, 0});
    CHECK(robot.state().q[0] == 0.1);
    CHECK(robot.target_q() == JointVector{0.1, 0, 0, 0, 0});
    CHECK_THROWS_AS(robot.set_targets(JointVector{0.0}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(robot.advance(-0.1), std::invalid_argument);
    robot.set_targets(JointVector(5, 0.2), 0.5);
    CHECK(robot.target_gripper() == 0.5);
    for (int i = 0; i < 100; ++i) robot.advance(0.01);
    CHECK(robot.state().q == JointVector(5, 0.2));
    CHECK(robot.state().t_sim == doctest::Approx(1.0));
    SimulatedRobot zero(c, ServoModel{});
    CHECK(zero.state().q == JointVector(5, 0.0));
}
