#pragma once

#include "telearm/kinematics.hpp"

namespace telearm {

/// First-order rate-limited servo model shared by all six channels.
struct ServoModel {
    double max_speed = 6.0;      // rad/s, roughly 0.17 s per 60° for MG996R-class servos
    double deadband = 0.0;       // rad; errors at or below this are not corrected
    double gripper_speed = 2.0;  // full strokes per second

    void validate() const;

    friend bool operator==(const ServoModel&, const ServoModel&) = default;
};

struct RobotState {
    JointVector q;         // rad
    double gripper = 0.0;  // 0 = open, 1 = closed
    double t_sim = 0.0;    // s

    friend bool operator==(const RobotState&, const RobotState&) = default;
};

/// Advances the servos by dt toward their targets. Each joint moves at most
/// max_speed·dt and lands exactly on a target that is within that budget;
/// results are clamped to the chain limits and the gripper to [0, 1].
RobotState tick(const DHChain& chain, const RobotState& state, std::span<const double> target_q,
                double target_gripper, double dt, const ServoModel& model);

/// The simulated arm as a stateful object: latest targets plus state.
class SimulatedRobot {
public:
    SimulatedRobot(DHChain chain, ServoModel model, JointVector q0 = {});

    void set_targets(std::span<const double> q, double gripper);
    const RobotState& advance(double dt);

    const RobotState& state() const noexcept { return state_; }
    const JointVector& target_q() const noexcept { return target_q_; }
    double target_gripper() const noexcept { return target_gripper_; }
    const DHChain& chain() const noexcept { return chain_; }

private:
    DHChain chain_;
    ServoModel model_;
    RobotState state_;
    JointVector target_q_;
    double target_gripper_ = 0.0;
};

}  // namespace telearm
