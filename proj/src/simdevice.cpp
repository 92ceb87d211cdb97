#include "telearm/simdevice.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace telearm {

namespace {

double approach(double current, double target, double budget, double deadband) {
    const double delta = target - current;
    if (std::abs(delta) <= deadband) return current;
    if (std::abs(delta) <= budget) return target;
    return current + std::copysign(budget, delta);
}

}  // namespace

void ServoModel::validate() const {
    if (!(max_speed > 0.0)) throw std::invalid_argument("ServoModel: max_speed must be > 0");
    if (!(gripper_speed > 0.0)) throw std::invalid_argument("ServoModel: gripper_speed must be > 0");
    if (!(deadband >= 0.0)) throw std::invalid_argument("ServoModel: deadband must be >= 0");
}

RobotState tick(const DHChain& chain, const RobotState& state, std::span<const double> target_q,
                double target_gripper, double dt, const ServoModel& model) {
    if (!(dt > 0.0)) throw std::invalid_argument("simdevice tick: dt must be > 0");
    if (target_q.size() != chain.dof() || state.q.size() != chain.dof()) {
        throw std::invalid_argument("simdevice tick: dimension mismatch");
    }
    const JointVector goal = chain.clamp(target_q);
    RobotState next = state;
    const double budget = model.max_speed * dt;
    for (std::size_t i = 0; i < goal.size(); ++i) next.q[i] = approach(state.q[i], goal[i], budget, model.deadband);
    next.q = chain.clamp(next.q);
    next.gripper = std::clamp(approach(state.gripper, std::clamp(target_gripper, 0.0, 1.0),
                                       model.gripper_speed * dt, 0.0),
                              0.0, 1.0);
    next.t_sim = state.t_sim + dt;
    return next;
}

SimulatedRobot::SimulatedRobot(DHChain chain, ServoModel model, JointVector q0)
    : chain_(std::move(chain)), model_(model) {
    model_.validate();
    if (q0.empty()) q0.assign(chain_.dof(), 0.0);
    state_.q = chain_.clamp(q0);
    target_q_ = state_.q;
}

void SimulatedRobot::set_targets(std::span<const double> q, double gripper) {
    target_q_ = chain_.clamp(q);
    target_gripper_ = std::clamp(gripper, 0.0, 1.0);
}

const RobotState& SimulatedRobot::advance(double dt) {
    state_ = tick(chain_, state_, target_q_, target_gripper_, dt, model_);
    return state_;
}

}  // namespace telearm
