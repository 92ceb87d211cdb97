#pragma once

#include <optional>
#include <string>
#include <variant>

#include "telearm/kinematics.hpp"
#include "telearm/qp.hpp"

namespace telearm {

/// Gains of the task-space controller. Defaults are the example gains used
/// with the kit; T is the control period in seconds.
struct ControllerConfig {
    double alpha = 0.999;      // translation vs rotation weight, [0, 1]
    double lambda = 0.01;      // joint velocity damping, > 0
    double eta = 4.0;          // task error gain (1/s), > 0
    double T = 0.01;           // control period (s), > 0
    double limit_gain = 1.0;   // joint-limit velocity damper gain (1/s), > 0

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;

    friend bool operator==(const ControllerConfig&, const ControllerConfig&) = default;
};

/// Joint-space target: the arm is sent straight to q_d (clamped).
struct JointTarget {
    JointVector q;
};

/// Task-space target resolved through the QP controller.
struct PoseTarget {
    Pose pose;
};

using ControlMode = std::variant<JointTarget, PoseTarget>;

/// Switching rotation error: conj(r)·r_d − 1 when that is shorter than
/// conj(r)·r_d + 1, otherwise conj(r)·r_d + 1 (ties take the + branch).
Quaternion rotation_error(const UnitQuaternion& r, const UnitQuaternion& r_d);

/// Jacobian of vec4(rotation_error(r, r_d)) with respect to q, given the
/// Jacobian J_r of vec4(r). Either branch has the same derivative.
Mat rotation_error_jacobian(const Mat& j_rotation, const UnitQuaternion& r_d);

struct LinearConstraints {
    Mat W;
    Vec w;
};

/// Velocity damper keeping q inside the chain limits:
/// −g·(q − q_min) ⪯ q̇ ⪯ g·(q_max − q), stacked as W = [−I; I].
LinearConstraints joint_limit_constraints(std::span<const double> q, const DHChain& chain, double limit_gain);

/// Cost terms and QP for one control tick.
struct ControlProblem {
    qp::QPProblem qp;
    Quaternion translation_error;  // t − t_d
    Quaternion rotation_error;
    Mat j_translation;
    Mat j_rotation;  // Jacobian of the rotation error, not of r itself
};

ControlProblem build_control_problem(const DHChain& chain, std::span<const double> q, const Pose& target,
                                     const ControllerConfig& cfg);

/// Full weighted cost including the constant terms dropped from the QP.
double control_cost(const ControlProblem& problem, const ControllerConfig& cfg, std::span<const double> u);

struct VelocityCommand {
    JointVector u;             // rad/s
    double translation_error;  // ‖t − t_d‖ (m)
    double rotation_error;     // ‖r̃‖
    double cost;               // full objective at u
    std::size_t active_constraints;
    int iterations;
};

/// Thrown when the joint-limit QP reports infeasibility, which can only
/// happen if q left the limit box.
class ControllerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Task-space velocity for one tick with a cold-started solver. q is clamped
/// into the limits first.
VelocityCommand compute_velocity(const DHChain& chain, std::span<const double> q, const Pose& target,
                                 const ControllerConfig& cfg);

/// q_d + u·T, clamped to the chain limits.
JointVector integrate(std::span<const double> q_d, std::span<const double> u, double T, const DHChain& chain);

/// Configuration-space mode: the target clamped to the chain limits.
JointVector step_configuration_mode(std::span<const double> target, const DHChain& chain);

/// Stateful control loop: keeps q_d and the QP warm-start set across ticks.
/// The Jacobians are evaluated at the integrated q_d, not at measured joints.
class Controller {
public:
    Controller(DHChain chain, ControllerConfig cfg, JointVector q_d0);

    struct TickResult {
        JointVector q_d;
        JointVector u;
        double translation_error = 0.0;
        double rotation_error = 0.0;
        double cost = 0.0;
        std::size_t active_constraints = 0;
    };

    /// Advances q_d by one tick of length T (cfg.T when not given).
    TickResult tick(const ControlMode& mode, std::optional<double> T = std::nullopt);

    VelocityCommand compute_velocity(const Pose& target);

    const JointVector& q_d() const noexcept { return q_d_; }
    void reset(JointVector q_d);
    const DHChain& chain() const noexcept { return chain_; }
    const ControllerConfig& config() const noexcept { return cfg_; }

private:
    DHChain chain_;
    ControllerConfig cfg_;
    JointVector q_d_;
    qp::Solver solver_;
};

}  // namespace telearm
