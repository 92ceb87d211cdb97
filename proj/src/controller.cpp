#include "telearm/controller.hpp"

#include <algorithm>
#include <cmath>

namespace telearm {

void ControllerConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("controller: alpha must lie in [0, 1]");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("controller: lambda must be > 0");
    if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("controller: eta must be > 0");
    if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("controller: T must be > 0");
    if (!(limit_gain > 0.0) || !std::isfinite(limit_gain)) {
        throw std::invalid_argument("controller: limit_gain must be > 0");
    }
}

Quaternion rotation_error(const UnitQuaternion& r, const UnitQuaternion& r_d) {
    const Quaternion x = r.quat().conj() * r_d.quat();
    const Quaternion minus = x - Quaternion(1.0);
    const Quaternion plus = x + Quaternion(1.0);
    return minus.norm() < plus.norm() ? minus : plus;
}

Mat rotation_error_jacobian(const Mat& j_rotation, const UnitQuaternion& r_d) {
    if (j_rotation.rows() != 4) throw std::invalid_argument("rotation_error_jacobian: expected 4 rows");
    // d/dt vec4(conj(r)·r_d) = hamilton_right(r_d)·C4·J_r; the ∓1 constant drops out.
    Mat c4 = Mat::identity(4);
    for (std::size_t i = 1; i < 4; ++i) c4(i, i) = -1.0;
    return hamilton_right(r_d.quat()) * c4 * j_rotation;
}

LinearConstraints joint_limit_constraints(std::span<const double> q, const DHChain& chain, double limit_gain) {
    const std::size_t n = chain.dof();
    if (q.size() != n) throw std::invalid_argument("joint_limit_constraints: dimension mismatch");
    LinearConstraints c{Mat(2 * n, n), Vec(2 * n)};
    for (std::size_t i = 0; i < n; ++i) {
        c.W(i, i) = -1.0;
        c.W(n + i, i) = 1.0;
        c.w[i] = limit_gain * (q[i] - chain.q_min()[i]);
        c.w[n + i] = -limit_gain * (q[i] - chain.q_max()[i]);
    }
    return c;
}

ControlProblem build_control_problem(const DHChain& chain, std::span<const double> q, const Pose& target,
                                     const ControllerConfig& cfg) {
    const KinematicsSnapshot k = evaluate(chain, q);
    const std::size_t n = chain.dof();
    const Quaternion t_err = k.pose.t.quat() - target.t.quat();
    const Quaternion r_err = rotation_error(k.pose.r, target.r);

    const Mat j_error = rotation_error_jacobian(k.j_rotation, target.r);
    const double a = cfg.alpha;
    const double b = 1.0 - cfg.alpha;
    Mat H = Mat::at_b(k.j_translation, k.j_translation) * a + Mat::at_b(j_error, j_error) * b;
    for (std::size_t i = 0; i < n; ++i) H(i, i) += cfg.lambda * cfg.lambda;
    H *= 2.0;

    const auto vt = t_err.vec4();
    const auto vr = r_err.vec4();
    const Vec jt_e = Mat::at_v(k.j_translation, vt);
    const Vec jr_e = Mat::at_v(j_error, vr);
    Vec f(n);
    for (std::size_t i = 0; i < n; ++i) f[i] = 2.0 * cfg.eta * (a * jt_e[i] + b * jr_e[i]);

    LinearConstraints lc = joint_limit_constraints(q, chain, cfg.limit_gain);
    return {{std::move(H), std::move(f), std::move(lc.W), std::move(lc.w)}, t_err, r_err, k.j_translation,
            j_error};
}

double control_cost(const ControlProblem& problem, const ControllerConfig& cfg, std::span<const double> u) {
    auto residual = [&](const Mat& j, const Quaternion& e) {
        Vec r = j * u;
        const auto v = e.vec4();
        double s = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            const double x = r[i] + cfg.eta * v[i];
            s += x * x;
        }
        return s;
    };
    return cfg.alpha * residual(problem.j_translation, problem.translation_error) +
           (1.0 - cfg.alpha) * residual(problem.j_rotation, problem.rotation_error) +
           cfg.lambda * cfg.lambda * dot(u, u);
}

namespace {

VelocityCommand solve_tick(qp::Solver& solver, const DHChain& chain, std::span<const double> q_in,
                           const Pose& target, const ControllerConfig& cfg, bool warm) {
    cfg.validate();
    const JointVector q = chain.clamp(q_in);
    const ControlProblem problem = build_control_problem(chain, q, target, cfg);
    const qp::QPSolution sol = warm ? solver.solve_warm(problem.qp) : solver.solve(problem.qp);
    if (!sol.optimal()) {
        throw ControllerError("controller: joint-limit QP reported infeasible; q must have left its limits");
    }
    return {sol.x,
            problem.translation_error.norm(),
            problem.rotation_error.norm(),
            control_cost(problem, cfg, sol.x),
            sol.active_set.size(),
            sol.iterations};
}

}  // namespace

VelocityCommand compute_velocity(const DHChain& chain, std::span<const double> q, const Pose& target,
                                 const ControllerConfig& cfg) {
    qp::Solver solver;
    return solve_tick(solver, chain, q, target, cfg, false);
}

JointVector integrate(std::span<const double> q_d, std::span<const double> u, double T, const DHChain& chain) {
    if (q_d.size() != u.size()) throw std::invalid_argument("integrate: dimension mismatch");
    JointVector next(q_d.size());
    for (std::size_t i = 0; i < next.size(); ++i) next[i] = q_d[i] + u[i] * T;
    return chain.clamp(next);
}

JointVector step_configuration_mode(std::span<const double> target, const DHChain& chain) {
    return chain.clamp(target);
}

Controller::Controller(DHChain chain, ControllerConfig cfg, JointVector q_d0)
    : chain_(std::move(chain)), cfg_(cfg), q_d_(chain_.clamp(q_d0)) {
    cfg_.validate();
}

void Controller::reset(JointVector q_d) {
    q_d_ = chain_.clamp(q_d);
    solver_.reset_warm_start();
}

VelocityCommand Controller::compute_velocity(const Pose& target) {
    return solve_tick(solver_, chain_, q_d_, target, cfg_, true);
}

Controller::TickResult Controller::tick(const ControlMode& mode, std::optional<double> T) {
    const double dt = T.value_or(cfg_.T);
    if (!(dt > 0.0)) throw std::invalid_argument("Controller::tick: T must be > 0");
    TickResult out;
    if (const auto* joint = std::get_if<JointTarget>(&mode)) {
        q_d_ = step_configuration_mode(joint->q, chain_);
        out.u.assign(chain_.dof(), 0.0);
    } else {
        const Pose& target = std::get<PoseTarget>(mode).pose;
        const VelocityCommand cmd = compute_velocity(target);
        q_d_ = integrate(q_d_, cmd.u, dt, chain_);
        out.u = cmd.u;
        out.translation_error = cmd.translation_error;
        out.rotation_error = cmd.rotation_error;
        out.cost = cmd.cost;
        out.active_constraints = cmd.active_constraints;
    }
    out.q_d = q_d_;
    return out;
}

}  // namespace telearm
