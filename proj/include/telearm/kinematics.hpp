#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "telearm/mat.hpp"
#include "telearm/quaternion.hpp"

namespace telearm {

/// Joint positions (rad) or velocities (rad/s), one entry per DH row.
using JointVector = Vec;

/// One row of a standard DH table. The joint variable is added to theta_offset.
struct DHRow {
    double theta_offset = 0.0;  // rad
    double d = 0.0;             // m
    double a = 0.0;             // m
    double alpha = 0.0;         // rad

    friend bool operator==(const DHRow&, const DHRow&) = default;
};

/// End-effector pose: rotation r and translation t (m).
struct Pose {
    UnitQuaternion r;
    PureQuaternion t;
};

/// Serial chain of revolute joints described with standard (distal) DH
/// parameters: each link is RotZ(θ)·TransZ(d)·TransX(a)·RotX(α).
class DHChain {
public:
    DHChain() = default;
    /// Throws std::invalid_argument for non-finite rows, size mismatches or
    /// q_min not strictly below q_max.
    DHChain(std::vector<DHRow> rows, JointVector q_min, JointVector q_max);

    std::size_t dof() const noexcept { return rows_.size(); }
    const std::vector<DHRow>& rows() const noexcept { return rows_; }
    const JointVector& q_min() const noexcept { return q_min_; }
    const JointVector& q_max() const noexcept { return q_max_; }

    /// Elementwise clamp of q into [q_min, q_max].
    JointVector clamp(std::span<const double> q) const;
    bool within_limits(std::span<const double> q, double tol = 0.0) const;

    friend bool operator==(const DHChain&, const DHChain&) = default;

private:
    std::vector<DHRow> rows_;
    JointVector q_min_;
    JointVector q_max_;
};

/// The five-joint arm: DH table plus ±π/2 joint limits.
DHChain umirobot_chain();

Pose fkm(const DHChain& chain, std::span<const double> q);

/// 4 x n matrix with vec4(ṙ) = J_r·q̇.
Mat rotation_jacobian(const DHChain& chain, std::span<const double> q);

/// 4 x n matrix with vec4(ṫ) = J_t·q̇. Row 0 is identically zero.
Mat translation_jacobian(const DHChain& chain, std::span<const double> q);

/// Everything the controller needs at one configuration, computed in a
/// single pass over the chain.
struct KinematicsSnapshot {
    Pose pose;
    Mat j_rotation;
    Mat j_translation;
};
KinematicsSnapshot evaluate(const DHChain& chain, std::span<const double> q);

/// Origins of the base frame and every link frame (n + 1 points), used for
/// drawing the arm.
std::vector<std::array<double, 3>> link_origins(const DHChain& chain, std::span<const double> q);

/// Plain-text chain file: one "theta_offset d a alpha" row per line, then a
/// trailing "limits" line with either two values (applied to every joint) or
/// n minima followed by n maxima. '#' starts a comment.
DHChain parse_chain(std::istream& in);
DHChain load_chain(const std::filesystem::path& path);
std::string serialize_chain(const DHChain& chain);
void save_chain(const DHChain& chain, const std::filesystem::path& path);

}  // namespace telearm
