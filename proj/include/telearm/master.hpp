#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>

#include "telearm/kinematics.hpp"

namespace telearm::master {

inline constexpr std::size_t kChannels = 6;
inline constexpr int kAdcMax = 1023;
/// Minimum travel (counts) before a channel is considered wired.
inline constexpr int kMinTravel = 32;

/// Raw 10-bit potentiometer counts, one per channel.
using PotReading = std::array<int, kChannels>;

class CalibrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Running min/max of every channel.
struct CalibrationState {
    std::array<int, kChannels> min_seen{};
    std::array<int, kChannels> max_seen{};
    std::size_t samples = 0;

    bool channel_calibrated(std::size_t ch) const {
        return samples > 0 && max_seen[ch] - min_seen[ch] >= kMinTravel;
    }
    bool calibrated() const;

    friend bool operator==(const CalibrationState&, const CalibrationState&) = default;
};

/// Widens the per-channel range to include r. Throws std::out_of_range for
/// counts outside [0, 1023].
CalibrationState ingest(const CalibrationState& cal, const PotReading& r);

struct JointCommand {
    JointVector q;
    double gripper = 0.0;
};

/// Channels 1-5 map affinely from [min_seen, max_seen] onto [q_min, q_max];
/// channel 6 maps onto the gripper ratio [0, 1]. Outputs are clamped.
JointCommand map_to_joints(const CalibrationState& cal, const PotReading& r, const DHChain& chain);

/// Task-space box for the linear pots and angle ranges for the rotary ones.
struct Workspace {
    std::array<double, 3> t_min{0.10, -0.08, 0.0};
    std::array<double, 3> t_max{0.18, 0.08, 0.12};
    // roll, pitch, yaw (rad)
    std::array<double, 3> angle_min{-0.7853981633974483, -0.7853981633974483, -0.7853981633974483};
    std::array<double, 3> angle_max{0.7853981633974483, 0.7853981633974483, 0.7853981633974483};
    // Orientation the roll/pitch/yaw offsets are applied to (w, x, y, z);
    // defaults to the end-effector orientation at q = 0.
    std::array<double, 4> base_rotation{0.0, 0.7071067811865476, 0.0, 0.7071067811865476};

    std::array<double, 3> center() const;
    /// Clamps a translation into the box.
    std::array<double, 3> clamp(const std::array<double, 3>& t) const;
    /// base_rotation · rotation_from_rpy(rpy), with rpy clamped to the angle ranges.
    UnitQuaternion orientation(const std::array<double, 3>& rpy) const;
    void validate() const;

    friend bool operator==(const Workspace&, const Workspace&) = default;
};

/// Rotation rz(yaw)·ry(pitch)·rx(roll).
UnitQuaternion rotation_from_rpy(double roll, double pitch, double yaw);

/// Channels 1-3 give the translation inside the workspace box; channels 4-6
/// give roll, pitch and yaw composed in z-y-x order.
Pose map_to_pose(const CalibrationState& cal, const PotReading& r, const Workspace& workspace);

/// Optional exponential smoothing of raw counts; factor 0 disables it.
class PotSmoother {
public:
    explicit PotSmoother(double factor = 0.0);
    PotReading filter(const PotReading& r);

private:
    double factor_;
    std::optional<std::array<double, kChannels>> state_;
};

/// Text format: one "channel min max" line per channel, '#' comments.
void write_calibration(std::ostream& out, const CalibrationState& cal);
CalibrationState read_calibration(std::istream& in);
void save_calibration(const CalibrationState& cal, const std::filesystem::path& path);
CalibrationState load_calibration(const std::filesystem::path& path);

}  // namespace telearm::master
