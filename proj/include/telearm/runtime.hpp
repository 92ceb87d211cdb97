#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "telearm/controller.hpp"
#include "telearm/device.hpp"
#include "telearm/master.hpp"
#include "telearm/simdevice.hpp"
#include "telearm/telelink.hpp"

namespace telearm::app {

/// A target as the control loop consumes it, plus what the operator asked
/// for so UIs can echo the clamped values.
struct Target {
    ControlMode mode = JointTarget{};
    double gripper = 0.0;
    std::optional<std::array<double, 3>> rpy;  // pose targets given as roll/pitch/yaw
    std::uint32_t seq = 0;                     // link seq it arrived with, 0 if local

    bool is_pose() const { return std::holds_alternative<PoseTarget>(mode); }
};

/// Clamps q to the chain limits and the gripper to [0, 1].
Target joint_target(const DHChain& chain, std::span<const double> q, double gripper);
/// Translation clamped into the workspace box, rpy into its angle ranges
/// and applied on top of the workspace base orientation.
Target pose_target(const master::Workspace& ws, const std::array<double, 3>& t, const std::array<double, 3>& rpy,
                   double gripper);
/// Pose target from an absolute rotation; t is still clamped to the box.
Target pose_target(const master::Workspace& ws, const std::array<double, 3>& t, const UnitQuaternion& r,
                   double gripper);

link::Body to_link(const Target& target);
/// Throws std::invalid_argument when the message does not fit the chain.
Target from_link(const link::Body& body, const DHChain& chain, const master::Workspace& ws);

/// Latest-wins mailbox between target producers (network, UI, scripts)
/// and the control loop.
class TargetBoard {
public:
    void set(Target t);
    std::optional<Target> get() const;
    std::uint64_t version() const;
    void clear();

private:
    mutable std::mutex mutex_;
    std::optional<Target> target_;
    std::uint64_t version_ = 0;
};

struct StateSnapshot {
    JointVector q;
    JointVector q_d;
    double gripper = 0.0;
    double err_t = 0.0;  // ‖t(q) − t_d‖, m
    double err_r = 0.0;  // ‖r̃‖ at q
    double latency_ms = -1.0;
    std::uint64_t seq = 0;  // snapshot counter
    std::string mode = "idle";
    std::optional<Target> target;
    double t = 0.0;  // s since start
    std::uint32_t ack_seq = 0;
};

/// Single-writer, many-reader state fan-out.
class StateBus {
public:
    void publish(StateSnapshot s);
    StateSnapshot latest() const;
    std::uint64_t version() const;
    void set_latency(double ms);

private:
    mutable std::mutex mutex_;
    StateSnapshot state_;
    std::uint64_t version_ = 0;
    double latency_ms_ = -1.0;
};

/// Tracking errors of the measured configuration against a target.
std::pair<double, double> tracking_error(const DHChain& chain, std::span<const double> q, const Target& target);

struct TickRecord {
    std::uint64_t tick = 0;
    double t = 0.0;
    double T = 0.0;
    std::optional<Target> target;
    JointVector q;    // measured after the tick
    JointVector q_d;  // controller output
    JointVector u;
    double gripper = 0.0;
    double err_t = 0.0;
    double err_r = 0.0;
    std::size_t active = 0;
};

/// Target → controller → device, one tick at a time.
class ControlLoop {
public:
    ControlLoop(DHChain chain, ControllerConfig cfg, std::unique_ptr<DevicePort> device);

    /// Runs one tick of length T against the given target (none: hold).
    TickRecord step(const std::optional<Target>& target, double T);

    const DHChain& chain() const { return controller_.chain(); }
    const Controller& controller() const { return controller_; }
    DevicePort& device() { return *device_; }
    const JointVector& initial_q() const { return q0_; }
    double time() const { return t_; }

private:
    Controller controller_;
    std::unique_ptr<DevicePort> device_;
    JointVector q0_;
    double gripper_ = 0.0;
    std::uint64_t ticks_ = 0;
    double t_ = 0.0;
};

StateSnapshot snapshot(const TickRecord& r);

inline constexpr int kLogVersion = 1;

/// Line-delimited JSON: a header record, then one record per tick.
class TickLogger {
public:
    TickLogger(std::ostream& out, const DHChain& chain, const ControllerConfig& cfg, const ServoModel& servo,
               std::span<const double> q0);
    void write(const TickRecord& r);

private:
    std::ostream& out_;
};

class LogError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ReplayReport {
    std::size_t ticks = 0;
    bool identical = true;            // every replayed q_d equals the logged one bit for bit
    std::size_t first_mismatch = 0;   // tick index, when not identical
    double max_qd_diff = 0.0;
    double rms_err_t = 0.0;           // translation tracking error over pose ticks
    double max_err_t = 0.0;
    double final_err_t = 0.0;
    JointVector final_q_d;
};

/// Re-runs the logged targets through a fresh controller and simulated
/// device. Throws LogError with the line number on malformed input.
ReplayReport replay(std::istream& log);

/// Timed target list for scripted leaders and local simulation runs.
struct ScriptEntry {
    double at = 0.0;
    Target target;
};

/// JSONL, one object per line:
///   {"at": s, "type": "target_joints", "q": [...], "gripper": g}
///   {"at": s, "type": "target_pose", "t": [x, y, z], "rpy": [r, p, y], "gripper": g}
///   {"at": s, "type": "target_pose", "t": [...], "r": [w, x, y, z]}
/// Entries must be in non-decreasing time order. Throws LogError with the
/// line number.
std::vector<ScriptEntry> parse_script(std::istream& in, const DHChain& chain, const master::Workspace& ws);
std::vector<ScriptEntry> load_script(const std::filesystem::path& path, const DHChain& chain,
                                     const master::Workspace& ws);
/// Entry active at time t (the last with at ≤ t), if any.
const ScriptEntry* script_at(const std::vector<ScriptEntry>& script, double t);

}  // namespace telearm::app
