#pragma once

#include <atomic>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "telearm/app_config.hpp"

namespace telearm::app {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,  // replay diverged, controller failure
    kExitConfig = 2,
    kExitDevice = 3,
    kExitNetwork = 4,
};

/// Per-command options that do not belong in a config file.
struct CommandOptions {
    std::string script;                             // lead, sim: timed target file
    std::optional<std::vector<double>> target_q;    // constant joint target
    std::optional<std::vector<double>> target_pose; // x, y, z[, roll, pitch, yaw]
    double gripper = 0.0;
    double duration_s = 0.0;  // 0: derived from the targets, or run until stopped
    double hold_s = 5.0;      // time kept after the last scripted target
    double idle_exit_s = 0.0; // follow: exit once targets stop arriving
    std::string log;          // tick log (JSONL)
    std::string source;       // lead: "script", "target", "ui" or "pots"; empty picks one
    std::string mode = "joint";  // lead with pots: "joint" or "task"
    std::string replay_log;
};

/// Where a command writes. The final summary is one JSON line on out;
/// progress and errors go to err. stop is polled (SIGINT in the tool).
struct CommandIo {
    std::ostream& out;
    std::ostream& err;
    const std::atomic<bool>& stop;
};

// Each command throws ConfigError, DeviceError or net::NetworkError on
// fatal problems; run_cli maps those to exit codes.
int cmd_follow(const AppConfig& config, const CommandOptions& options, CommandIo io);
int cmd_lead(const AppConfig& config, const CommandOptions& options, CommandIo io);
int cmd_relay(const AppConfig& config, const CommandOptions& options, CommandIo io);
int cmd_sim(const AppConfig& config, const CommandOptions& options, CommandIo io);
int cmd_calibrate(const AppConfig& config, const CommandOptions& options, CommandIo io);
int cmd_replay(const CommandOptions& options, CommandIo io);

/// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e);

/// telearm {follow|lead|relay|sim|calibrate|replay} [--config FILE] [overrides].
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const std::atomic<bool>& stop);

}  // namespace telearm::app
