#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "telearm/controller.hpp"
#include "telearm/master.hpp"
#include "telearm/simdevice.hpp"
#include "telearm/telelink.hpp"

namespace telearm::app {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Everything a telearm process needs, loadable from a JSON file and
/// overridable flag by flag. Empty endpoint strings mean "not used".
struct AppConfig {
    std::string device = "sim";  // "sim" or "serial:PORT"
    std::string chain_file;      // empty: built-in UMIRobot table
    ControllerConfig controller;
    double tick_hz = 100.0;
    ServoModel servo;

    std::string listen;   // follower: accept leaders directly
    std::string connect;  // follower: register with a relay; leader: relay or follower
    std::string relay_leader = ":7001";
    std::string relay_follower = ":7002";
    link::LinkFaults faults;  // injected by the relay, both directions
    double state_rate_hz = 50.0;
    double target_rate_hz = 50.0;
    double stale_timeout_s = 2.0;

    std::string ui;  // WebSocket endpoint for the cockpit
    double ui_rate_hz = 30.0;

    master::Workspace workspace;
    std::string calibration_file;
    double pot_smoothing = 0.0;

    /// Throws ConfigError naming the offending field.
    void validate() const;

    friend bool operator==(const AppConfig&, const AppConfig&) = default;
};

/// Strict parse: unknown keys and wrong types are ConfigErrors. Missing
/// keys keep their defaults.
AppConfig parse_config(const std::string& json_text);
std::string serialize_config(const AppConfig& config);
AppConfig load_config(const std::filesystem::path& path);

/// The chain named by config.chain_file, or the UMIRobot table.
DHChain load_chain(const AppConfig& config);

}  // namespace telearm::app
