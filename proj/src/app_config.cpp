#include "telearm/app_config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "telearm/net.hpp"

namespace telearm::app {

using nlohmann::json;

namespace {

// Reads known keys from an object and rejects anything else.
class Fields {
public:
    Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const json::exception&) {
            throw ConfigError(where_ + "." + key + ": wrong type");
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
        }
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

void check_endpoint(const std::string& value, const char* field) {
    if (value.empty()) return;
    try {
        net::parse_endpoint(value);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string(field) + ": " + e.what());
    }
}

void check_positive(double v, const char* field) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(field) + " must be > 0");
}

}  // namespace

void AppConfig::validate() const {
    try {
        controller.validate();
        servo.validate();
        faults.validate();
        workspace.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (device != "sim" && !(device.starts_with("serial:") && device.size() > 7)) {
        throw ConfigError("device must be 'sim' or 'serial:PORT'");
    }
    check_positive(tick_hz, "tick_hz");
    check_positive(state_rate_hz, "state_rate_hz");
    check_positive(target_rate_hz, "target_rate_hz");
    check_positive(stale_timeout_s, "stale_timeout_s");
    check_positive(ui_rate_hz, "ui_rate_hz");
    if (!(pot_smoothing >= 0.0 && pot_smoothing < 1.0)) throw ConfigError("pot_smoothing must lie in [0, 1)");
    check_endpoint(listen, "listen");
    check_endpoint(connect, "connect");
    check_endpoint(relay_leader, "relay_leader");
    check_endpoint(relay_follower, "relay_follower");
    check_endpoint(ui, "ui");
}

AppConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    AppConfig c;
    Fields top(j, "config");
    top.get("device", c.device);
    top.get("chain_file", c.chain_file);
    top.get("tick_hz", c.tick_hz);
    top.get("listen", c.listen);
    top.get("connect", c.connect);
    top.get("relay_leader", c.relay_leader);
    top.get("relay_follower", c.relay_follower);
    top.get("state_rate_hz", c.state_rate_hz);
    top.get("target_rate_hz", c.target_rate_hz);
    top.get("stale_timeout_s", c.stale_timeout_s);
    top.get("ui", c.ui);
    top.get("ui_rate_hz", c.ui_rate_hz);
    top.get("calibration_file", c.calibration_file);
    top.get("pot_smoothing", c.pot_smoothing);
    if (const json* k = top.child("controller")) {
        Fields f(*k, "controller");
        f.get("alpha", c.controller.alpha);
        f.get("lambda", c.controller.lambda);
        f.get("eta", c.controller.eta);
        f.get("T", c.controller.T);
        f.get("limit_gain", c.controller.limit_gain);
        f.finish();
    }
    if (const json* k = top.child("servo")) {
        Fields f(*k, "servo");
        f.get("max_speed", c.servo.max_speed);
        f.get("deadband", c.servo.deadband);
        f.get("gripper_speed", c.servo.gripper_speed);
        f.finish();
    }
    if (const json* k = top.child("faults")) {
        Fields f(*k, "faults");
        f.get("fixed_delay_ms", c.faults.fixed_delay_ms);
        f.get("jitter_ms", c.faults.jitter_ms);
        f.get("drop_rate", c.faults.drop_rate);
        f.get("seed", c.faults.seed);
        f.finish();
    }
    if (const json* k = top.child("workspace")) {
        Fields f(*k, "workspace");
        f.get("t_min", c.workspace.t_min);
        f.get("t_max", c.workspace.t_max);
        f.get("angle_min", c.workspace.angle_min);
        f.get("angle_max", c.workspace.angle_max);
        f.get("base_rotation", c.workspace.base_rotation);
        f.finish();
    }
    top.finish();
    c.validate();
    return c;
}

std::string serialize_config(const AppConfig& c) {
    json j;
    j["device"] = c.device;
    j["chain_file"] = c.chain_file;
    j["tick_hz"] = c.tick_hz;
    j["controller"] = {{"alpha", c.controller.alpha},
                       {"lambda", c.controller.lambda},
                       {"eta", c.controller.eta},
                       {"T", c.controller.T},
                       {"limit_gain", c.controller.limit_gain}};
    j["servo"] = {{"max_speed", c.servo.max_speed},
                  {"deadband", c.servo.deadband},
                  {"gripper_speed", c.servo.gripper_speed}};
    j["listen"] = c.listen;
    j["connect"] = c.connect;
    j["relay_leader"] = c.relay_leader;
    j["relay_follower"] = c.relay_follower;
    j["faults"] = {{"fixed_delay_ms", c.faults.fixed_delay_ms},
                   {"jitter_ms", c.faults.jitter_ms},
                   {"drop_rate", c.faults.drop_rate},
                   {"seed", c.faults.seed}};
    j["state_rate_hz"] = c.state_rate_hz;
    j["target_rate_hz"] = c.target_rate_hz;
    j["stale_timeout_s"] = c.stale_timeout_s;
    j["ui"] = c.ui;
    j["ui_rate_hz"] = c.ui_rate_hz;
    j["workspace"] = {{"t_min", c.workspace.t_min},
                      {"t_max", c.workspace.t_max},
                      {"angle_min", c.workspace.angle_min},
                      {"angle_max", c.workspace.angle_max},
                      {"base_rotation", c.workspace.base_rotation}};
    j["calibration_file"] = c.calibration_file;
    j["pot_smoothing"] = c.pot_smoothing;
    return j.dump(2) + "\n";
}

AppConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

DHChain load_chain(const AppConfig& config) {
    if (config.chain_file.empty()) return umirobot_chain();
    try {
        return telearm::load_chain(config.chain_file);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("chain file: ") + e.what());
    }
}

}  // namespace telearm::app
