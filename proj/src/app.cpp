#include "telearm/app.hpp"

#include <cmath>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "target_json.hpp"
#include "telearm/relay.hpp"
#include "telearm/session.hpp"
#include "telearm/ui_bridge.hpp"

namespace telearm::app {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

double norm_diff(const JointVector& a, const JointVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

void emit(CommandIo& io, const json& j) { io.out << j.dump() << std::endl; }

std::unique_ptr<DevicePort> open_port(const AppConfig& cfg, const DHChain& chain) {
    try {
        return open_device(cfg.device, chain, cfg.servo);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

std::unique_ptr<std::ofstream> open_log(const std::string& path) {
    if (path.empty()) return nullptr;
    auto f = std::make_unique<std::ofstream>(path);
    if (!*f) throw ConfigError("cannot write log file " + path);
    return f;
}

net::Endpoint endpoint(const std::string& text, const char* what, std::string_view default_host = "127.0.0.1") {
    if (text.empty()) throw ConfigError(std::string(what) + " endpoint is not set");
    try {
        return net::parse_endpoint(text, default_host);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string(what) + ": " + e.what());
    }
}

std::unique_ptr<UiBridge> start_ui(const AppConfig& cfg, UiContext ctx, CommandIo& io) {
    if (cfg.ui.empty()) return nullptr;
    auto ui = std::make_unique<UiBridge>(std::move(ctx), endpoint(cfg.ui, "ui"), std::max(cfg.ui_rate_hz, 20.0));
    ui->start();
    io.err << "telearm: cockpit bridge on port " << ui->port() << std::endl;
    return ui;
}

// Script, constant joint target or constant pose target, in that order.
std::vector<ScriptEntry> targets_from(const CommandOptions& o, const DHChain& chain, const master::Workspace& ws) {
    if (!o.script.empty()) {
        try {
            return load_script(o.script, chain, ws);
        } catch (const LogError& e) {
            throw ConfigError(e.what());
        }
    }
    if (o.target_q) {
        if (o.target_q->size() != chain.dof()) {
            throw ConfigError("--target-q needs " + std::to_string(chain.dof()) + " values");
        }
        return {{0.0, joint_target(chain, *o.target_q, o.gripper)}};
    }
    if (o.target_pose) {
        const auto& p = *o.target_pose;
        if (p.size() != 3 && p.size() != 6) throw ConfigError("--target-pose needs x,y,z or x,y,z,roll,pitch,yaw");
        const std::array<double, 3> rpy = p.size() == 6 ? std::array<double, 3>{p[3], p[4], p[5]}
                                                        : std::array<double, 3>{0.0, 0.0, 0.0};
        return {{0.0, pose_target(ws, {p[0], p[1], p[2]}, rpy, o.gripper)}};
    }
    return {};
}

double planned_duration(const CommandOptions& o, const std::vector<ScriptEntry>& script) {
    if (o.duration_s > 0.0) return o.duration_s;
    if (script.empty()) return 0.0;
    return script.back().at + o.hold_s;
}

json state_json(const StateSnapshot& s) {
    json j;
    j["final_q"] = s.q;
    j["final_q_d"] = s.q_d;
    j["gripper"] = s.gripper;
    j["err_t"] = s.err_t;
    j["err_r"] = s.err_r;
    j["mode"] = s.mode;
    return j;
}

}  // namespace

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const LogError*>(&e) ||
        dynamic_cast<const master::CalibrationError*>(&e)) {
        return kExitConfig;
    }
    if (dynamic_cast<const DeviceError*>(&e)) return kExitDevice;
    if (dynamic_cast<const net::NetworkError*>(&e)) return kExitNetwork;
    return kExitFailure;
}

int cmd_follow(const AppConfig& cfg, const CommandOptions& o, CommandIo io) {
    if (cfg.listen.empty() == cfg.connect.empty()) throw ConfigError("follow needs exactly one of --listen or --connect");
    const DHChain chain = load_chain(cfg);
    auto log = open_log(o.log);
    Follower f(cfg, chain, open_port(cfg, chain), log.get());
    f.start();
    if (!cfg.listen.empty()) io.err << "telearm: following on port " << f.port() << std::endl;
    auto ui = start_ui(cfg, UiContext{chain, cfg.workspace, &f.state(), &f.targets(), "follow"}, io);
    f.run(io.stop, o.idle_exit_s);
    if (ui) ui->stop();
    if (log) log->flush();

    const FollowerStats s = f.stats();
    json j = state_json(f.state().latest());
    j["command"] = "follow";
    j["ticks"] = s.ticks;
    j["targets"] = s.targets;
    j["sessions"] = s.sessions;
    j["seq_rejected"] = s.seq_rejected;
    j["p99_tick_jitter_ms"] = s.p99_tick_jitter * 1e3;
    j["max_tick_jitter_ms"] = s.max_tick_jitter * 1e3;
    emit(io, j);
    return kExitOk;
}

int cmd_lead(const AppConfig& cfg, const CommandOptions& o, CommandIo io) {
    const DHChain chain = load_chain(cfg);
    if (cfg.connect.empty()) throw ConfigError("lead needs --connect (a relay or a listening follower)");

    const std::vector<ScriptEntry> script = targets_from(o, chain, cfg.workspace);
    std::string source = o.source;
    if (source.empty()) {
        if (!script.empty()) source = "script";
        else if (!cfg.ui.empty()) source = "ui";
        else source = "pots";
    }
    if (source != "script" && source != "ui" && source != "pots") {
        throw ConfigError("--source must be script, ui or pots");
    }
    if (source == "script" && script.empty()) throw ConfigError("lead needs --script, --target-q or --target-pose");
    if (source == "ui" && cfg.ui.empty()) throw ConfigError("--source ui needs --ui");
    if (o.mode != "joint" && o.mode != "task") throw ConfigError("--mode must be joint or task");

    // Master potentiometers: calibration from file, widened as the operator
    // moves the pots.
    std::unique_ptr<DevicePort> master;
    master::CalibrationState cal;
    std::optional<master::PotSmoother> smoother;
    if (source == "pots") {
        if (cfg.device == "sim") throw ConfigError("lead from pots needs a serial master device (--device serial:PORT)");
        if (!cfg.calibration_file.empty() && std::filesystem::exists(cfg.calibration_file)) {
            cal = master::load_calibration(cfg.calibration_file);
        } else if (o.mode == "task") {
            throw ConfigError("task-space lead needs a calibration file (run telearm calibrate first)");
        }
        master = open_port(cfg, chain);
        smoother.emplace(cfg.pot_smoothing);
    }

    Leader leader(cfg, chain);
    leader.connect();
    io.err << "telearm: session accepted" << std::endl;

    TargetBoard board;
    auto ui = start_ui(cfg, UiContext{chain, cfg.workspace, &leader.state(), source == "ui" ? &board : nullptr, "lead"},
                       io);

    auto last_poll = Clock::now();
    Leader::Source fn = [&](double t) -> std::optional<Target> {
        if (source == "script") {
            const ScriptEntry* e = script_at(script, t);
            return e ? std::optional<Target>(e->target) : std::nullopt;
        }
        if (source == "ui") return board.get();
        const auto now = Clock::now();
        master->update(std::chrono::duration<double>(now - last_poll).count());
        last_poll = now;
        const auto raw = master->pots();
        if (!raw) return std::nullopt;
        const master::PotReading r = smoother->filter(*raw);
        cal = master::ingest(cal, r);
        try {
            if (o.mode == "joint") {
                const master::JointCommand c = master::map_to_joints(cal, r, chain);
                return joint_target(chain, c.q, c.gripper);
            }
            const Pose p = master::map_to_pose(cal, r, cfg.workspace);
            // All six channels are taken by the pose; the gripper stays where --gripper put it.
            return pose_target(cfg.workspace, p.t.vec3(), p.r, o.gripper);
        } catch (const master::CalibrationError&) {
            return std::nullopt;  // keep moving the pots
        }
    };

    leader.run(fn, io.stop, planned_duration(o, script));
    if (ui) ui->stop();
    if (source == "pots" && !cfg.calibration_file.empty() && cal.calibrated()) {
        master::save_calibration(cal, cfg.calibration_file);
    }

    const LeaderStats s = leader.stats();
    json j = state_json(leader.state().latest());
    j["command"] = "lead";
    j["targets_sent"] = s.targets_sent;
    j["reports"] = s.reports;
    j["last_ack"] = s.last_ack;
    j["latency_ms"] = s.latency_ms >= 0.0 ? json(s.latency_ms) : json(nullptr);
    leader.close();
    emit(io, j);
    return kExitOk;
}

int cmd_relay(const AppConfig& cfg, const CommandOptions& o, CommandIo io) {
    net::RelayOptions ro;
    ro.leader_listen = endpoint(cfg.relay_leader, "relay leader", "0.0.0.0");
    ro.follower_listen = endpoint(cfg.relay_follower, "relay follower", "0.0.0.0");
    ro.to_follower = cfg.faults;
    ro.to_leader = cfg.faults;
    ro.to_leader.seed = cfg.faults.seed + 1;  // independent drops per direction
    ro.stale_timeout_s = cfg.stale_timeout_s;
    net::Relay relay(ro);
    relay.start();
    io.err << "telearm: relay leader port " << relay.leader_port() << ", follower port " << relay.follower_port()
           << std::endl;

    const auto t0 = Clock::now();
    while (!io.stop) {
        if (o.duration_s > 0.0 && std::chrono::duration<double>(Clock::now() - t0).count() >= o.duration_s) break;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    relay.stop();
    const net::RelayStats s = relay.stats();
    emit(io, {{"command", "relay"},
              {"to_follower", s.to_follower},
              {"to_leader", s.to_leader},
              {"buffered_drops", s.buffered_drops},
              {"fault_drops", s.fault_drops},
              {"refused", s.refused},
              {"protocol_errors", s.protocol_errors}});
    return kExitOk;
}

int cmd_sim(const AppConfig& cfg, const CommandOptions& o, CommandIo io) {
    const DHChain chain = load_chain(cfg);
    const std::vector<ScriptEntry> script = targets_from(o, chain, cfg.workspace);
    const bool interactive = !cfg.ui.empty();
    if (script.empty() && !interactive) throw ConfigError("sim needs --script, --target-q, --target-pose or --ui");
    const double duration = planned_duration(o, script);

    auto log = open_log(o.log);
    ControlLoop loop(chain, cfg.controller, open_port(cfg, chain));
    std::optional<TickLogger> logger;
    if (log) logger.emplace(*log, chain, cfg.controller, cfg.servo, loop.initial_q());

    // Virtual time unless someone is watching or a real arm is attached.
    const bool realtime = interactive || cfg.device != "sim";
    const double T = 1.0 / cfg.tick_hz;
    const auto period = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(T));

    StateBus bus;
    TargetBoard board;
    auto ui = start_ui(cfg, UiContext{chain, cfg.workspace, &bus, &board, "sim"}, io);

    TickRecord last;
    std::uint64_t ticks = 0;
    auto next = Clock::now();
    while (!io.stop) {
        const double t = static_cast<double>(ticks) * T;
        if (duration > 0.0 && t >= duration - 0.5 * T) break;
        std::optional<Target> target = board.get();
        if (!target) {
            if (const ScriptEntry* e = script_at(script, t)) target = e->target;
        }
        last = loop.step(target, T);
        ++ticks;
        if (logger) logger->write(last);
        if (realtime) {
            bus.publish(snapshot(last));
            next += period;
            std::this_thread::sleep_until(next);
        }
    }
    if (ui) ui->stop();
    if (log) log->flush();

    json j = state_json(snapshot(last));
    j["command"] = "sim";
    j["ticks"] = ticks;
    j["t"] = static_cast<double>(ticks) * T;
    if (last.target && !last.target->is_pose()) {
        j["joint_err"] = norm_diff(last.q, std::get<JointTarget>(last.target->mode).q);
    }
    emit(io, j);
    return kExitOk;
}

int cmd_calibrate(const AppConfig& cfg, const CommandOptions& o, CommandIo io) {
    if (cfg.calibration_file.empty()) throw ConfigError("calibrate needs --calibration FILE");
    if (cfg.device == "sim") throw ConfigError("calibrate needs a serial master device (--device serial:PORT)");
    const DHChain chain = load_chain(cfg);
    auto dev = open_port(cfg, chain);
    io.err << "telearm: move every potentiometer through its full range, then press Ctrl-C" << std::endl;

    master::CalibrationState cal;
    const auto t0 = Clock::now();
    auto last_report = t0;
    auto last_poll = t0;
    while (!io.stop) {
        const auto now = Clock::now();
        if (o.duration_s > 0.0 && std::chrono::duration<double>(now - t0).count() >= o.duration_s) break;
        dev->update(std::chrono::duration<double>(now - last_poll).count());
        last_poll = now;
        if (const auto r = dev->pots()) cal = master::ingest(cal, *r);
        if (now - last_report >= std::chrono::seconds(1) && cal.samples > 0) {
            last_report = now;
            io.err << "telearm:";
            for (std::size_t ch = 0; ch < master::kChannels; ++ch) {
                io.err << " [" << cal.min_seen[ch] << "," << cal.max_seen[ch] << "]"
                       << (cal.channel_calibrated(ch) ? "" : "*");
            }
            io.err << std::endl;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }

    json channels = json::array();
    for (std::size_t ch = 0; ch < master::kChannels; ++ch) {
        channels.push_back({{"min", cal.min_seen[ch]}, {"max", cal.max_seen[ch]}, {"ok", cal.channel_calibrated(ch)}});
    }
    emit(io, {{"command", "calibrate"}, {"samples", cal.samples}, {"calibrated", cal.calibrated()}, {"channels", channels}});
    if (cal.samples == 0) throw DeviceError("no potentiometer readings from " + cfg.device);
    if (!cal.calibrated()) {
        io.err << "telearm: some channels moved less than " << master::kMinTravel << " counts; nothing written"
               << std::endl;
        return kExitDevice;
    }
    master::save_calibration(cal, cfg.calibration_file);
    io.err << "telearm: wrote " << cfg.calibration_file << std::endl;
    return kExitOk;
}

int cmd_replay(const CommandOptions& o, CommandIo io) {
    std::ifstream in(o.replay_log);
    if (!in) throw ConfigError("cannot read log file " + o.replay_log);
    const ReplayReport r = replay(in);
    json j;
    j["command"] = "replay";
    j["ticks"] = r.ticks;
    j["identical"] = r.identical;
    if (!r.identical) j["first_mismatch"] = r.first_mismatch;
    j["max_qd_diff"] = r.max_qd_diff;
    j["rms_err_t"] = r.rms_err_t;
    j["max_err_t"] = r.max_err_t;
    j["final_err_t"] = r.final_err_t;
    j["final_q_d"] = r.final_q_d;
    emit(io, j);
    return r.identical ? kExitOk : kExitFailure;
}

}  // namespace telearm::app
