#include <iostream>

#include <CLI11.hpp>

#include "telearm/app.hpp"

namespace telearm::app {

namespace {

// Flag overrides applied on top of the config file.
struct Overrides {
    std::optional<std::string> device, chain, listen, connect, ui, calibration, relay_leader, relay_follower;
    std::optional<double> tick_hz, alpha, lambda, eta, limit_gain, max_speed, state_rate, target_rate, stale_timeout,
        ui_rate, delay_ms, jitter_ms, drop_rate, pot_smoothing;
    std::optional<std::uint64_t> seed;

    void add_to(CLI::App& app) {
        app.add_option("--device", device, "sim or serial:PORT");
        app.add_option("--chain", chain, "DH chain file");
        app.add_option("--tick-hz", tick_hz, "control rate");
        app.add_option("--alpha", alpha, "translation/rotation weight");
        app.add_option("--lambda", lambda, "joint velocity damping");
        app.add_option("--eta", eta, "task error gain");
        app.add_option("--limit-gain", limit_gain, "joint limit damper gain");
        app.add_option("--max-speed", max_speed, "simulated servo speed, rad/s");
        app.add_option("--listen", listen, "follow: accept leaders on HOST:PORT");
        app.add_option("--connect", connect, "relay or follower HOST:PORT");
        app.add_option("--listen-leader", relay_leader, "relay: leader side HOST:PORT");
        app.add_option("--listen-follower", relay_follower, "relay: follower side HOST:PORT");
        app.add_option("--delay-ms", delay_ms, "relay: injected one-way delay");
        app.add_option("--jitter-ms", jitter_ms, "relay: injected delay jitter");
        app.add_option("--drop-rate", drop_rate, "relay: frame drop probability");
        app.add_option("--seed", seed, "relay: fault RNG seed");
        app.add_option("--state-rate", state_rate, "state report rate, Hz");
        app.add_option("--target-rate", target_rate, "target stream rate, Hz");
        app.add_option("--stale-timeout", stale_timeout, "seconds before a silent peer may be replaced");
        app.add_option("--ui", ui, "cockpit WebSocket HOST:PORT");
        app.add_option("--ui-rate", ui_rate, "cockpit state rate, Hz");
        app.add_option("--calibration", calibration, "potentiometer calibration file");
        app.add_option("--pot-smoothing", pot_smoothing, "pot smoothing factor in [0, 1)");
    }

    void apply(AppConfig& c) const {
        if (device) c.device = *device;
        if (chain) c.chain_file = *chain;
        if (tick_hz) c.tick_hz = *tick_hz;
        if (alpha) c.controller.alpha = *alpha;
        if (lambda) c.controller.lambda = *lambda;
        if (eta) c.controller.eta = *eta;
        if (limit_gain) c.controller.limit_gain = *limit_gain;
        if (max_speed) c.servo.max_speed = *max_speed;
        if (listen) c.listen = *listen;
        if (connect) c.connect = *connect;
        if (relay_leader) c.relay_leader = *relay_leader;
        if (relay_follower) c.relay_follower = *relay_follower;
        if (delay_ms) c.faults.fixed_delay_ms = *delay_ms;
        if (jitter_ms) c.faults.jitter_ms = *jitter_ms;
        if (drop_rate) c.faults.drop_rate = *drop_rate;
        if (seed) c.faults.seed = *seed;
        if (state_rate) c.state_rate_hz = *state_rate;
        if (target_rate) c.target_rate_hz = *target_rate;
        if (stale_timeout) c.stale_timeout_s = *stale_timeout;
        if (ui) c.ui = *ui;
        if (ui_rate) c.ui_rate_hz = *ui_rate;
        if (calibration) c.calibration_file = *calibration;
        if (pot_smoothing) c.pot_smoothing = *pot_smoothing;
    }
};

void add_targets(CLI::App& sub, CommandOptions& o) {
    sub.add_option("--script", o.script, "timed targets, JSONL");
    sub.add_option("--target-q", o.target_q, "constant joint target q1,...,q5")->delimiter(',');
    sub.add_option("--target-pose", o.target_pose, "constant pose target x,y,z[,roll,pitch,yaw]")->delimiter(',');
    sub.add_option("--gripper", o.gripper, "gripper ratio for --target-q/--target-pose");
    sub.add_option("--duration", o.duration_s, "seconds to run");
    sub.add_option("--hold", o.hold_s, "seconds kept after the last scripted target");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const std::atomic<bool>& stop) {
    CLI::App app{"UMIRobot teleoperation: follower, leader, relay, simulation, calibration and replay"};
    app.name("telearm");
    app.require_subcommand(1, 1);
    app.fallthrough();

    std::string config_file;
    app.add_option("--config", config_file, "JSON config file")->check(CLI::ExistingFile);
    Overrides ov;
    ov.add_to(app);
    CommandOptions o;

    CLI::App* follow = app.add_subcommand("follow", "run the robot side");
    follow->add_option("--idle-exit", o.idle_exit_s, "exit after this many seconds without targets");
    follow->add_option("--log", o.log, "tick log, JSONL");

    CLI::App* lead = app.add_subcommand("lead", "stream targets from pots, the cockpit or a script");
    add_targets(*lead, o);
    lead->add_option("--source", o.source, "script, ui or pots")->check(CLI::IsMember({"script", "ui", "pots"}));
    lead->add_option("--mode", o.mode, "pot mapping: joint or task")->check(CLI::IsMember({"joint", "task"}));

    CLI::App* relay = app.add_subcommand("relay", "pair a leader with a follower");
    relay->add_option("--duration", o.duration_s, "seconds to run");

    CLI::App* sim = app.add_subcommand("sim", "local closed loop against the simulated arm");
    add_targets(*sim, o);
    sim->add_option("--log", o.log, "tick log, JSONL");

    CLI::App* calibrate = app.add_subcommand("calibrate", "capture potentiometer ranges");
    calibrate->add_option("--duration", o.duration_s, "seconds to capture");

    CLI::App* replay_cmd = app.add_subcommand("replay", "re-run a tick log and compare");
    replay_cmd->add_option("log", o.replay_log, "tick log written with --log")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    const CommandIo io{out, err, stop};
    try {
        if (replay_cmd->parsed()) return cmd_replay(o, io);
        AppConfig cfg = config_file.empty() ? AppConfig{} : load_config(config_file);
        ov.apply(cfg);
        cfg.validate();
        if (follow->parsed()) return cmd_follow(cfg, o, io);
        if (lead->parsed()) return cmd_lead(cfg, o, io);
        if (relay->parsed()) return cmd_relay(cfg, o, io);
        if (sim->parsed()) return cmd_sim(cfg, o, io);
        return cmd_calibrate(cfg, o, io);
    } catch (const std::exception& e) {
        err << "telearm: " << e.what() << std::endl;
        return exit_code_for(e);
    }
}

}  // namespace telearm::app
