#pragma once

#include <atomic>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>

#include "telearm/app_config.hpp"
#include "telearm/net.hpp"
#include "telearm/runtime.hpp"

namespace telearm::app {

struct FollowerStats {
    std::uint64_t frames_in = 0;
    std::uint64_t targets = 0;         // accepted target frames
    std::uint64_t seq_rejected = 0;    // duplicate or out-of-order seq
    std::uint64_t ignored = 0;         // targets outside an accepted session
    std::uint64_t bad_frames = 0;      // CRC fine, payload not usable
    std::uint64_t sessions = 0;        // accepted Hellos
    std::uint64_t refused = 0;         // Hellos or connections turned away
    std::uint64_t reports_sent = 0;
    std::uint64_t pongs_sent = 0;
    std::uint64_t ticks = 0;
    // |measured period − nominal| (s) over the last minute of ticks
    double max_tick_jitter = 0.0;
    double p99_tick_jitter = 0.0;
};

/// Follower side of a teleoperation session: receives targets over the
/// link, runs the control loop on its own thread and reports state back.
/// With config.listen set it accepts leaders directly, one at a time; with
/// config.connect it dials a relay and reconnects when the link drops.
class Follower {
public:
    Follower(AppConfig config, DHChain chain, std::unique_ptr<DevicePort> device, std::ostream* tick_log = nullptr);
    ~Follower();
    Follower(const Follower&) = delete;
    Follower& operator=(const Follower&) = delete;

    /// Binds or dials and starts the network and control threads. Throws
    /// net::NetworkError.
    void start();
    void stop();

    /// Blocks until stop is set, the control loop fails or, when
    /// idle_exit_s > 0, no target has arrived for that long. Rethrows a
    /// control-loop failure (DeviceError, ControllerError).
    void run(const std::atomic<bool>& stop, double idle_exit_s = 0.0);

    std::uint16_t port() const;  // listening port, 0 in relay mode
    FollowerStats stats() const;
    TargetBoard& targets();
    StateBus& state();
    const DHChain& chain() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct LeaderStats {
    std::uint64_t targets_sent = 0;
    std::uint64_t reports = 0;
    std::uint32_t last_ack = 0;
    double latency_ms = -1.0;
};

/// Leader side: says Hello, waits to be accepted, then streams the latest
/// target at config.target_rate_hz. Follower StateReports land on state().
class Leader {
public:
    /// Target to stream at t seconds after start; nullopt sends nothing.
    using Source = std::function<std::optional<Target>(double t)>;

    Leader(AppConfig config, DHChain chain);
    ~Leader();
    Leader(const Leader&) = delete;
    Leader& operator=(const Leader&) = delete;

    /// Connects to config.connect and completes the Hello exchange. Throws
    /// net::NetworkError on connect failure, refusal or timeout.
    void connect(std::chrono::milliseconds timeout = std::chrono::seconds(10));
    /// Streams until stop is set or duration_s elapses (0: no limit).
    /// Throws net::NetworkError when the link drops.
    void run(const Source& source, const std::atomic<bool>& stop, double duration_s = 0.0);
    void close();

    LeaderStats stats() const;
    StateBus& state();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace telearm::app
