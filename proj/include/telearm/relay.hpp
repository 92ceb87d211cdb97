#pragma once

#include <cstdint>
#include <memory>

#include "telearm/net.hpp"
#include "telearm/telelink.hpp"

namespace telearm::net {

struct RelayOptions {
    Endpoint leader_listen{"0.0.0.0", 7001};
    Endpoint follower_listen{"0.0.0.0", 7002};
    link::LinkFaults to_follower;
    link::LinkFaults to_leader;
    /// A connected peer that has been silent this long may be replaced.
    double stale_timeout_s = 2.0;
    std::size_t buffer_frames = 256;
};

struct RelayStats {
    std::uint64_t to_follower = 0;  // frames written toward the follower
    std::uint64_t to_leader = 0;
    std::size_t buffered_drops = 0;  // oldest frames shed while a side was absent
    std::size_t fault_drops = 0;     // dropped by injected faults
    std::size_t refused = 0;         // connections turned away as busy
    std::size_t protocol_errors = 0;
    bool leader_connected = false;
    bool follower_connected = false;
};

/// Gateway pairing one leader with one follower. Both sides dial in, so
/// neither needs to accept inbound connections from the internet. Frames
/// are forwarded byte for byte, FIFO per direction; faults are applied
/// per direction. Runs on its own thread.
class Relay {
public:
    explicit Relay(RelayOptions options);
    ~Relay();
    Relay(const Relay&) = delete;
    Relay& operator=(const Relay&) = delete;

    /// Binds both listeners and starts serving. Throws NetworkError.
    void start();
    void stop();

    std::uint16_t leader_port() const;
    std::uint16_t follower_port() const;
    RelayStats stats() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace telearm::net
