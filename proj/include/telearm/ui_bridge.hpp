#pragma once

#include <memory>
#include <string>

#include "telearm/net.hpp"
#include "telearm/runtime.hpp"

namespace telearm::app {

inline constexpr int kUiSchemaVersion = 1;

struct UiStats {
    std::size_t clients = 0;
    std::size_t connections = 0;  // total accepted
    std::uint64_t commands = 0;   // accepted target/mode/gripper messages
    std::uint64_t errors = 0;     // error frames sent back
    std::uint64_t unknown = 0;    // well-formed messages of unknown type
    std::uint64_t states_sent = 0;
};

/// What the bridge shows and, when targets is set, where operator commands
/// go. Without a target board every client is read-only.
struct UiContext {
    DHChain chain;
    master::Workspace workspace;
    StateBus* state = nullptr;
    TargetBoard* targets = nullptr;
    std::string node;  // "follow", "lead" or "sim"
};

/// WebSocket endpoint for the cockpit. Each client gets a hello message
/// (DH table, limits, workspace, role) and an immediate state snapshot,
/// then state at rate_hz. The first client to connect is the operator;
/// when it leaves the longest-connected remaining client takes over.
class UiBridge {
public:
    UiBridge(UiContext context, net::Endpoint listen, double rate_hz = 30.0);
    ~UiBridge();
    UiBridge(const UiBridge&) = delete;
    UiBridge& operator=(const UiBridge&) = delete;

    /// Binds and starts serving on its own thread. Throws net::NetworkError.
    void start();
    void stop();
    std::uint16_t port() const;
    UiStats stats() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Messages as the bridge sends them, exposed for tests and the Python
/// bindings. Both return serialized JSON.
std::string ui_hello_message(const UiContext& context, bool operator_role, double rate_hz);
std::string ui_state_message(const StateSnapshot& state);

/// Applies one inbound message. Returns an error text for the client, or
/// an empty string when the message was accepted or ignored. unknown is
/// set for well-formed messages of an unknown type.
std::string ui_apply_command(const UiContext& context, const std::string& text, bool& unknown);

}  // namespace telearm::app
