#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/asio/io_context.hpp>
#include <boost/asio/ip/tcp.hpp>

#include "telearm/telelink.hpp"

namespace telearm::net {

namespace asio = boost::asio;
using tcp = asio::ip::tcp;
using Clock = std::chrono::steady_clock;

class NetworkError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;

    std::string to_string() const { return host + ":" + std::to_string(port); }
    friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

/// Accepts "host:port", ":port" (any host) and "port". Throws
/// std::invalid_argument on a malformed string.
Endpoint parse_endpoint(std::string_view text, std::string_view default_host = "127.0.0.1");

tcp::endpoint resolve(asio::io_context& io, const Endpoint& ep);

/// Listening socket bound to ep (port 0 picks a free port). Throws
/// NetworkError when the bind fails.
tcp::acceptor make_acceptor(asio::io_context& io, const Endpoint& ep);

/// One framed TCP stream, driven by the io_context it was created on.
/// Incoming bytes are split into frames (length and CRC checked) and
/// handed over raw; outgoing frames go through a FrameQueue so slow peers
/// shed stale targets rather than grow without bound. send() and close()
/// may be called from any thread.
class Connection : public std::enable_shared_from_this<Connection> {
public:
    using FrameHandler = std::function<void(std::vector<std::uint8_t> frame)>;
    using CloseHandler = std::function<void(const std::string& reason)>;

    static std::shared_ptr<Connection> create(tcp::socket socket, std::size_t queue_capacity = 256);

    void start(FrameHandler on_frame, CloseHandler on_close);
    void send(std::vector<std::uint8_t> frame);
    /// Sends the frame, then closes once it has been written.
    void send_and_close(std::vector<std::uint8_t> frame);
    void close();

    bool open() const noexcept { return open_; }
    std::string remote() const { return remote_; }
    std::size_t dropped() const noexcept { return dropped_; }
    std::uint64_t frames_in() const noexcept { return frames_in_; }
    std::uint64_t frames_out() const noexcept { return frames_out_; }
    Clock::time_point last_receive() const { return Clock::time_point(Clock::duration(last_rx_.load())); }

private:
    Connection(tcp::socket socket, std::size_t capacity);
    void read_more();
    void write_next();
    void shutdown(const std::string& reason);

    tcp::socket socket_;
    std::string remote_;
    link::FrameQueue queue_;
    std::vector<std::uint8_t> read_buf_;
    std::vector<std::uint8_t> pending_;
    std::vector<std::uint8_t> writing_;
    bool write_active_ = false;
    bool close_after_write_ = false;
    std::atomic<bool> open_{true};
    std::atomic<std::size_t> dropped_{0};
    std::atomic<std::uint64_t> frames_in_{0};
    std::atomic<std::uint64_t> frames_out_{0};
    std::atomic<Clock::rep> last_rx_{0};
    FrameHandler on_frame_;
    CloseHandler on_close_;
};

/// Blocking connect with a deadline; throws NetworkError.
tcp::socket connect(asio::io_context& io, const Endpoint& ep, std::chrono::milliseconds timeout);

}  // namespace telearm::net
