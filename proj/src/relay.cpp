#include "telearm/relay.hpp"

#include <iostream>
#include <mutex>
#include <thread>

#include <boost/asio/post.hpp>
#include <boost/asio/steady_timer.hpp>

namespace telearm::net {

namespace {

enum class Side { Leader, Follower };

const char* name(Side s) { return s == Side::Leader ? "leader" : "follower"; }

std::vector<std::uint8_t> busy_frame() {
    return link::encode(link::TeleopFrame{0, 0, link::Hello{link::Role::Follower, link::kProtoVersion,
                                                            link::HelloStatus::RefusedBusy}});
}

}  // namespace

struct Relay::Impl {
    // One forwarding direction: frames read from `from` travel through the
    // fault line and are written to the opposite peer, or parked while it
    // is absent.
    struct Direction {
        Direction(asio::io_context& io, const link::LinkFaults& f, std::size_t cap)
            : line(f), parked(cap), timer(io) {}
        link::DelayLine<std::vector<std::uint8_t>> line;
        link::FrameQueue parked;
        asio::steady_timer timer;
        std::uint64_t forwarded = 0;
        bool timer_armed = false;
    };

    explicit Impl(RelayOptions o)
        : options(std::move(o)),
          leader_acceptor(io),
          follower_acceptor(io),
          to_follower(io, options.to_follower, options.buffer_frames),
          to_leader(io, options.to_leader, options.buffer_frames),
          epoch(Clock::now()) {}

    RelayOptions options;
    asio::io_context io;
    tcp::acceptor leader_acceptor;
    tcp::acceptor follower_acceptor;
    Direction to_follower;
    Direction to_leader;
    Clock::time_point epoch;
    std::shared_ptr<Connection> leader;
    std::shared_ptr<Connection> follower;
    std::thread thread;
    std::uint16_t leader_port = 0;
    std::uint16_t follower_port = 0;

    mutable std::mutex stats_mutex;
    RelayStats stats;

    double now() const { return std::chrono::duration<double>(Clock::now() - epoch).count(); }

    std::shared_ptr<Connection>& peer(Side s) { return s == Side::Leader ? leader : follower; }
    Direction& outbound_from(Side s) { return s == Side::Leader ? to_follower : to_leader; }

    void update_stats() {
        std::lock_guard lock(stats_mutex);
        stats.to_follower = to_follower.forwarded;
        stats.to_leader = to_leader.forwarded;
        stats.buffered_drops = to_follower.parked.dropped() + to_leader.parked.dropped();
        stats.fault_drops = to_follower.line.dropped() + to_leader.line.dropped();
        stats.leader_connected = leader && leader->open();
        stats.follower_connected = follower && follower->open();
    }

    void accept(Side side) {
        tcp::acceptor& acceptor = side == Side::Leader ? leader_acceptor : follower_acceptor;
        acceptor.async_accept([this, side](boost::system::error_code ec, tcp::socket socket) {
            if (ec) {
                if (ec != asio::error::operation_aborted) accept(side);
                return;
            }
            adopt(side, std::move(socket));
            accept(side);
        });
    }

    void adopt(Side side, tcp::socket socket) {
        auto conn = Connection::create(std::move(socket), options.buffer_frames);
        auto& current = peer(side);
        if (current && current->open()) {
            const double silent = std::chrono::duration<double>(Clock::now() - current->last_receive()).count();
            if (silent < options.stale_timeout_s) {
                std::cerr << "relay: refusing second " << name(side) << " from " << conn->remote() << "\n";
                conn->start(nullptr, nullptr);
                conn->send_and_close(busy_frame());
                std::lock_guard lock(stats_mutex);
                ++stats.refused;
                return;
            }
            std::cerr << "relay: replacing stale " << name(side) << " (" << silent << " s silent)\n";
            current->close();
        }
        current = conn;
        std::cerr << "relay: " << name(side) << " connected from " << conn->remote() << "\n";
        std::weak_ptr<Connection> weak = conn;
        conn->start(
            [this, side](std::vector<std::uint8_t> frame) { inbound(side, std::move(frame)); },
            [this, side, weak](const std::string& reason) {
                auto& slot = peer(side);
                if (slot == weak.lock()) {
                    std::cerr << "relay: " << name(side) << " disconnected (" << reason << ")\n";
                    slot.reset();
                }
                if (reason.starts_with("corrupt")) {
                    std::lock_guard lock(stats_mutex);
                    ++stats.protocol_errors;
                }
                update_stats();
            });
        // Anything parked for this side goes out first, in order.
        Direction& parked_for_me = side == Side::Leader ? to_leader : to_follower;
        while (auto f = parked_for_me.parked.pop()) {
            conn->send(std::move(*f));
            ++parked_for_me.forwarded;
        }
        update_stats();
    }

    void inbound(Side from, std::vector<std::uint8_t> frame) {
        Direction& dir = outbound_from(from);
        if (dir.line.faults().none()) {
            deliver(from, dir, std::move(frame));
        } else {
            dir.line.push(std::move(frame), now());
            release(from, dir);
        }
        update_stats();
    }

    void deliver(Side from, Direction& dir, std::vector<std::uint8_t> frame) {
        auto& target = peer(from == Side::Leader ? Side::Follower : Side::Leader);
        if (target && target->open()) {
            target->send(std::move(frame));
            ++dir.forwarded;
        } else {
            dir.parked.push(std::move(frame));
        }
    }

    void release(Side from, Direction& dir) {
        const double t = now();
        while (auto f = dir.line.pop_due(t)) deliver(from, dir, std::move(*f));
        const auto due = dir.line.next_due();
        if (!due || dir.timer_armed) return;
        dir.timer_armed = true;
        dir.timer.expires_at(epoch + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(*due)));
        dir.timer.async_wait([this, from, &dir](boost::system::error_code ec) {
            dir.timer_armed = false;
            if (ec) return;
            release(from, dir);
            update_stats();
        });
    }
};

Relay::Relay(RelayOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {
    impl_->options.to_follower.validate();
    impl_->options.to_leader.validate();
}

Relay::~Relay() { stop(); }

void Relay::start() {
    Impl& m = *impl_;
    m.leader_acceptor = make_acceptor(m.io, m.options.leader_listen);
    m.follower_acceptor = make_acceptor(m.io, m.options.follower_listen);
    m.leader_port = m.leader_acceptor.local_endpoint().port();
    m.follower_port = m.follower_acceptor.local_endpoint().port();
    m.accept(Side::Leader);
    m.accept(Side::Follower);
    m.thread = std::thread([&m] { m.io.run(); });
}

void Relay::stop() {
    Impl& m = *impl_;
    if (!m.thread.joinable()) return;
    asio::post(m.io, [&m] {
        boost::system::error_code ec;
        m.leader_acceptor.close(ec);
        m.follower_acceptor.close(ec);
        if (m.leader) m.leader->close();
        if (m.follower) m.follower->close();
        m.to_follower.timer.cancel();
        m.to_leader.timer.cancel();
        asio::post(m.io, [&m] { m.io.stop(); });
    });
    m.thread.join();
}

std::uint16_t Relay::leader_port() const { return impl_->leader_port; }
std::uint16_t Relay::follower_port() const { return impl_->follower_port; }

RelayStats Relay::stats() const {
    std::lock_guard lock(impl_->stats_mutex);
    return impl_->stats;
}

}  // namespace telearm::net
