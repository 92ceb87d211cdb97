#include "telearm/session.hpp"

#include <algorithm>
#include <condition_variable>
#include <iostream>
#include <mutex>
#include <thread>

#include <boost/asio/executor_work_guard.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/steady_timer.hpp>

namespace telearm::app {

namespace asio = boost::asio;
using net::Clock;
using net::tcp;

namespace {

std::chrono::nanoseconds period_of(double hz) {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::duration<double>(1.0 / hz));
}

std::uint64_t micros_since(Clock::time_point epoch) {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - epoch).count());
}

const char* describe(link::HelloStatus s) {
    switch (s) {
        case link::HelloStatus::Request: return "request";
        case link::HelloStatus::Accepted: return "accepted";
        case link::HelloStatus::RefusedVersion: return "refused (protocol version)";
        case link::HelloStatus::RefusedBusy: return "refused (another leader is active)";
    }
    return "?";
}

// Re-arms itself every period until cancelled.
void every(asio::steady_timer& timer, std::chrono::nanoseconds period, std::function<void()> fn) {
    timer.expires_after(period);
    timer.async_wait([&timer, period, fn = std::move(fn)](boost::system::error_code ec) mutable {
        if (ec) return;
        fn();
        every(timer, period, std::move(fn));
    });
}

}  // namespace

// ---------------------------------------------------------------- follower

struct Follower::Impl {
    Impl(AppConfig c, DHChain chain, std::unique_ptr<DevicePort> device, std::ostream* log)
        : cfg(std::move(c)),
          loop(std::move(chain), cfg.controller, std::move(device)),
          state_timer(io),
          ping_timer(io),
          retry_timer(io),
          epoch(Clock::now()),
          tick_log(log) {}

    AppConfig cfg;
    asio::io_context io;
    std::optional<tcp::acceptor> acceptor;
    std::optional<tcp::endpoint> relay;
    std::shared_ptr<net::Connection> peer;
    ControlLoop loop;
    TargetBoard board;
    StateBus bus;
    asio::steady_timer state_timer;
    asio::steady_timer ping_timer;
    asio::steady_timer retry_timer;
    Clock::time_point epoch;
    std::ostream* tick_log;

    // io thread only
    link::SeqFilter seq;
    bool session = false;
    std::uint32_t out_seq = 0;

    std::thread io_thread;
    std::thread control_thread;
    std::atomic<bool> running{false};
    std::atomic<Clock::rep> last_target{0};
    std::uint16_t port = 0;

    mutable std::mutex mutex;  // stats and failure
    FollowerStats stats;
    std::vector<double> jitter;  // ring of recent period deviations
    std::size_t jitter_at = 0;
    std::exception_ptr failure;

    template <class F>
    void count(F f) {
        std::lock_guard lock(mutex);
        f(stats);
    }

    void send(link::Body body) {
        if (!peer || !peer->open()) return;
        peer->send(link::encode(link::TeleopFrame{++out_seq, micros_since(epoch), std::move(body)}));
    }

    void accept() {
        acceptor->async_accept([this](boost::system::error_code ec, tcp::socket socket) {
            if (ec) {
                if (ec != asio::error::operation_aborted) accept();
                return;
            }
            auto conn = net::Connection::create(std::move(socket));
            if (peer && peer->open()) {
                const double silent = std::chrono::duration<double>(Clock::now() - peer->last_receive()).count();
                if (silent < cfg.stale_timeout_s) {
                    std::cerr << "follow: refusing leader " << conn->remote() << ", session busy\n";
                    conn->start(nullptr, nullptr);
                    conn->send_and_close(link::encode(link::TeleopFrame{
                        0, micros_since(epoch),
                        link::Hello{link::Role::Follower, link::kProtoVersion, link::HelloStatus::RefusedBusy}}));
                    count([](FollowerStats& s) { ++s.refused; });
                    accept();
                    return;
                }
                std::cerr << "follow: replacing stale leader " << peer->remote() << "\n";
                peer->close();
            }
            adopt(conn);
            accept();
        });
    }

    void dial() {
        auto socket = std::make_shared<tcp::socket>(io);
        socket->async_connect(*relay, [this, socket](boost::system::error_code ec) {
            if (!running) return;
            if (ec) {
                retry();
                return;
            }
            std::cerr << "follow: connected to relay " << cfg.connect << "\n";
            adopt(net::Connection::create(std::move(*socket)));
        });
    }

    void retry() {
        retry_timer.expires_after(std::chrono::milliseconds(500));
        retry_timer.async_wait([this](boost::system::error_code ec) {
            if (!ec && running) dial();
        });
    }

    void adopt(std::shared_ptr<net::Connection> conn) {
        peer = conn;
        session = false;
        seq.reset();
        std::weak_ptr<net::Connection> weak = conn;
        conn->start([this](std::vector<std::uint8_t> bytes) { on_frame(bytes); },
                    [this, weak](const std::string& reason) {
                        if (peer != weak.lock()) return;
                        std::cerr << "follow: link closed (" << reason << ")\n";
                        peer.reset();
                        session = false;
                        if (relay && running) retry();
                    });
    }

    void on_frame(const std::vector<std::uint8_t>& bytes) {
        count([](FollowerStats& s) { ++s.frames_in; });
        const auto r = link::decode(bytes);
        if (r.status != link::DecodeStatus::Ok) {
            count([](FollowerStats& s) { ++s.bad_frames; });
            return;
        }
        const link::TeleopFrame& f = *r.frame;
        if (const auto* h = std::get_if<link::Hello>(&f.body)) {
            on_hello(f, *h);
            return;
        }
        if (!seq.accept(f.seq)) {
            count([](FollowerStats& s) { ++s.seq_rejected; });
            return;
        }
        std::visit(
            [&](const auto& b) {
                using B = std::decay_t<decltype(b)>;
                if constexpr (std::is_same_v<B, link::JointTargetMsg> || std::is_same_v<B, link::PoseTargetMsg>) {
                    if (!session) {
                        count([](FollowerStats& s) { ++s.ignored; });
                        return;
                    }
                    try {
                        Target t = from_link(b, loop.chain(), cfg.workspace);
                        t.seq = f.seq;
                        board.set(std::move(t));
                        last_target = Clock::now().time_since_epoch().count();
                        count([](FollowerStats& s) { ++s.targets; });
                    } catch (const std::invalid_argument&) {
                        count([](FollowerStats& s) { ++s.bad_frames; });
                    }
                } else if constexpr (std::is_same_v<B, link::Ping>) {
                    send(link::Pong{b.nonce});
                    count([](FollowerStats& s) { ++s.pongs_sent; });
                } else if constexpr (std::is_same_v<B, link::Pong>) {
                    const double rtt_us = static_cast<double>(micros_since(epoch) - b.nonce);
                    bus.set_latency(rtt_us / 2000.0);
                }
            },
            f.body);
    }

    void on_hello(const link::TeleopFrame& f, const link::Hello& h) {
        if (h.role != link::Role::Leader || h.status != link::HelloStatus::Request) return;
        if (h.proto_version != link::kProtoVersion) {
            std::cerr << "follow: refusing leader with protocol version " << int(h.proto_version) << "\n";
            const link::Hello no{link::Role::Follower, link::kProtoVersion, link::HelloStatus::RefusedVersion};
            session = false;
            count([](FollowerStats& s) { ++s.refused; });
            if (relay) {
                send(no);
            } else if (peer) {
                peer->send_and_close(link::encode(link::TeleopFrame{++out_seq, micros_since(epoch), no}));
            }
            return;
        }
        seq.reset();
        seq.accept(f.seq);
        session = true;
        count([](FollowerStats& s) { ++s.sessions; });
        send(link::Hello{link::Role::Follower, link::kProtoVersion, link::HelloStatus::Accepted});
    }

    void report() {
        if (!session) return;
        const StateSnapshot s = bus.latest();
        if (s.q.empty()) return;
        send(link::StateReport{s.q, std::clamp(s.gripper, 0.0, 1.0), s.ack_seq});
        count([](FollowerStats& st) { ++st.reports_sent; });
    }

    void control() {
        try {
            std::optional<TickLogger> logger;
            if (tick_log) logger.emplace(*tick_log, loop.chain(), cfg.controller, cfg.servo, loop.initial_q());
            const auto period = period_of(cfg.tick_hz);
            const double T = 1.0 / cfg.tick_hz;
            auto next = Clock::now();
            auto last = next;
            while (running) {
                next += period;
                std::this_thread::sleep_until(next);
                const auto now = Clock::now();
                const double measured = std::chrono::duration<double>(now - last).count();
                last = now;
                if (now - next > 5 * period) next = now;  // fell far behind, do not burst
                const TickRecord rec = loop.step(board.get(), std::clamp(measured, 0.5 * T, 2.0 * T));
                if (logger) logger->write(rec);
                bus.publish(snapshot(rec));
                std::lock_guard lock(mutex);
                if (++stats.ticks == 1) continue;  // the first period includes start-up
                const double dev = std::abs(measured - T);
                constexpr std::size_t kWindow = 6000;
                if (jitter.size() < kWindow) {
                    jitter.push_back(dev);
                } else {
                    jitter[jitter_at++ % kWindow] = dev;
                }
            }
        } catch (...) {
            std::lock_guard lock(mutex);
            failure = std::current_exception();
        }
    }
};

Follower::Follower(AppConfig config, DHChain chain, std::unique_ptr<DevicePort> device, std::ostream* tick_log) {
    config.validate();
    impl_ = std::make_unique<Impl>(std::move(config), std::move(chain), std::move(device), tick_log);
    // State is visible before the first tick.
    StateSnapshot s;
    s.q = impl_->loop.initial_q();
    s.q_d = s.q;
    s.gripper = impl_->loop.device().state().gripper;
    impl_->bus.publish(std::move(s));
}

Follower::~Follower() { stop(); }

void Follower::start() {
    Impl& m = *impl_;
    if (m.cfg.listen.empty() == m.cfg.connect.empty()) {
        throw ConfigError("follow needs exactly one of --listen or --connect");
    }
    if (!m.cfg.listen.empty()) {
        m.acceptor.emplace(net::make_acceptor(m.io, net::parse_endpoint(m.cfg.listen, "0.0.0.0")));
        m.port = m.acceptor->local_endpoint().port();
    } else {
        const auto ep = net::parse_endpoint(m.cfg.connect);
        m.relay = net::resolve(m.io, ep);
        // The first dial is blocking so an unreachable relay is reported up front.
        m.adopt(net::Connection::create(net::connect(m.io, ep, std::chrono::seconds(3))));
    }
    m.running = true;
    if (m.acceptor) m.accept();
    every(m.state_timer, period_of(m.cfg.state_rate_hz), [&m] { m.report(); });
    every(m.ping_timer, std::chrono::seconds(1), [&m] {
        if (m.session) m.send(link::Ping{micros_since(m.epoch)});
    });
    m.io_thread = std::thread([&m] { m.io.run(); });
    m.control_thread = std::thread([&m] { m.control(); });
}

void Follower::stop() {
    Impl& m = *impl_;
    m.running = false;
    if (m.control_thread.joinable()) m.control_thread.join();
    if (!m.io_thread.joinable()) return;
    asio::post(m.io, [&m] {
        boost::system::error_code ec;
        if (m.acceptor) m.acceptor->close(ec);
        if (m.peer) m.peer->close();
        m.state_timer.cancel();
        m.ping_timer.cancel();
        m.retry_timer.cancel();
        asio::post(m.io, [&m] { m.io.stop(); });
    });
    m.io_thread.join();
}

void Follower::run(const std::atomic<bool>& stop_flag, double idle_exit_s) {
    Impl& m = *impl_;
    const auto started = Clock::now();
    while (!stop_flag) {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
        {
            std::lock_guard lock(m.mutex);
            if (m.failure) break;
        }
        if (idle_exit_s > 0.0) {
            const auto last = m.last_target.load();
            const auto since = last == 0 ? started : Clock::time_point(Clock::duration(last));
            if (std::chrono::duration<double>(Clock::now() - since).count() > idle_exit_s) break;
        }
    }
    stop();
    std::lock_guard lock(m.mutex);
    if (m.failure) std::rethrow_exception(m.failure);
}

std::uint16_t Follower::port() const { return impl_->port; }

FollowerStats Follower::stats() const {
    std::vector<double> dev;
    FollowerStats s;
    {
        std::lock_guard lock(impl_->mutex);
        s = impl_->stats;
        dev = impl_->jitter;
    }
    if (!dev.empty()) {
        s.max_tick_jitter = *std::max_element(dev.begin(), dev.end());
        auto p99 = dev.begin() + static_cast<std::ptrdiff_t>(0.99 * static_cast<double>(dev.size() - 1));
        std::nth_element(dev.begin(), p99, dev.end());
        s.p99_tick_jitter = *p99;
    }
    return s;
}

TargetBoard& Follower::targets() { return impl_->board; }
StateBus& Follower::state() { return impl_->bus; }
const DHChain& Follower::chain() const { return impl_->loop.chain(); }

// ------------------------------------------------------------------ leader

struct Leader::Impl {
    Impl(AppConfig c, DHChain ch)
        : cfg(std::move(c)), chain(std::move(ch)), work(asio::make_work_guard(io)), ping_timer(io), epoch(Clock::now()) {}

    AppConfig cfg;
    DHChain chain;
    asio::io_context io;
    asio::executor_work_guard<asio::io_context::executor_type> work;  // keeps run() alive before connect
    asio::steady_timer ping_timer;
    std::shared_ptr<net::Connection> conn;
    std::thread io_thread;
    Clock::time_point epoch;
    std::mutex send_mutex;
    std::uint32_t out_seq = 0;
    StateBus bus;
    link::SeqFilter seq;  // io thread only

    mutable std::mutex mutex;
    std::condition_variable cv;
    std::optional<link::HelloStatus> reply;
    std::string closed_reason;
    LeaderStats stats;
    std::optional<Target> last_sent;

    std::uint32_t send(link::Body body) {
        // Pings come from the io thread, targets from the caller; the lock
        // keeps post order equal to seq order.
        std::lock_guard lock(send_mutex);
        const std::uint32_t seq_no = ++out_seq;
        conn->send(link::encode(link::TeleopFrame{seq_no, micros_since(epoch), std::move(body)}));
        return seq_no;
    }

    void on_frame(const std::vector<std::uint8_t>& bytes) {
        const auto r = link::decode(bytes);
        if (r.status != link::DecodeStatus::Ok) return;
        const link::TeleopFrame& f = *r.frame;
        if (const auto* h = std::get_if<link::Hello>(&f.body)) {
            if (h->role != link::Role::Follower || h->status == link::HelloStatus::Request) return;
            seq.reset();
            seq.accept(f.seq);
            std::lock_guard lock(mutex);
            reply = h->status;
            cv.notify_all();
            return;
        }
        if (!seq.accept(f.seq)) return;
        if (const auto* p = std::get_if<link::Ping>(&f.body)) {
            send(link::Pong{p->nonce});
        } else if (const auto* p = std::get_if<link::Pong>(&f.body)) {
            const double ms = static_cast<double>(micros_since(epoch) - p->nonce) / 2000.0;
            bus.set_latency(ms);
            std::lock_guard lock(mutex);
            stats.latency_ms = ms;
        } else if (const auto* s = std::get_if<link::StateReport>(&f.body)) {
            if (s->q.size() != chain.dof()) return;
            StateSnapshot snap;
            snap.q = s->q;
            snap.gripper = s->gripper;
            snap.ack_seq = s->ack_seq;
            std::lock_guard lock(mutex);
            ++stats.reports;
            stats.last_ack = s->ack_seq;
            snap.target = last_sent;
            if (last_sent) {
                std::tie(snap.err_t, snap.err_r) = tracking_error(chain, snap.q, *last_sent);
                snap.mode = last_sent->is_pose() ? "task" : "joint";
            }
            snap.t = std::chrono::duration<double>(Clock::now() - epoch).count();
            bus.publish(std::move(snap));
        }
    }
};

Leader::Leader(AppConfig config, DHChain chain) {
    config.validate();
    impl_ = std::make_unique<Impl>(std::move(config), std::move(chain));
}

Leader::~Leader() { close(); }

void Leader::connect(std::chrono::milliseconds timeout) {
    Impl& m = *impl_;
    if (m.cfg.connect.empty()) throw ConfigError("lead needs --connect");
    const auto deadline = Clock::now() + timeout;
    m.conn = net::Connection::create(net::connect(m.io, net::parse_endpoint(m.cfg.connect), timeout));
    m.conn->start([&m](std::vector<std::uint8_t> bytes) { m.on_frame(bytes); },
                  [&m](const std::string& reason) {
                      std::lock_guard lock(m.mutex);
                      m.closed_reason = reason;
                      m.cv.notify_all();
                  });
    m.io_thread = std::thread([&m] { m.io.run(); });
    m.send(link::Hello{link::Role::Leader, link::kProtoVersion, link::HelloStatus::Request});

    std::unique_lock lock(m.mutex);
    m.cv.wait_until(lock, deadline, [&m] { return m.reply || !m.closed_reason.empty(); });
    if (m.reply == link::HelloStatus::Accepted) {
        lock.unlock();
        asio::post(m.io, [&m] {
            every(m.ping_timer, std::chrono::seconds(1), [&m] { m.send(link::Ping{micros_since(m.epoch)}); });
        });
        return;
    }
    const std::string why = m.reply          ? std::string("follower ") + describe(*m.reply)
                            : !m.closed_reason.empty() ? "link closed before Hello reply (" + m.closed_reason + ")"
                                                       : "no Hello reply from the follower";
    lock.unlock();
    close();
    throw net::NetworkError(why);
}

void Leader::run(const Source& source, const std::atomic<bool>& stop, double duration_s) {
    Impl& m = *impl_;
    const auto period = period_of(m.cfg.target_rate_hz);
    const auto start = Clock::now();
    auto next = start;
    while (!stop) {
        const double t = std::chrono::duration<double>(Clock::now() - start).count();
        if (duration_s > 0.0 && t >= duration_s) break;
        if (!m.conn->open()) {
            std::lock_guard lock(m.mutex);
            throw net::NetworkError("link lost (" + m.closed_reason + ")");
        }
        if (auto target = source(t)) {
            target->seq = m.send(to_link(*target));
            std::lock_guard lock(m.mutex);
            ++m.stats.targets_sent;
            m.last_sent = std::move(target);
        }
        next += period;
        std::this_thread::sleep_until(next);
    }
}

void Leader::close() {
    Impl& m = *impl_;
    if (!m.io_thread.joinable()) return;
    asio::post(m.io, [&m] {
        m.ping_timer.cancel();
        if (m.conn) m.conn->close();
        // A ping already queued would re-arm its timer, so stop outright once
        // the close has run.
        asio::post(m.io, [&m] { m.io.stop(); });
    });
    m.io_thread.join();
}

LeaderStats Leader::stats() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->stats;
}

StateBus& Leader::state() { return impl_->bus; }

}  // namespace telearm::app
