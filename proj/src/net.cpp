#include "telearm/net.hpp"

#include <charconv>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/write.hpp>

namespace telearm::net {

Endpoint parse_endpoint(std::string_view text, std::string_view default_host) {
    Endpoint ep;
    ep.host = std::string(default_host);
    std::string_view port_text = text;
    if (const auto colon = text.rfind(':'); colon != std::string_view::npos) {
        if (colon > 0) ep.host = std::string(text.substr(0, colon));
        port_text = text.substr(colon + 1);
    }
    unsigned value = 0;
    const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), value);
    if (port_text.empty() || ec != std::errc{} || ptr != port_text.data() + port_text.size() || value > 65535) {
        throw std::invalid_argument("bad endpoint '" + std::string(text) + "' (expected host:port or :port)");
    }
    ep.port = static_cast<std::uint16_t>(value);
    return ep;
}

tcp::endpoint resolve(asio::io_context& io, const Endpoint& ep) {
    boost::system::error_code ec;
    tcp::resolver resolver(io);
    const auto results = resolver.resolve(ep.host, std::to_string(ep.port), ec);
    if (ec || results.empty()) throw NetworkError("cannot resolve " + ep.to_string() + ": " + ec.message());
    return *results.begin();
}

tcp::acceptor make_acceptor(asio::io_context& io, const Endpoint& ep) {
    const tcp::endpoint where = resolve(io, ep);
    tcp::acceptor acceptor(io);
    boost::system::error_code ec;
    acceptor.open(where.protocol(), ec);
    if (!ec) acceptor.set_option(tcp::acceptor::reuse_address(true), ec);
    if (!ec) acceptor.bind(where, ec);
    if (!ec) acceptor.listen(asio::socket_base::max_listen_connections, ec);
    if (ec) throw NetworkError("cannot listen on " + ep.to_string() + ": " + ec.message());
    return acceptor;
}

tcp::socket connect(asio::io_context& io, const Endpoint& ep, std::chrono::milliseconds timeout) {
    const tcp::endpoint where = resolve(io, ep);
    const auto deadline = Clock::now() + timeout;
    std::string last;
    while (true) {
        tcp::socket socket(io);
        boost::system::error_code ec;
        socket.connect(where, ec);
        if (!ec) {
            socket.set_option(tcp::no_delay(true), ec);
            return socket;
        }
        last = ec.message();
        if (Clock::now() >= deadline) break;
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    throw NetworkError("cannot connect to " + ep.to_string() + ": " + last);
}

std::shared_ptr<Connection> Connection::create(tcp::socket socket, std::size_t queue_capacity) {
    return std::shared_ptr<Connection>(new Connection(std::move(socket), queue_capacity));
}

Connection::Connection(tcp::socket socket, std::size_t capacity) : socket_(std::move(socket)), queue_(capacity) {
    boost::system::error_code ec;
    const auto ep = socket_.remote_endpoint(ec);
    remote_ = ec ? "?" : ep.address().to_string() + ":" + std::to_string(ep.port());
    socket_.set_option(tcp::no_delay(true), ec);
    read_buf_.resize(4096);
    last_rx_ = Clock::now().time_since_epoch().count();
}

void Connection::start(FrameHandler on_frame, CloseHandler on_close) {
    on_frame_ = std::move(on_frame);
    on_close_ = std::move(on_close);
    asio::post(socket_.get_executor(), [self = shared_from_this()] { self->read_more(); });
}

void Connection::read_more() {
    socket_.async_read_some(asio::buffer(read_buf_), [self = shared_from_this()](boost::system::error_code ec,
                                                                                   std::size_t n) {
        if (ec) {
            self->shutdown(ec == asio::error::eof ? "peer closed" : ec.message());
            return;
        }
        self->last_rx_ = Clock::now().time_since_epoch().count();
        self->pending_.insert(self->pending_.end(), self->read_buf_.begin(), self->read_buf_.begin() + n);
        std::size_t at = 0;
        while (self->open_) {
            const link::RawFrame raw = link::split(std::span(self->pending_).subspan(at));
            if (raw.status == link::DecodeStatus::Incomplete) break;
            if (raw.status != link::DecodeStatus::Ok) {
                self->shutdown("corrupt stream: " + link::to_string(raw.status));
                return;
            }
            std::vector<std::uint8_t> frame(self->pending_.begin() + static_cast<std::ptrdiff_t>(at),
                                            self->pending_.begin() + static_cast<std::ptrdiff_t>(at + raw.size));
            at += raw.size;
            ++self->frames_in_;
            if (self->on_frame_) self->on_frame_(std::move(frame));
        }
        self->pending_.erase(self->pending_.begin(), self->pending_.begin() + static_cast<std::ptrdiff_t>(at));
        if (self->open_) self->read_more();
    });
}

void Connection::send(std::vector<std::uint8_t> frame) {
    asio::post(socket_.get_executor(), [self = shared_from_this(), f = std::move(frame)]() mutable {
        if (!self->open_) return;
        self->queue_.push(std::move(f));
        self->dropped_ = self->queue_.dropped();
        if (!self->write_active_) self->write_next();
    });
}

void Connection::send_and_close(std::vector<std::uint8_t> frame) {
    asio::post(socket_.get_executor(), [self = shared_from_this(), f = std::move(frame)]() mutable {
        if (!self->open_) return;
        self->queue_.push(std::move(f));
        self->close_after_write_ = true;
        if (!self->write_active_) self->write_next();
    });
}

void Connection::write_next() {
    // Everything queued goes out in one write, so the queue only fills
    // when the socket itself is backed up.
    writing_.clear();
    std::size_t batch = 0;
    while (auto next = queue_.pop()) {
        writing_.insert(writing_.end(), next->begin(), next->end());
        ++batch;
    }
    if (batch == 0) {
        write_active_ = false;
        if (close_after_write_) shutdown("closed after final frame");
        return;
    }
    write_active_ = true;
    asio::async_write(socket_, asio::buffer(writing_),
                      [self = shared_from_this(), batch](boost::system::error_code ec, std::size_t) {
                          if (ec) {
                              self->shutdown(ec.message());
                              return;
                          }
                          self->frames_out_ += batch;
                          self->write_next();
                      });
}

void Connection::close() {
    asio::post(socket_.get_executor(), [self = shared_from_this()] { self->shutdown("closed locally"); });
}

void Connection::shutdown(const std::string& reason) {
    if (!open_.exchange(false)) return;
    boost::system::error_code ec;
    socket_.shutdown(tcp::socket::shutdown_both, ec);
    socket_.close(ec);
    if (on_close_) {
        auto cb = std::move(on_close_);
        on_frame_ = nullptr;
        cb(reason);
    }
}

}  // namespace telearm::net
