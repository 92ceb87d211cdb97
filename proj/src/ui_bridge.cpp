#include "telearm/ui_bridge.hpp"

#include <deque>
#include <list>
#include <mutex>
#include <thread>

#include <boost/asio/post.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "target_json.hpp"

namespace telearm::app {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace ws = beast::websocket;
using nlohmann::json;
using net::tcp;

namespace {

json error_message(const std::string& what) { return {{"type", "error"}, {"message", what}}; }

std::vector<double> numbers(const json& j, const char* key, std::size_t n) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_array() || it->size() != n) {
        throw std::invalid_argument(std::string("'") + key + "' must be an array of " + std::to_string(n) + " numbers");
    }
    std::vector<double> out;
    for (const auto& v : *it) {
        if (!v.is_number()) throw std::invalid_argument(std::string("'") + key + "' must hold numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

// Gripper from the message, else whatever is currently commanded.
double gripper_of(const json& j, const UiContext& c) {
    if (const auto it = j.find("gripper"); it != j.end()) {
        if (!it->is_number()) throw std::invalid_argument("'gripper' must be a number");
        return it->get<double>();
    }
    if (const auto t = c.targets->get()) return t->gripper;
    return c.state->latest().gripper;
}

}  // namespace

std::string ui_hello_message(const UiContext& c, bool operator_role, double rate_hz) {
    json dh = json::array();
    for (const auto& r : c.chain.rows()) {
        dh.push_back({{"theta_offset", r.theta_offset}, {"d", r.d}, {"a", r.a}, {"alpha", r.alpha}});
    }
    json j;
    j["type"] = "hello";
    j["version"] = kUiSchemaVersion;
    j["node"] = c.node;
    j["role"] = operator_role ? "operator" : "readonly";
    j["dof"] = c.chain.dof();
    j["dh"] = dh;
    j["limits"] = {{"q_min", c.chain.q_min()}, {"q_max", c.chain.q_max()}, {"gripper", {0.0, 1.0}}};
    j["workspace"] = {{"t_min", c.workspace.t_min},
                      {"t_max", c.workspace.t_max},
                      {"angle_min", c.workspace.angle_min},
                      {"angle_max", c.workspace.angle_max},
                      {"base_rotation", c.workspace.base_rotation},
                      {"rotation_order", "zyx"}};
    j["modes"] = {"joint", "task"};
    j["rate_hz"] = rate_hz;
    return j.dump();
}

std::string ui_state_message(const StateSnapshot& s) {
    json j;
    j["type"] = "state";
    j["q"] = s.q;
    j["gripper"] = s.gripper;
    j["err_t"] = s.err_t;
    j["err_r"] = s.err_r;
    j["latency_ms"] = s.latency_ms >= 0.0 ? json(s.latency_ms) : json(nullptr);
    j["seq"] = s.seq;
    j["q_d"] = s.q_d;
    j["mode"] = s.mode;
    j["t"] = s.t;
    j["target"] = s.target ? target_to_json(*s.target) : json(nullptr);
    return j.dump();
}

std::string ui_apply_command(const UiContext& c, const std::string& text, bool& unknown) {
    unknown = false;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        return std::string("malformed JSON: ") + e.what();
    }
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) return "message needs a string 'type'";
    if (!c.targets) return "this endpoint is view-only";
    const std::string type = j["type"];
    try {
        if (type == "target_joints") {
            c.targets->set(joint_target(c.chain, numbers(j, "q", c.chain.dof()), gripper_of(j, c)));
        } else if (type == "target_pose") {
            const auto t = numbers(j, "t", 3);
            const auto rpy = j.contains("rpy") ? numbers(j, "rpy", 3) : std::vector<double>{0.0, 0.0, 0.0};
            c.targets->set(pose_target(c.workspace, {t[0], t[1], t[2]}, {rpy[0], rpy[1], rpy[2]}, gripper_of(j, c)));
        } else if (type == "mode") {
            // Switching mode holds the arm where it is.
            const std::string mode = j.value("mode", "");
            const StateSnapshot s = c.state->latest();
            const double g = gripper_of(j, c);
            if (mode == "joint") {
                c.targets->set(joint_target(c.chain, s.q, g));
            } else if (mode == "task") {
                const Pose p = fkm(c.chain, s.q);
                c.targets->set(pose_target(c.workspace, p.t.vec3(), p.r, g));
            } else {
                return "mode must be 'joint' or 'task'";
            }
        } else if (type == "gripper") {
            const auto it = j.find("value");
            if (it == j.end() || !it->is_number()) return "'value' must be a number";
            std::optional<Target> t = c.targets->get();
            if (!t) t = joint_target(c.chain, c.state->latest().q, 0.0);
            const double g = it->get<double>();
            if (!std::isfinite(g)) return "'value' must be finite";
            t->gripper = std::clamp(g, 0.0, 1.0);
            t->seq = 0;
            c.targets->set(*t);
        } else {
            unknown = true;
        }
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

struct UiBridge::Impl {
    struct Client : std::enable_shared_from_this<Client> {
        Client(tcp::socket s, Impl& o) : ws(std::move(s)), owner(o) {}
        ws::stream<beast::tcp_stream> ws;
        Impl& owner;
        beast::flat_buffer buffer;
        std::deque<std::string> outbox;
        bool writing = false;
        bool open = false;
        bool is_operator = false;

        void send(std::string text) {
            if (!open) return;
            // A client that cannot keep up loses state frames, never blocks anyone.
            // The front entry may be mid-write, so shed the one behind it.
            if (outbox.size() > 64) outbox.erase(outbox.begin() + (writing ? 1 : 0));
            outbox.push_back(std::move(text));
            if (!writing) write_next();
        }

        void write_next() {
            if (outbox.empty() || !open) {
                writing = false;
                return;
            }
            writing = true;
            ws.text(true);
            ws.async_write(asio::buffer(outbox.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
                if (ec) {
                    self->owner.drop(self);
                    return;
                }
                self->outbox.pop_front();
                self->write_next();
            });
        }

        void read() {
            ws.async_read(buffer, [self = shared_from_this()](beast::error_code ec, std::size_t) {
                if (ec) {
                    self->owner.drop(self);
                    return;
                }
                const std::string text = beast::buffers_to_string(self->buffer.data());
                self->buffer.consume(self->buffer.size());
                self->owner.on_message(self, text);
                self->read();
            });
        }
    };

    Impl(UiContext c, net::Endpoint ep, double rate)
        : context(std::move(c)), listen(std::move(ep)), rate_hz(rate), acceptor(io), timer(io) {}

    UiContext context;
    net::Endpoint listen;
    double rate_hz;
    asio::io_context io;
    tcp::acceptor acceptor;
    asio::steady_timer timer;
    std::list<std::shared_ptr<Client>> clients;  // connection order
    std::thread thread;
    std::uint16_t port = 0;
    mutable std::mutex mutex;
    UiStats stats;

    void accept() {
        acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
            if (ec) {
                if (ec != asio::error::operation_aborted) accept();
                return;
            }
            auto client = std::make_shared<Client>(std::move(socket), *this);
            client->ws.set_option(ws::stream_base::timeout::suggested(beast::role_type::server));
            client->ws.async_accept([this, client](beast::error_code ec2) {
                if (ec2) return;
                client->open = true;
                const bool can_command = context.targets != nullptr;
                client->is_operator = can_command && !has_operator();
                clients.push_back(client);
                {
                    std::lock_guard lock(mutex);
                    ++stats.connections;
                    stats.clients = clients.size();
                }
                client->send(ui_hello_message(context, client->is_operator, rate_hz));
                send_state(*client);
                client->read();
            });
            accept();
        });
    }

    bool has_operator() const {
        for (const auto& c : clients) {
            if (c->is_operator) return true;
        }
        return false;
    }

    void drop(const std::shared_ptr<Client>& client) {
        if (!client->open) return;
        client->open = false;
        beast::error_code ec;
        beast::get_lowest_layer(client->ws).socket().close(ec);
        clients.remove(client);
        if (client->is_operator && context.targets) {
            for (auto& next : clients) {
                next->is_operator = true;
                next->send(json{{"type", "role"}, {"role", "operator"}}.dump());
                break;
            }
        }
        std::lock_guard lock(mutex);
        stats.clients = clients.size();
    }

    void on_message(const std::shared_ptr<Client>& client, const std::string& text) {
        std::string error;
        bool unknown = false;
        if (!client->is_operator && context.targets) {
            // Still report malformed input; commands are simply not allowed.
            error = json::accept(text) ? "read-only client: commands are ignored" : "malformed JSON";
        } else {
            error = ui_apply_command(context, text, unknown);
        }
        std::lock_guard lock(mutex);
        if (!error.empty()) {
            ++stats.errors;
            client->send(error_message(error).dump());
        } else if (unknown) {
            ++stats.unknown;
        } else {
            ++stats.commands;
        }
    }

    void send_state(Client& c) {
        c.send(ui_state_message(context.state->latest()));
        std::lock_guard lock(mutex);
        ++stats.states_sent;
    }

    void broadcast() {
        timer.expires_after(
            std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::duration<double>(1.0 / rate_hz)));
        timer.async_wait([this](beast::error_code ec) {
            if (ec) return;
            if (!clients.empty()) {
                const std::string msg = ui_state_message(context.state->latest());
                for (auto& c : clients) c->send(msg);
                std::lock_guard lock(mutex);
                stats.states_sent += clients.size();
            }
            broadcast();
        });
    }
};

UiBridge::UiBridge(UiContext context, net::Endpoint listen, double rate_hz) {
    if (!context.state) throw std::invalid_argument("UiBridge needs a state bus");
    if (!(rate_hz >= 20.0)) throw std::invalid_argument("UiBridge: rate must be at least 20 Hz");
    impl_ = std::make_unique<Impl>(std::move(context), std::move(listen), rate_hz);
}

UiBridge::~UiBridge() { stop(); }

void UiBridge::start() {
    Impl& m = *impl_;
    m.acceptor = net::make_acceptor(m.io, m.listen);
    m.port = m.acceptor.local_endpoint().port();
    m.accept();
    m.broadcast();
    m.thread = std::thread([&m] { m.io.run(); });
}

void UiBridge::stop() {
    Impl& m = *impl_;
    if (!m.thread.joinable()) return;
    asio::post(m.io, [&m] {
        beast::error_code ec;
        m.acceptor.close(ec);
        m.timer.cancel();
        for (auto& c : m.clients) {
            c->open = false;
            beast::get_lowest_layer(c->ws).socket().close(ec);
        }
        m.clients.clear();
        asio::post(m.io, [&m] { m.io.stop(); });
    });
    m.thread.join();
}

std::uint16_t UiBridge::port() const { return impl_->port; }

UiStats UiBridge::stats() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->stats;
}

}  // namespace telearm::app
