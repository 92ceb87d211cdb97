#include "telearm/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "target_json.hpp"

namespace telearm::app {

using nlohmann::json;

namespace {

double clamp_gripper(double g) {
    if (!std::isfinite(g)) throw std::invalid_argument("gripper must be finite");
    return std::clamp(g, 0.0, 1.0);
}

void check_finite(std::span<const double> v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + " must be finite");
    }
}

std::vector<double> vec_field(const json& j, const char* key, std::size_t n) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_array()) throw std::invalid_argument(std::string("'") + key + "' must be an array");
    if (it->size() != n) {
        throw std::invalid_argument(std::string("'") + key + "' needs " + std::to_string(n) + " values");
    }
    std::vector<double> out;
    for (const auto& x : *it) {
        if (!x.is_number()) throw std::invalid_argument(std::string("'") + key + "' must hold numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

double num_field(const json& j, const char* key, double fallback) {
    const auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_number()) throw std::invalid_argument(std::string("'") + key + "' must be a number");
    return it->get<double>();
}

template <std::size_t N>
std::array<double, N> arr(const std::vector<double>& v) {
    std::array<double, N> a{};
    std::copy_n(v.begin(), N, a.begin());
    return a;
}

}  // namespace

json target_to_json(const Target& target) {
    json j;
    if (const auto* jt = std::get_if<JointTarget>(&target.mode)) {
        j["type"] = "joints";
        j["q"] = jt->q;
    } else {
        const auto& p = std::get<PoseTarget>(target.mode).pose;
        j["type"] = "pose";
        j["r"] = p.r.quat().vec4();
        j["t"] = p.t.vec3();
        if (target.rpy) j["rpy"] = *target.rpy;
    }
    j["gripper"] = target.gripper;
    j["seq"] = target.seq;
    return j;
}

Target target_from_json(const json& j, std::size_t dof) {
    if (!j.is_object()) throw std::invalid_argument("target must be an object");
    Target t;
    const std::string type = j.value("type", "");
    if (type == "joints") {
        t.mode = JointTarget{vec_field(j, "q", dof)};
    } else if (type == "pose") {
        const auto r = vec_field(j, "r", 4);
        const auto p = vec_field(j, "t", 3);
        t.mode = PoseTarget{Pose{UnitQuaternion(Quaternion(r[0], r[1], r[2], r[3])), PureQuaternion(p[0], p[1], p[2])}};
        if (j.contains("rpy")) t.rpy = arr<3>(vec_field(j, "rpy", 3));
    } else {
        throw std::invalid_argument("unknown target type '" + type + "'");
    }
    t.gripper = num_field(j, "gripper", 0.0);
    t.seq = j.value("seq", 0u);
    return t;
}

json controller_to_json(const ControllerConfig& c) {
    return {{"alpha", c.alpha}, {"lambda", c.lambda}, {"eta", c.eta}, {"T", c.T}, {"limit_gain", c.limit_gain}};
}

ControllerConfig controller_from_json(const json& j) {
    ControllerConfig c;
    c.alpha = num_field(j, "alpha", c.alpha);
    c.lambda = num_field(j, "lambda", c.lambda);
    c.eta = num_field(j, "eta", c.eta);
    c.T = num_field(j, "T", c.T);
    c.limit_gain = num_field(j, "limit_gain", c.limit_gain);
    c.validate();
    return c;
}

Target joint_target(const DHChain& chain, std::span<const double> q, double gripper) {
    if (q.size() != chain.dof()) {
        throw std::invalid_argument("joint target needs " + std::to_string(chain.dof()) + " values, got " +
                                    std::to_string(q.size()));
    }
    check_finite(q, "joint target");
    Target t;
    t.mode = JointTarget{chain.clamp(q)};
    t.gripper = clamp_gripper(gripper);
    return t;
}

Target pose_target(const master::Workspace& ws, const std::array<double, 3>& t, const std::array<double, 3>& rpy,
                   double gripper) {
    check_finite(t, "translation");
    check_finite(rpy, "rpy");
    std::array<double, 3> clamped_rpy{};
    for (std::size_t i = 0; i < 3; ++i) clamped_rpy[i] = std::clamp(rpy[i], ws.angle_min[i], ws.angle_max[i]);
    Target out = pose_target(ws, t, ws.orientation(clamped_rpy), gripper);
    out.rpy = clamped_rpy;
    return out;
}

Target pose_target(const master::Workspace& ws, const std::array<double, 3>& t, const UnitQuaternion& r,
                   double gripper) {
    check_finite(t, "translation");
    const auto c = ws.clamp(t);
    Target out;
    out.mode = PoseTarget{Pose{r, PureQuaternion(c[0], c[1], c[2])}};
    out.gripper = clamp_gripper(gripper);
    return out;
}

link::Body to_link(const Target& target) {
    if (const auto* jt = std::get_if<JointTarget>(&target.mode)) {
        return link::JointTargetMsg{jt->q, target.gripper};
    }
    const auto& p = std::get<PoseTarget>(target.mode).pose;
    return link::PoseTargetMsg{p.r.quat().vec4(), p.t.vec3(), target.gripper};
}

Target from_link(const link::Body& body, const DHChain& chain, const master::Workspace& ws) {
    if (const auto* m = std::get_if<link::JointTargetMsg>(&body)) return joint_target(chain, m->q, m->gripper);
    if (const auto* m = std::get_if<link::PoseTargetMsg>(&body)) {
        const UnitQuaternion r(Quaternion::from_vec4(m->r));
        return pose_target(ws, m->t, r, m->gripper);
    }
    throw std::invalid_argument("frame does not carry a target");
}

void TargetBoard::set(Target t) {
    std::lock_guard lock(mutex_);
    target_ = std::move(t);
    ++version_;
}

std::optional<Target> TargetBoard::get() const {
    std::lock_guard lock(mutex_);
    return target_;
}

std::uint64_t TargetBoard::version() const {
    std::lock_guard lock(mutex_);
    return version_;
}

void TargetBoard::clear() {
    std::lock_guard lock(mutex_);
    target_.reset();
    ++version_;
}

void StateBus::publish(StateSnapshot s) {
    std::lock_guard lock(mutex_);
    s.seq = ++version_;
    if (latency_ms_ >= 0.0) s.latency_ms = latency_ms_;
    state_ = std::move(s);
}

StateSnapshot StateBus::latest() const {
    std::lock_guard lock(mutex_);
    return state_;
}

std::uint64_t StateBus::version() const {
    std::lock_guard lock(mutex_);
    return version_;
}

void StateBus::set_latency(double ms) {
    std::lock_guard lock(mutex_);
    latency_ms_ = ms;
    state_.latency_ms = ms;
}

std::pair<double, double> tracking_error(const DHChain& chain, std::span<const double> q, const Target& target) {
    const Pose now = fkm(chain, q);
    const Pose want =
        target.is_pose() ? std::get<PoseTarget>(target.mode).pose : fkm(chain, std::get<JointTarget>(target.mode).q);
    const double et = (now.t.quat() - want.t.quat()).norm();
    const double er = rotation_error(now.r, want.r).norm();
    return {et, er};
}

ControlLoop::ControlLoop(DHChain chain, ControllerConfig cfg, std::unique_ptr<DevicePort> device)
    : controller_(chain, cfg, device->state().q.empty() ? JointVector(chain.dof(), 0.0) : chain.clamp(device->state().q)),
      device_(std::move(device)),
      q0_(controller_.q_d()),
      gripper_(device_->state().gripper) {}

TickRecord ControlLoop::step(const std::optional<Target>& target, double T) {
    TickRecord rec;
    rec.tick = ticks_++;
    rec.T = T;
    rec.target = target;
    if (target) gripper_ = target->gripper;
    const ControlMode hold = JointTarget{controller_.q_d()};
    const auto res = controller_.tick(target ? target->mode : hold, T);
    device_->send_targets(res.q_d, gripper_);
    device_->update(T);
    t_ += T;
    rec.t = t_;
    const RobotState s = device_->state();
    rec.q = s.q;
    rec.gripper = s.gripper;
    rec.q_d = res.q_d;
    rec.u = res.u;
    rec.active = res.active_constraints;
    if (target) std::tie(rec.err_t, rec.err_r) = tracking_error(chain(), s.q, *target);
    return rec;
}

StateSnapshot snapshot(const TickRecord& r) {
    StateSnapshot s;
    s.q = r.q;
    s.q_d = r.q_d;
    s.gripper = r.gripper;
    s.err_t = r.err_t;
    s.err_r = r.err_r;
    s.target = r.target;
    s.t = r.t;
    s.mode = !r.target ? "idle" : r.target->is_pose() ? "task" : "joint";
    if (r.target) s.ack_seq = r.target->seq;
    return s;
}

TickLogger::TickLogger(std::ostream& out, const DHChain& chain, const ControllerConfig& cfg, const ServoModel& servo,
                       std::span<const double> q0)
    : out_(out) {
    json h;
    h["record"] = "header";
    h["version"] = kLogVersion;
    h["chain"] = serialize_chain(chain);
    h["controller"] = controller_to_json(cfg);
    h["servo"] = {{"max_speed", servo.max_speed}, {"deadband", servo.deadband}, {"gripper_speed", servo.gripper_speed}};
    h["q0"] = std::vector<double>(q0.begin(), q0.end());
    out_ << h.dump() << '\n';
}

void TickLogger::write(const TickRecord& r) {
    json j;
    j["record"] = "tick";
    j["tick"] = r.tick;
    j["t"] = r.t;
    j["T"] = r.T;
    j["target"] = r.target ? target_to_json(*r.target) : json(nullptr);
    j["q"] = r.q;
    j["q_d"] = r.q_d;
    j["u"] = r.u;
    j["gripper"] = r.gripper;
    j["err_t"] = r.err_t;
    j["err_r"] = r.err_r;
    j["active"] = r.active;
    out_ << j.dump() << '\n';
}

ReplayReport replay(std::istream& log) {
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&line_no](const std::string& what) {
        return LogError("line " + std::to_string(line_no) + ": " + what);
    };
    auto parse_line = [&]() -> std::optional<json> {
        while (std::getline(log, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                return json::parse(line);
            } catch (const json::parse_error& e) {
                throw fail(std::string("malformed JSON: ") + e.what());
            }
        }
        return std::nullopt;
    };

    const auto header = parse_line();
    if (!header) throw LogError("log is empty");
    std::optional<ControlLoop> loop;
    try {
        if (header->value("record", "") != "header") throw fail("first record must be the header");
        if (header->value("version", -1) != kLogVersion) throw fail("unsupported log version");
        std::istringstream chain_text(header->at("chain").get<std::string>());
        DHChain chain = parse_chain(chain_text);
        const ControllerConfig cfg = controller_from_json(header->at("controller"));
        ServoModel servo;
        const json& sv = header->at("servo");
        servo.max_speed = sv.at("max_speed").get<double>();
        servo.deadband = sv.at("deadband").get<double>();
        servo.gripper_speed = sv.at("gripper_speed").get<double>();
        servo.validate();
        const auto q0 = vec_field(*header, "q0", chain.dof());
        auto device = std::make_unique<SimDevicePort>(chain, servo, q0);
        loop.emplace(chain, cfg, std::move(device));
    } catch (const LogError&) {
        throw;
    } catch (const std::exception& e) {
        throw fail(std::string("bad header: ") + e.what());
    }

    ReplayReport report;
    double sum_sq = 0.0;
    std::size_t pose_ticks = 0;
    while (const auto rec = parse_line()) {
        std::optional<Target> target;
        double T = 0.0;
        JointVector logged_qd;
        try {
            if (rec->value("record", "") != "tick") throw std::invalid_argument("expected a tick record");
            T = rec->at("T").get<double>();
            if (!(T > 0.0)) throw std::invalid_argument("T must be > 0");
            const json& tj = rec->at("target");
            if (!tj.is_null()) target = target_from_json(tj, loop->chain().dof());
            logged_qd = vec_field(*rec, "q_d", loop->chain().dof());
        } catch (const std::exception& e) {
            throw fail(e.what());
        }
        const TickRecord out = loop->step(target, T);
        for (std::size_t i = 0; i < out.q_d.size(); ++i) {
            const double diff = std::abs(out.q_d[i] - logged_qd[i]);
            report.max_qd_diff = std::max(report.max_qd_diff, diff);
            if (out.q_d[i] != logged_qd[i] && report.identical) {
                report.identical = false;
                report.first_mismatch = report.ticks;
            }
        }
        if (target && target->is_pose()) {
            sum_sq += out.err_t * out.err_t;
            report.max_err_t = std::max(report.max_err_t, out.err_t);
            ++pose_ticks;
        }
        if (target) report.final_err_t = out.err_t;
        report.final_q_d = out.q_d;
        ++report.ticks;
    }
    if (pose_ticks > 0) report.rms_err_t = std::sqrt(sum_sq / static_cast<double>(pose_ticks));
    return report;
}

std::vector<ScriptEntry> parse_script(std::istream& in, const DHChain& chain, const master::Workspace& ws) {
    std::vector<ScriptEntry> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        try {
            const json j = json::parse(line);
            if (!j.is_object()) throw std::invalid_argument("expected an object");
            ScriptEntry e;
            e.at = num_field(j, "at", -1.0);
            if (!(e.at >= 0.0) || !std::isfinite(e.at)) throw std::invalid_argument("'at' must be a time >= 0");
            if (!out.empty() && e.at < out.back().at) throw std::invalid_argument("entries must be in time order");
            const double g = num_field(j, "gripper", 0.0);
            const std::string type = j.value("type", "");
            if (type == "target_joints") {
                e.target = joint_target(chain, vec_field(j, "q", chain.dof()), g);
            } else if (type == "target_pose") {
                const auto t = arr<3>(vec_field(j, "t", 3));
                if (j.contains("r") && j.contains("rpy")) throw std::invalid_argument("give either 'r' or 'rpy'");
                if (j.contains("r")) {
                    const auto r = vec_field(j, "r", 4);
                    e.target = pose_target(ws, t, UnitQuaternion(Quaternion(r[0], r[1], r[2], r[3])), g);
                } else {
                    const auto rpy = j.contains("rpy") ? arr<3>(vec_field(j, "rpy", 3)) : std::array<double, 3>{};
                    e.target = pose_target(ws, t, rpy, g);
                }
            } else {
                throw std::invalid_argument("unknown type '" + type + "'");
            }
            out.push_back(std::move(e));
        } catch (const json::exception& e) {
            throw LogError("script line " + std::to_string(line_no) + ": " + e.what());
        } catch (const std::invalid_argument& e) {
            throw LogError("script line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<ScriptEntry> load_script(const std::filesystem::path& path, const DHChain& chain,
                                     const master::Workspace& ws) {
    std::ifstream in(path);
    if (!in) throw LogError("cannot read script " + path.string());
    return parse_script(in, chain, ws);
}

const ScriptEntry* script_at(const std::vector<ScriptEntry>& script, double t) {
    const ScriptEntry* hit = nullptr;
    for (const auto& e : script) {
        if (e.at > t) break;
        hit = &e;
    }
    return hit;
}

}  // namespace telearm::app
