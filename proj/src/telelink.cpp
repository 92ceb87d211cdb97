#include "telearm/telelink.hpp"

#include <bit>
#include <cmath>

#include "telearm/serialio.hpp"

namespace telearm::link {

namespace {

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) {
        if (!std::isfinite(v)) throw std::invalid_argument("link: non-finite value");
        u64(std::bit_cast<std::uint64_t>(v));
    }
    std::vector<std::uint8_t>& bytes() { return out_; }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
    bool ok() const { return ok_; }
    bool done() const { return pos_ == in_.size(); }

    std::uint64_t uint(int n) {
        if (pos_ + static_cast<std::size_t>(n) > in_.size()) {
            ok_ = false;
            return 0;
        }
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= std::uint64_t{in_[pos_ + i]} << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    double f64() {
        const double v = std::bit_cast<double>(uint(8));
        if (!std::isfinite(v)) ok_ = false;
        return v;
    }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
    bool ok_ = true;
};

void check_gripper(double g) {
    if (!(g >= 0.0 && g <= 1.0)) throw std::invalid_argument("link: gripper must lie in [0, 1]");
}

void write_joints(Writer& w, const std::vector<double>& q) {
    if (q.size() > kMaxJoints) throw std::invalid_argument("link: too many joints");
    w.u8(static_cast<std::uint8_t>(q.size()));
    for (double v : q) w.f64(v);
}

bool read_joints(Reader& r, std::vector<double>& q) {
    const auto n = r.uint(1);
    if (n > kMaxJoints) return false;
    q.resize(n);
    for (auto& v : q) v = r.f64();
    return r.ok();
}

bool unit_norm(const std::array<double, 4>& r) {
    const double n = std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2] + r[3] * r[3]);
    return std::abs(n - 1.0) <= 1e-6;
}

std::optional<Body> parse_body(FrameKind kind, Reader& r) {
    switch (kind) {
        case FrameKind::Hello: {
            Hello h;
            const auto role = r.uint(1);
            h.proto_version = static_cast<std::uint8_t>(r.uint(1));
            const auto status = r.uint(1);
            if (role != 1 && role != 2) return std::nullopt;
            if (status > 3) return std::nullopt;
            h.role = static_cast<Role>(role);
            h.status = static_cast<HelloStatus>(status);
            return h;
        }
        case FrameKind::JointTarget: {
            JointTargetMsg m;
            if (!read_joints(r, m.q)) return std::nullopt;
            m.gripper = r.f64();
            if (!(m.gripper >= 0.0 && m.gripper <= 1.0)) return std::nullopt;
            return m;
        }
        case FrameKind::PoseTarget: {
            PoseTargetMsg m;
            for (auto& v : m.r) v = r.f64();
            for (auto& v : m.t) v = r.f64();
            m.gripper = r.f64();
            if (!r.ok() || !unit_norm(m.r) || !(m.gripper >= 0.0 && m.gripper <= 1.0)) return std::nullopt;
            return m;
        }
        case FrameKind::StateReport: {
            StateReport m;
            if (!read_joints(r, m.q)) return std::nullopt;
            m.gripper = r.f64();
            m.ack_seq = static_cast<std::uint32_t>(r.uint(4));
            if (!(m.gripper >= 0.0 && m.gripper <= 1.0)) return std::nullopt;
            return m;
        }
        case FrameKind::Ping: return Ping{r.uint(8)};
        case FrameKind::Pong: return Pong{r.uint(8)};
    }
    return std::nullopt;
}

std::uint16_t read_len(std::span<const std::uint8_t> bytes) {
    return static_cast<std::uint16_t>(bytes[0] | (bytes[1] << 8));
}

}  // namespace

FrameKind kind_of(const Body& body) {
    static constexpr FrameKind kinds[] = {FrameKind::Hello,       FrameKind::JointTarget, FrameKind::PoseTarget,
                                          FrameKind::StateReport, FrameKind::Ping,        FrameKind::Pong};
    return kinds[body.index()];
}

bool sheddable(FrameKind kind) {
    return kind == FrameKind::JointTarget || kind == FrameKind::PoseTarget || kind == FrameKind::StateReport;
}

bool known_kind(std::uint8_t kind) {
    switch (static_cast<FrameKind>(kind)) {
        case FrameKind::Hello:
        case FrameKind::JointTarget:
        case FrameKind::PoseTarget:
        case FrameKind::StateReport:
        case FrameKind::Ping:
        case FrameKind::Pong: return true;
    }
    return false;
}

std::vector<std::uint8_t> encode(const TeleopFrame& frame) {
    Writer w;
    w.u16(0);  // patched below
    w.u8(static_cast<std::uint8_t>(kind_of(frame.body)));
    w.u32(frame.seq);
    w.u64(frame.t_send_us);
    std::visit(
        [&](const auto& b) {
            using B = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<B, Hello>) {
                w.u8(static_cast<std::uint8_t>(b.role));
                w.u8(b.proto_version);
                w.u8(static_cast<std::uint8_t>(b.status));
            } else if constexpr (std::is_same_v<B, JointTargetMsg>) {
                check_gripper(b.gripper);
                write_joints(w, b.q);
                w.f64(b.gripper);
            } else if constexpr (std::is_same_v<B, PoseTargetMsg>) {
                check_gripper(b.gripper);
                for (double v : b.r) w.f64(v);
                if (!unit_norm(b.r)) throw std::invalid_argument("link: pose rotation must be a unit quaternion");
                for (double v : b.t) w.f64(v);
                w.f64(b.gripper);
            } else if constexpr (std::is_same_v<B, StateReport>) {
                check_gripper(b.gripper);
                write_joints(w, b.q);
                w.f64(b.gripper);
                w.u32(b.ack_seq);
            } else {
                w.u64(b.nonce);
            }
        },
        frame.body);
    auto& out = w.bytes();
    const std::size_t len = out.size() - kLenSize;
    out[0] = static_cast<std::uint8_t>(len & 0xFF);
    out[1] = static_cast<std::uint8_t>(len >> 8);
    out.push_back(serial::crc8(out));
    return std::move(out);
}

std::string to_string(DecodeStatus status) {
    switch (status) {
        case DecodeStatus::Ok: return "ok";
        case DecodeStatus::Incomplete: return "incomplete";
        case DecodeStatus::BadLength: return "bad length";
        case DecodeStatus::BadCrc: return "bad crc";
        case DecodeStatus::UnknownKind: return "unknown kind";
        case DecodeStatus::BadPayload: return "bad payload";
    }
    return "?";
}

RawFrame split(std::span<const std::uint8_t> bytes) {
    RawFrame out;
    if (bytes.size() < kLenSize) return out;
    const std::size_t len = read_len(bytes);
    if (len < kBodyHeader || len > kMaxBody) {
        out.status = DecodeStatus::BadLength;
        return out;
    }
    const std::size_t total = kLenSize + len + 1;
    if (bytes.size() < total) return out;
    if (serial::crc8(bytes.first(kLenSize + len)) != bytes[total - 1]) {
        out.status = DecodeStatus::BadCrc;
        return out;
    }
    out.status = DecodeStatus::Ok;
    out.size = total;
    out.kind = bytes[kLenSize];
    return out;
}

DecodeResult decode(std::span<const std::uint8_t> bytes) {
    DecodeResult out;
    const RawFrame raw = split(bytes);
    out.status = raw.status;
    if (raw.status != DecodeStatus::Ok) return out;
    out.consumed = raw.size;
    if (!known_kind(raw.kind)) {
        out.status = DecodeStatus::UnknownKind;
        return out;
    }
    Reader r(bytes.subspan(kLenSize + 1, raw.size - kLenSize - 2));
    TeleopFrame f;
    f.seq = static_cast<std::uint32_t>(r.uint(4));
    f.t_send_us = r.uint(8);
    auto body = parse_body(static_cast<FrameKind>(raw.kind), r);
    if (!body || !r.ok() || !r.done()) {
        out.status = DecodeStatus::BadPayload;
        return out;
    }
    f.body = std::move(*body);
    out.frame = std::move(f);
    return out;
}

void FrameReader::feed(std::span<const std::uint8_t> bytes) { buffer_.insert(buffer_.end(), bytes.begin(), bytes.end()); }

std::optional<std::vector<std::uint8_t>> FrameReader::next_raw() {
    const RawFrame raw = split(buffer_);
    if (raw.status == DecodeStatus::Incomplete) return std::nullopt;
    if (raw.status != DecodeStatus::Ok) throw LinkError("link: corrupt stream (" + to_string(raw.status) + ")");
    std::vector<std::uint8_t> frame(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(raw.size));
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(raw.size));
    return frame;
}

std::optional<TeleopFrame> FrameReader::next() {
    while (auto raw = next_raw()) {
        DecodeResult r = decode(*raw);
        if (r.status == DecodeStatus::Ok) return std::move(r.frame);
        if (r.status == DecodeStatus::UnknownKind) {
            ++unknown_;
            continue;
        }
        throw LinkError("link: " + to_string(r.status));
    }
    return std::nullopt;
}

std::uint8_t peek_kind(std::span<const std::uint8_t> frame) { return frame.size() > kLenSize ? frame[kLenSize] : 0; }

void FrameQueue::push(std::vector<std::uint8_t> frame) {
    if (items_.size() >= capacity_) {
        for (auto it = items_.begin(); it != items_.end(); ++it) {
            const std::uint8_t kind = peek_kind(*it);
            if (known_kind(kind) && sheddable(static_cast<FrameKind>(kind))) {
                items_.erase(it);
                ++dropped_;
                break;
            }
        }
    }
    items_.push_back(std::move(frame));
}

std::optional<std::vector<std::uint8_t>> FrameQueue::pop() {
    if (items_.empty()) return std::nullopt;
    auto f = std::move(items_.front());
    items_.pop_front();
    return f;
}

void LinkFaults::validate() const {
    if (!(fixed_delay_ms >= 0.0) || !std::isfinite(fixed_delay_ms)) {
        throw std::invalid_argument("faults: fixed_delay_ms must be >= 0");
    }
    if (!(jitter_ms >= 0.0) || !std::isfinite(jitter_ms)) throw std::invalid_argument("faults: jitter_ms must be >= 0");
    if (!(drop_rate >= 0.0 && drop_rate < 1.0)) throw std::invalid_argument("faults: drop_rate must lie in [0, 1)");
}

bool SeqFilter::accept(std::uint32_t seq) {
    if (last_ && seq <= *last_) {
        ++rejected_;
        return false;
    }
    last_ = seq;
    return true;
}

}  // namespace telearm::link
