#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace telearm::link {

// Wire layout, little-endian:
//   [len:u16][kind:u8][seq:u32][t_send_us:u64][payload][crc8]
// len counts kind..payload; the CRC-8 (same polynomial as the serial link)
// covers the two len bytes and the body.
inline constexpr std::uint8_t kProtoVersion = 1;
inline constexpr std::size_t kLenSize = 2;
inline constexpr std::size_t kBodyHeader = 1 + 4 + 8;
inline constexpr std::size_t kMaxBody = 1024;
inline constexpr std::size_t kMaxJoints = 16;

enum class FrameKind : std::uint8_t {
    Hello = 0x01,
    JointTarget = 0x10,
    PoseTarget = 0x11,
    StateReport = 0x20,
    Ping = 0x30,
    Pong = 0x31,
};

enum class Role : std::uint8_t { Leader = 1, Follower = 2 };

enum class HelloStatus : std::uint8_t {
    Request = 0,
    Accepted = 1,
    RefusedVersion = 2,
    RefusedBusy = 3,
};

struct Hello {
    Role role = Role::Leader;
    std::uint8_t proto_version = kProtoVersion;
    HelloStatus status = HelloStatus::Request;
    friend bool operator==(const Hello&, const Hello&) = default;
};

struct JointTargetMsg {
    std::vector<double> q;  // rad
    double gripper = 0.0;   // [0, 1]
    friend bool operator==(const JointTargetMsg&, const JointTargetMsg&) = default;
};

struct PoseTargetMsg {
    std::array<double, 4> r{1.0, 0.0, 0.0, 0.0};  // unit quaternion (w, x, y, z)
    std::array<double, 3> t{};                    // m
    double gripper = 0.0;
    friend bool operator==(const PoseTargetMsg&, const PoseTargetMsg&) = default;
};

struct StateReport {
    std::vector<double> q;
    double gripper = 0.0;
    std::uint32_t ack_seq = 0;  // last target seq applied
    friend bool operator==(const StateReport&, const StateReport&) = default;
};

struct Ping {
    std::uint64_t nonce = 0;
    friend bool operator==(const Ping&, const Ping&) = default;
};

struct Pong {
    std::uint64_t nonce = 0;
    friend bool operator==(const Pong&, const Pong&) = default;
};

using Body = std::variant<Hello, JointTargetMsg, PoseTargetMsg, StateReport, Ping, Pong>;

struct TeleopFrame {
    std::uint32_t seq = 0;
    std::uint64_t t_send_us = 0;  // since the sender's session start
    Body body;
    friend bool operator==(const TeleopFrame&, const TeleopFrame&) = default;
};

FrameKind kind_of(const Body& body);
/// Targets and state reports may be shed under backpressure; control
/// frames (Hello, Ping, Pong) never are.
bool sheddable(FrameKind kind);
bool known_kind(std::uint8_t kind);

/// Throws std::invalid_argument for non-finite values, a gripper outside
/// [0, 1], a non-unit pose rotation or too many joints.
std::vector<std::uint8_t> encode(const TeleopFrame& frame);

enum class DecodeStatus {
    Ok,
    Incomplete,
    BadLength,    // len outside [13, 1024]
    BadCrc,
    UnknownKind,
    BadPayload,   // CRC fine but the body does not parse
};

std::string to_string(DecodeStatus status);

struct DecodeResult {
    DecodeStatus status = DecodeStatus::Incomplete;
    std::optional<TeleopFrame> frame;
    std::size_t consumed = 0;  // whole frame on Ok/UnknownKind/BadPayload, else 0
};

DecodeResult decode(std::span<const std::uint8_t> bytes);

/// Frame boundary check without parsing the payload: length and CRC only.
/// The relay uses this to forward frames verbatim.
struct RawFrame {
    DecodeStatus status = DecodeStatus::Incomplete;  // Ok, Incomplete, BadLength or BadCrc
    std::size_t size = 0;                            // whole frame including len and crc
    std::uint8_t kind = 0;
};

RawFrame split(std::span<const std::uint8_t> bytes);

class LinkError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reassembles frames from a reliable byte stream. There is no resync
/// marker, so a framing or CRC error poisons the stream and throws.
class FrameReader {
public:
    void feed(std::span<const std::uint8_t> bytes);
    /// Next raw frame (len..crc). Throws LinkError on a corrupt stream.
    std::optional<std::vector<std::uint8_t>> next_raw();
    /// Next parsed frame; frames of unknown kind are skipped and counted.
    std::optional<TeleopFrame> next();
    std::size_t unknown_frames() const noexcept { return unknown_; }
    std::size_t buffered() const noexcept { return buffer_.size(); }

private:
    std::vector<std::uint8_t> buffer_;
    std::size_t unknown_ = 0;
};

/// Bounded FIFO of encoded frames. When full, the oldest sheddable frame
/// is dropped to make room; control frames are never dropped, so the
/// queue may exceed its capacity when it holds nothing else.
class FrameQueue {
public:
    explicit FrameQueue(std::size_t capacity = 256) : capacity_(capacity) {}

    void push(std::vector<std::uint8_t> frame);
    std::optional<std::vector<std::uint8_t>> pop();
    const std::vector<std::uint8_t>* front() const { return items_.empty() ? nullptr : &items_.front(); }
    bool empty() const noexcept { return items_.empty(); }
    std::size_t size() const noexcept { return items_.size(); }
    std::size_t dropped() const noexcept { return dropped_; }
    std::size_t capacity() const noexcept { return capacity_; }

private:
    std::size_t capacity_;
    std::deque<std::vector<std::uint8_t>> items_;
    std::size_t dropped_ = 0;
};

/// Kind byte of an encoded frame, or 0 when too short.
std::uint8_t peek_kind(std::span<const std::uint8_t> frame);

struct LinkFaults {
    double fixed_delay_ms = 0.0;
    double jitter_ms = 0.0;
    double drop_rate = 0.0;  // [0, 1)
    std::uint64_t seed = 1;

    void validate() const;
    bool none() const { return fixed_delay_ms == 0.0 && jitter_ms == 0.0 && drop_rate == 0.0; }
    friend bool operator==(const LinkFaults&, const LinkFaults&) = default;
};

/// Applies LinkFaults to a stream of items. Times are seconds on any
/// monotonic base (wall clock or simulation time). Each item is held for
/// fixed_delay + U(0, jitter) but never released before its predecessor,
/// so delivery order always equals send order. Drops and delays are drawn
/// from one seeded generator in push order.
template <class T>
class DelayLine {
public:
    explicit DelayLine(LinkFaults faults) : faults_(faults), rng_(faults.seed) { faults_.validate(); }

    /// Returns false when the item was dropped.
    bool push(T item, double sent) {
        if (faults_.drop_rate > 0.0 && unit_(rng_) < faults_.drop_rate) {
            ++dropped_;
            return false;
        }
        double delay = faults_.fixed_delay_ms;
        if (faults_.jitter_ms > 0.0) delay += faults_.jitter_ms * unit_(rng_);
        const double due = std::max(sent + delay * 1e-3, last_due_);
        last_due_ = due;
        items_.push_back({due, std::move(item)});
        return true;
    }

    std::optional<T> pop_due(double now) {
        if (items_.empty() || items_.front().due > now) return std::nullopt;
        T item = std::move(items_.front().item);
        items_.pop_front();
        return item;
    }

    std::optional<double> next_due() const {
        if (items_.empty()) return std::nullopt;
        return items_.front().due;
    }

    std::size_t size() const noexcept { return items_.size(); }
    std::size_t dropped() const noexcept { return dropped_; }
    const LinkFaults& faults() const noexcept { return faults_; }

private:
    struct Entry {
        double due;
        T item;
    };
    LinkFaults faults_;
    std::mt19937_64 rng_;
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
    std::deque<Entry> items_;
    double last_due_ = -1e300;
    std::size_t dropped_ = 0;
};

/// Per-session sequence check on the receiving side.
class SeqFilter {
public:
    /// True when seq is newer than everything accepted so far.
    bool accept(std::uint32_t seq);
    void reset() { last_.reset(); }
    std::size_t rejected() const noexcept { return rejected_; }
    std::optional<std::uint32_t> last() const noexcept { return last_; }

private:
    std::optional<std::uint32_t> last_;
    std::size_t rejected_ = 0;
};

}  // namespace telearm::link
