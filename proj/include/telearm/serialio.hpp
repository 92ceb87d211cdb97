#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace telearm::serial {

// Frame layout, little-endian:
//   [0xAA][0x55][type:u8][len:u8][payload:len bytes][crc8]
// The CRC-8 (polynomial 0x07, init 0x00) covers type, len and payload.

inline constexpr std::uint8_t kMagic0 = 0xAA;
inline constexpr std::uint8_t kMagic1 = 0x55;
inline constexpr std::size_t kHeaderSize = 4;
inline constexpr std::size_t kMaxPayload = 32;
inline constexpr std::size_t kServoChannels = 6;  // five joints + gripper
inline constexpr std::uint16_t kCentidegMax = 18000;
inline constexpr std::uint16_t kPotMax = 1023;

enum class FrameType : std::uint8_t {
    SetTargets = 0x01,
    GetState = 0x02,
    State = 0x81,
    Pots = 0x82,
};

using ServoWords = std::array<std::uint16_t, kServoChannels>;

/// Host → device: servo targets in centidegrees (0 = −90°, 18000 = +90°).
struct SetTargets {
    ServoWords centideg{};
    friend bool operator==(const SetTargets&, const SetTargets&) = default;
};
/// Host → device: request a State reply.
struct GetState {
    friend bool operator==(const GetState&, const GetState&) = default;
};
/// Device → host: current servo positions in centidegrees.
struct State {
    ServoWords centideg{};
    friend bool operator==(const State&, const State&) = default;
};
/// Device → host: raw potentiometer counts (0..1023).
struct Pots {
    ServoWords counts{};
    friend bool operator==(const Pots&, const Pots&) = default;
};

using SerialFrame = std::variant<SetTargets, GetState, State, Pots>;

FrameType type_of(const SerialFrame& frame);
std::size_t payload_size(FrameType type);

/// CRC-8, polynomial x⁸+x²+x+1 (0x07), no reflection, no final xor.
std::uint8_t crc8(std::span<const std::uint8_t> bytes, std::uint8_t crc = 0x00);

/// Throws std::out_of_range when a field is outside its wire range.
std::vector<std::uint8_t> encode(const SerialFrame& frame);

enum class DecodeStatus {
    Ok,
    Incomplete,   // need more bytes; nothing consumed
    BadMagic,
    BadLength,
    BadCrc,
    UnknownType,
    BadPayload,   // CRC fine but a field is out of range
};

std::string to_string(DecodeStatus status);

struct DecodeResult {
    DecodeStatus status = DecodeStatus::Incomplete;
    std::optional<SerialFrame> frame;
    /// Bytes to drop from the front of the buffer. Errors drop a single byte
    /// so the scan can resynchronize on the next magic prefix; well-formed
    /// frames of unknown type are skipped whole.
    std::size_t consumed = 0;
};

/// Decodes the frame starting at bytes[0].
DecodeResult decode(std::span<const std::uint8_t> bytes);

/// Incremental decoder for a byte stream that may contain garbage, dropped
/// bytes or truncated frames.
class StreamDecoder {
public:
    void feed(std::span<const std::uint8_t> bytes);
    /// Next complete frame, or nullopt once only an incomplete tail remains.
    std::optional<SerialFrame> next();

    std::size_t buffered() const noexcept { return buffer_.size(); }
    std::size_t error_count() const noexcept { return errors_; }
    std::size_t crc_errors() const noexcept { return crc_errors_; }
    /// Bytes dropped while hunting for a magic prefix.
    std::size_t skipped_bytes() const noexcept { return skipped_; }
    DecodeStatus last_error() const noexcept { return last_error_; }

private:
    std::vector<std::uint8_t> buffer_;
    std::size_t errors_ = 0;
    std::size_t crc_errors_ = 0;
    std::size_t skipped_ = 0;
    DecodeStatus last_error_ = DecodeStatus::Ok;
};

/// Joint angle (rad, clamped to ±π/2) to centidegrees and back.
std::uint16_t angle_to_centideg(double rad);
double centideg_to_angle(std::uint16_t centideg);
/// Gripper ratio [0, 1] onto the full 0..180° servo stroke.
std::uint16_t ratio_to_centideg(double ratio);
double centideg_to_ratio(std::uint16_t centideg);

}  // namespace telearm::serial
