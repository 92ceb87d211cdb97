#include "telearm/serialio.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace telearm::serial {

namespace {

constexpr std::array<std::uint8_t, 256> make_crc_table() {
    std::array<std::uint8_t, 256> table{};
    for (int i = 0; i < 256; ++i) {
        auto c = static_cast<std::uint8_t>(i);
        for (int bit = 0; bit < 8; ++bit) c = static_cast<std::uint8_t>((c & 0x80) ? (c << 1) ^ 0x07 : c << 1);
        table[static_cast<std::size_t>(i)] = c;
    }
    return table;
}

constexpr auto kCrcTable = make_crc_table();

bool known_type(std::uint8_t t) {
    return t == 0x01 || t == 0x02 || t == 0x81 || t == 0x82;
}

void put_words(std::vector<std::uint8_t>& out, const ServoWords& words, std::uint16_t max) {
    for (std::uint16_t v : words) {
        if (v > max) throw std::out_of_range("serial encode: field value " + std::to_string(v) + " above " + std::to_string(max));
        out.push_back(static_cast<std::uint8_t>(v & 0xFF));
        out.push_back(static_cast<std::uint8_t>(v >> 8));
    }
}

std::optional<ServoWords> get_words(std::span<const std::uint8_t> payload, std::uint16_t max) {
    ServoWords words{};
    for (std::size_t i = 0; i < kServoChannels; ++i) {
        words[i] = static_cast<std::uint16_t>(payload[2 * i] | (payload[2 * i + 1] << 8));
        if (words[i] > max) return std::nullopt;
    }
    return words;
}

}  // namespace

FrameType type_of(const SerialFrame& frame) {
    struct Visitor {
        FrameType operator()(const SetTargets&) const { return FrameType::SetTargets; }
        FrameType operator()(const GetState&) const { return FrameType::GetState; }
        FrameType operator()(const State&) const { return FrameType::State; }
        FrameType operator()(const Pots&) const { return FrameType::Pots; }
    };
    return std::visit(Visitor{}, frame);
}

std::size_t payload_size(FrameType type) {
    return type == FrameType::GetState ? 0 : 2 * kServoChannels;
}

std::uint8_t crc8(std::span<const std::uint8_t> bytes, std::uint8_t crc) {
    for (std::uint8_t b : bytes) crc = kCrcTable[crc ^ b];
    return crc;
}

std::vector<std::uint8_t> encode(const SerialFrame& frame) {
    const FrameType type = type_of(frame);
    std::vector<std::uint8_t> out{kMagic0, kMagic1, static_cast<std::uint8_t>(type),
                                  static_cast<std::uint8_t>(payload_size(type))};
    out.reserve(kHeaderSize + payload_size(type) + 1);
    if (const auto* f = std::get_if<SetTargets>(&frame)) put_words(out, f->centideg, kCentidegMax);
    if (const auto* f = std::get_if<State>(&frame)) put_words(out, f->centideg, kCentidegMax);
    if (const auto* f = std::get_if<Pots>(&frame)) put_words(out, f->counts, kPotMax);
    out.push_back(crc8(std::span(out).subspan(2)));
    return out;
}

std::string to_string(DecodeStatus status) {
    switch (status) {
        case DecodeStatus::Ok: return "ok";
        case DecodeStatus::Incomplete: return "incomplete";
        case DecodeStatus::BadMagic: return "bad magic";
        case DecodeStatus::BadLength: return "bad length";
        case DecodeStatus::BadCrc: return "bad crc";
        case DecodeStatus::UnknownType: return "unknown type";
        case DecodeStatus::BadPayload: return "bad payload";
    }
    return "?";
}

DecodeResult decode(std::span<const std::uint8_t> bytes) {
    auto error = [](DecodeStatus s) { return DecodeResult{s, std::nullopt, 1}; };
    if (bytes.empty()) return {};
    if (bytes[0] != kMagic0) return error(DecodeStatus::BadMagic);
    if (bytes.size() < 2) return {};
    if (bytes[1] != kMagic1) return error(DecodeStatus::BadMagic);
    if (bytes.size() < kHeaderSize) return {};

    const std::uint8_t type = bytes[2];
    const std::size_t len = bytes[3];
    if (len > kMaxPayload) return error(DecodeStatus::BadLength);
    if (known_type(type) && len != payload_size(static_cast<FrameType>(type))) return error(DecodeStatus::BadLength);

    const std::size_t total = kHeaderSize + len + 1;
    if (bytes.size() < total) return {};
    if (crc8(bytes.subspan(2, 2 + len)) != bytes[total - 1]) return error(DecodeStatus::BadCrc);
    if (!known_type(type)) return {DecodeStatus::UnknownType, std::nullopt, total};

    const auto payload = bytes.subspan(kHeaderSize, len);
    DecodeResult out{DecodeStatus::Ok, std::nullopt, total};
    switch (static_cast<FrameType>(type)) {
        case FrameType::GetState: out.frame = GetState{}; break;
        case FrameType::SetTargets:
            if (auto w = get_words(payload, kCentidegMax)) out.frame = SetTargets{*w};
            break;
        case FrameType::State:
            if (auto w = get_words(payload, kCentidegMax)) out.frame = State{*w};
            break;
        case FrameType::Pots:
            if (auto w = get_words(payload, kPotMax)) out.frame = Pots{*w};
            break;
    }
    if (!out.frame) return {DecodeStatus::BadPayload, std::nullopt, total};
    return out;
}

void StreamDecoder::feed(std::span<const std::uint8_t> bytes) {
    buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<SerialFrame> StreamDecoder::next() {
    while (!buffer_.empty()) {
        const DecodeResult r = decode(buffer_);
        if (r.status == DecodeStatus::Incomplete) return std::nullopt;
        buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(r.consumed));
        if (r.status == DecodeStatus::Ok) return r.frame;
        if (r.status == DecodeStatus::BadMagic) {
            skipped_ += r.consumed;
            continue;
        }
        ++errors_;
        if (r.status == DecodeStatus::BadCrc) ++crc_errors_;
        last_error_ = r.status;
    }
    return std::nullopt;
}

std::uint16_t angle_to_centideg(double rad) {
    constexpr double half_pi = std::numbers::pi / 2;
    const double clamped = std::clamp(rad, -half_pi, half_pi);
    return static_cast<std::uint16_t>(std::lround((clamped + half_pi) * (kCentidegMax / std::numbers::pi)));
}

double centideg_to_angle(std::uint16_t centideg) {
    return (static_cast<int>(centideg) - kCentidegMax / 2) * (std::numbers::pi / kCentidegMax);
}

std::uint16_t ratio_to_centideg(double ratio) {
    return static_cast<std::uint16_t>(std::lround(std::clamp(ratio, 0.0, 1.0) * kCentidegMax));
}

double centideg_to_ratio(std::uint16_t centideg) { return static_cast<double>(centideg) / kCentidegMax; }

}  // namespace telearm::serial
