#include <doctest.h>

#include <atomic>
#include <fcntl.h>
#include <random>
#include <stdexcept>
#include <thread>
#include <unistd.h>

#include "support/oracles.hpp"
#include "telearm/device.hpp"
#include "telearm/serialio.hpp"

using namespace telearm;
using namespace telearm::serial;

namespace {

SerialFrame random_frame(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> kind(0, 3);
    std::uniform_int_distribution<int> cd(0, kCentidegMax), pot(0, kPotMax);
    ServoWords words{};
    switch (kind(rng)) {
        case 0:
            for (auto& w : words) w = static_cast<std::uint16_t>(cd(rng));
            return SetTargets{words};
        case 1: return GetState{};
        case 2:
            for (auto& w : words) w = static_cast<std::uint16_t>(cd(rng));
            return State{words};
        default:
            for (auto& w : words) w = static_cast<std::uint16_t>(pot(rng));
            return Pots{words};
    }
}

}  // namespace

TEST_CASE("crc8 matches the bitwise reference and the check value") {
    const std::string check = "123456789";
    const std::vector<std::uint8_t> bytes(check.begin(), check.end());
    CHECK(crc8(bytes) == 0xF4);
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> b(0, 255), len(0, 40);
    for (int i = 0; i < 500; ++i) {
        std::vector<std::uint8_t> v(len(rng));
        for (auto& x : v) x = static_cast<std::uint8_t>(b(rng));
        CHECK(crc8(v) == oracle::crc8_bitwise(v));
    }
}

TEST_CASE("frame layout") {
    const auto bytes = encode(SetTargets{{9000, 0, 18000, 1, 2, 3}});
    REQUIRE(bytes.size() == 4 + 12 + 1);
    CHECK(bytes[0] == 0xAA);
    CHECK(bytes[1] == 0x55);
    CHECK(bytes[2] == 0x01);
    CHECK(bytes[3] == 12);
    CHECK(bytes[4] == (9000 & 0xFF));
    CHECK(bytes[5] == (9000 >> 8));
    CHECK(bytes.back() == oracle::crc8_bitwise(std::span(bytes).subspan(2, 14)));
    CHECK(encode(GetState{}).size() == 5);
    CHECK_THROWS_AS(encode(SetTargets{{18001, 0, 0, 0, 0, 0}}), std::out_of_range);
    CHECK_THROWS_AS(encode(Pots{{1024, 0, 0, 0, 0, 0}}), std::out_of_range);
}

TEST_CASE("round trip and single-bit corruption") {
    std::mt19937_64 rng(77);
    for (int i = 0; i < 2000; ++i) {
        const SerialFrame f = random_frame(rng);
        const auto bytes = encode(f);
        const auto r = decode(bytes);
        REQUIRE(r.status == DecodeStatus::Ok);
        CHECK(*r.frame == f);
        CHECK(r.consumed == bytes.size());
        for (std::size_t bit = 16; bit < bytes.size() * 8; ++bit) {
            auto bad = bytes;
            bad[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
            CHECK(decode(bad).status != DecodeStatus::Ok);
        }
    }
}

TEST_CASE("decode statuses") {
    auto bytes = encode(State{{1, 2, 3, 4, 5, 6}});
    CHECK(decode(std::span(bytes).first(6)).status == DecodeStatus::Incomplete);
    CHECK(decode(std::span(bytes).first(6)).consumed == 0);
    auto magic = bytes;
    magic[0] = 0x00;
    CHECK(decode(magic).status == DecodeStatus::BadMagic);
    CHECK(decode(magic).consumed == 1);
    auto crc = bytes;
    crc.back() ^= 0x01;
    CHECK(decode(crc).status == DecodeStatus::BadCrc);

    std::vector<std::uint8_t> unknown{0xAA, 0x55, 0x42, 0x01, 0x07};
    unknown.push_back(crc8(std::span(unknown).subspan(2, 3)));
    const auto u = decode(unknown);
    CHECK(u.status == DecodeStatus::UnknownType);
    CHECK(u.consumed == unknown.size());

    std::vector<std::uint8_t> wrong_len{0xAA, 0x55, 0x02, 0x03, 0, 0, 0};
    wrong_len.push_back(crc8(std::span(wrong_len).subspan(2, 5)));
    CHECK(decode(wrong_len).status == DecodeStatus::BadLength);

    // A well-formed frame whose word is out of range.
    std::vector<std::uint8_t> range{0xAA, 0x55, 0x82, 12};
    for (int i = 0; i < 6; ++i) {
        range.push_back(0xFF);
        range.push_back(0x7F);
    }
    range.push_back(crc8(std::span(range).subspan(2)));
    CHECK(decode(range).status == DecodeStatus::BadPayload);
    CHECK(to_string(DecodeStatus::BadCrc) == "bad crc");
}

TEST_CASE("stream decoder resynchronizes through garbage and splits") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> b(0, 255), chunk(1, 9);
    std::vector<SerialFrame> sent;
    std::vector<std::uint8_t> stream;
    for (int i = 0; i < 300; ++i) {
        const SerialFrame f = random_frame(rng);
        sent.push_back(f);
        const auto bytes = encode(f);
        stream.insert(stream.end(), bytes.begin(), bytes.end());
        if (i % 10 == 0) {
            // Noise that cannot start a frame.
            for (int k = 0; k < 3; ++k) stream.push_back(static_cast<std::uint8_t>(b(rng) & 0x7F));
        }
    }
    StreamDecoder dec;
    std::vector<SerialFrame> got;
    for (std::size_t at = 0; at < stream.size();) {
        const std::size_t n = std::min<std::size_t>(chunk(rng), stream.size() - at);
        dec.feed(std::span(stream).subspan(at, n));
        at += n;
        while (auto f = dec.next()) got.push_back(*f);
    }
    CHECK(got == sent);
    CHECK(dec.skipped_bytes() == 90);
    CHECK(dec.error_count() == 0);
    CHECK(dec.buffered() == 0);

    // A corrupted frame is lost, its neighbours are not.
    auto a = encode(GetState{}), mid = encode(State{{7, 7, 7, 7, 7, 7}}), c = encode(Pots{{1, 2, 3, 4, 5, 6}});
    mid[6] ^= 0x10;
    StreamDecoder d2;
    d2.feed(a);
    d2.feed(mid);
    d2.feed(c);
    std::vector<SerialFrame> out;
    while (auto f = d2.next()) out.push_back(*f);
    CHECK(out == std::vector<SerialFrame>{GetState{}, Pots{{1, 2, 3, 4, 5, 6}}});
    CHECK(d2.crc_errors() == 1);
}

TEST_CASE("unit conversions") {
    CHECK(angle_to_centideg(0.0) == 9000);
    CHECK(angle_to_centideg(-std::numbers::pi / 2) == 0);
    CHECK(angle_to_centideg(std::numbers::pi / 2) == 18000);
    CHECK(angle_to_centideg(10.0) == 18000);
    CHECK(centideg_to_angle(9000) == 0.0);
    CHECK(ratio_to_centideg(1.0) == 18000);
    CHECK(centideg_to_ratio(9000) == 0.5);
    for (double a = -1.5; a < 1.5; a += 0.013)
        CHECK(std::abs(centideg_to_angle(angle_to_centideg(a)) - a) <= 0.005 * std::numbers::pi / 180 + 1e-15);
}

TEST_CASE("firmware emulator answers polls and streams pots") {
    FirmwareEmulator fw(umirobot_chain(), ServoModel{});
    auto reply = fw.receive(encode(SetTargets{{12000, 9000, 9000, 9000, 9000, 18000}}));
    CHECK(reply.empty());
    for (int i = 0; i < 100; ++i) fw.advance(0.01);
    reply = fw.receive(encode(GetState{}));
    const auto r = decode(reply);
    REQUIRE(r.status == DecodeStatus::Ok);
    const auto& st = std::get<State>(*r.frame);
    CHECK(st.centideg[0] == 12000);
    CHECK(st.centideg[5] == 18000);
    CHECK(fw.frames_received() == 2);

    fw.set_pots({1, 2, 3, 4, 5, 6});
    int frames = 0;
    for (int i = 0; i < 10; ++i) frames += fw.advance(0.01).empty() ? 0 : 1;
    CHECK(frames == 5);
}

TEST_CASE("serial device port over a pseudo-terminal") {
    const int master_fd = ::posix_openpt(O_RDWR | O_NOCTTY);
    REQUIRE(master_fd >= 0);
    REQUIRE(::grantpt(master_fd) == 0);
    REQUIRE(::unlockpt(master_fd) == 0);
    const std::string slave = ::ptsname(master_fd);

    const DHChain chain = umirobot_chain();
    std::atomic<bool> stop{false};
    std::thread board([&] {
        SerialLine line(master_fd);
        FirmwareEmulator fw(chain, ServoModel{});
        fw.set_pots({100, 200, 300, 400, 500, 600});
        while (!stop) {
            std::vector<std::uint8_t> in;
            try {
                in = line.read_some(std::chrono::milliseconds(2));
            } catch (const DeviceError&) {
                // EIO while the slave side is not open yet.
                std::this_thread::sleep_for(std::chrono::milliseconds(1));
                continue;
            }
            const auto out = fw.receive(in);
            if (!out.empty()) line.write(out);
            const auto pots = fw.advance(0.002);
            if (!pots.empty()) line.write(pots);
        }
    });

    {
        SerialDevicePort port(std::make_unique<SerialLine>(slave), 5, slave);
        CHECK(port.describe() == "serial:" + slave);
        const JointVector target{0.5, -0.25, 0.0, 0.1, -0.1};
        port.send_targets(target, 0.75);
        for (int i = 0; i < 200; ++i) port.update(0.01);
        const RobotState s = port.state();
        for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(s.q[i] - target[i]) < 0.01 * std::numbers::pi / 180);
        CHECK(s.gripper == doctest::Approx(0.75).epsilon(1e-3));
        REQUIRE(port.pots().has_value());
        CHECK(*port.pots() == master::PotReading{100, 200, 300, 400, 500, 600});
        CHECK(port.decoder().error_count() == 0);
    }
    stop = true;
    board.join();
}

TEST_CASE("open_device") {
    const DHChain chain = umirobot_chain();
    CHECK(open_device("sim", chain, ServoModel{})->describe() == "sim");
    CHECK_THROWS_AS(open_device("serial:/nonexistent/tty", chain, ServoModel{}), DeviceError);
    CHECK_THROWS_AS(open_device("usb", chain, ServoModel{}), std::invalid_argument);
    CHECK_THROWS_AS(open_device("serial:", chain, ServoModel{}), std::invalid_argument);
}
