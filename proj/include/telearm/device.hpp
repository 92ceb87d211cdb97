#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include "telearm/master.hpp"
#include "telearm/serialio.hpp"
#include "telearm/simdevice.hpp"

namespace telearm {

class DeviceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Where servo targets go and joint state comes from: the simulated arm or
/// an Arduino-class board on a serial line.
class DevicePort {
public:
    virtual ~DevicePort() = default;

    virtual void send_targets(std::span<const double> q, double gripper) = 0;
    /// Advances the device by dt seconds (simulation) or services the serial
    /// line (hardware).
    virtual void update(double dt) = 0;
    virtual RobotState state() const = 0;
    /// Latest potentiometer reading, when the device reports any.
    virtual std::optional<master::PotReading> pots() const { return std::nullopt; }
    virtual std::string describe() const = 0;
};

class SimDevicePort final : public DevicePort {
public:
    SimDevicePort(DHChain chain, ServoModel model, JointVector q0 = {});

    void send_targets(std::span<const double> q, double gripper) override;
    void update(double dt) override;
    RobotState state() const override { return robot_.state(); }
    std::string describe() const override { return "sim"; }

    const SimulatedRobot& robot() const noexcept { return robot_; }

private:
    SimulatedRobot robot_;
};

/// Raw serial line at 115200 baud, 8N1, non-blocking reads.
class SerialLine {
public:
    explicit SerialLine(const std::string& path, int baud = 115200);
    /// Adopts an already-open descriptor (e.g. one end of a pty).
    explicit SerialLine(int fd);
    ~SerialLine();
    SerialLine(const SerialLine&) = delete;
    SerialLine& operator=(const SerialLine&) = delete;

    void write(std::span<const std::uint8_t> bytes);
    /// Reads whatever is available, waiting up to timeout for the first byte.
    std::vector<std::uint8_t> read_some(std::chrono::milliseconds timeout);

private:
    int fd_ = -1;
};

/// Device port speaking the framed serial protocol. Each update() sends the
/// latest SET_TARGETS and a GET_STATE poll, then drains STATE/POTS replies.
class SerialDevicePort final : public DevicePort {
public:
    SerialDevicePort(std::unique_ptr<SerialLine> line, std::size_t dof, std::string name);

    void send_targets(std::span<const double> q, double gripper) override;
    void update(double dt) override;
    RobotState state() const override { return state_; }
    std::optional<master::PotReading> pots() const override { return pots_; }
    std::string describe() const override { return "serial:" + name_; }

    const serial::StreamDecoder& decoder() const noexcept { return decoder_; }

private:
    void drain(std::chrono::milliseconds wait);

    std::unique_ptr<SerialLine> line_;
    std::size_t dof_;
    std::string name_;
    serial::StreamDecoder decoder_;
    RobotState state_;
    std::optional<master::PotReading> pots_;
    std::optional<serial::SetTargets> pending_;
};

/// Opens "sim" or "serial:PATH". Throws DeviceError when the port cannot be
/// opened and std::invalid_argument for an unknown spec.
std::unique_ptr<DevicePort> open_device(const std::string& spec, const DHChain& chain, const ServoModel& model);

/// Board-side protocol handler: feeds host bytes in, produces reply bytes,
/// drives a SimulatedRobot. Used to exercise the serial path without hardware.
class FirmwareEmulator {
public:
    FirmwareEmulator(DHChain chain, ServoModel model);

    /// Processes host bytes; returns the reply bytes.
    std::vector<std::uint8_t> receive(std::span<const std::uint8_t> bytes);
    /// Advances servos; returns an unsolicited POTS frame every 20 ms of
    /// device time when a pot source is set.
    std::vector<std::uint8_t> advance(double dt);

    void set_pots(const master::PotReading& pots) { pots_ = pots; }
    const SimulatedRobot& robot() const noexcept { return robot_; }
    std::size_t frames_received() const noexcept { return frames_; }

private:
    SimulatedRobot robot_;
    serial::StreamDecoder decoder_;
    std::optional<master::PotReading> pots_;
    double since_pots_ = 0.0;
    std::size_t frames_ = 0;
};

}  // namespace telearm
