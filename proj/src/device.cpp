#include "telearm/device.hpp"

#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <poll.h>
#include <termios.h>
#include <unistd.h>

namespace telearm {

SimDevicePort::SimDevicePort(DHChain chain, ServoModel model, JointVector q0)
    : robot_(std::move(chain), model, std::move(q0)) {}

void SimDevicePort::send_targets(std::span<const double> q, double gripper) { robot_.set_targets(q, gripper); }

void SimDevicePort::update(double dt) { robot_.advance(dt); }

namespace {

speed_t baud_constant(int baud) {
    switch (baud) {
        case 9600: return B9600;
        case 57600: return B57600;
        case 115200: return B115200;
        case 230400: return B230400;
        default: throw DeviceError("unsupported baud rate " + std::to_string(baud));
    }
}

std::string errno_text() { return std::strerror(errno); }

}  // namespace

SerialLine::SerialLine(const std::string& path, int baud) {
    fd_ = ::open(path.c_str(), O_RDWR | O_NOCTTY | O_NONBLOCK);
    if (fd_ < 0) throw DeviceError("cannot open serial port " + path + ": " + errno_text());
    termios tio{};
    if (::tcgetattr(fd_, &tio) != 0) {
        ::close(fd_);
        throw DeviceError("not a serial device " + path + ": " + errno_text());
    }
    ::cfmakeraw(&tio);
    tio.c_cflag |= CLOCAL | CREAD;
    tio.c_cflag &= ~(CSTOPB | PARENB | CSIZE);
    tio.c_cflag |= CS8;
    const speed_t speed = baud_constant(baud);
    ::cfsetispeed(&tio, speed);
    ::cfsetospeed(&tio, speed);
    if (::tcsetattr(fd_, TCSANOW, &tio) != 0) {
        ::close(fd_);
        throw DeviceError("cannot configure serial port " + path + ": " + errno_text());
    }
}

SerialLine::SerialLine(int fd) : fd_(fd) {
    if (fd_ < 0) throw DeviceError("invalid descriptor");
    ::fcntl(fd_, F_SETFL, ::fcntl(fd_, F_GETFL) | O_NONBLOCK);
}

SerialLine::~SerialLine() {
    if (fd_ >= 0) ::close(fd_);
}

void SerialLine::write(std::span<const std::uint8_t> bytes) {
    std::size_t done = 0;
    while (done < bytes.size()) {
        const ssize_t n = ::write(fd_, bytes.data() + done, bytes.size() - done);
        if (n > 0) {
            done += static_cast<std::size_t>(n);
        } else if (n < 0 && (errno == EAGAIN || errno == EINTR)) {
            pollfd p{fd_, POLLOUT, 0};
            ::poll(&p, 1, 100);
        } else {
            throw DeviceError("serial write failed: " + errno_text());
        }
    }
}

std::vector<std::uint8_t> SerialLine::read_some(std::chrono::milliseconds timeout) {
    std::vector<std::uint8_t> out;
    pollfd p{fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (ready < 0 && errno != EINTR) throw DeviceError("serial poll failed: " + errno_text());
    if (ready <= 0) return out;
    if (p.revents & (POLLERR | POLLNVAL)) throw DeviceError("serial line error");
    std::uint8_t buf[256];
    while (true) {
        const ssize_t n = ::read(fd_, buf, sizeof buf);
        if (n > 0) {
            out.insert(out.end(), buf, buf + n);
            continue;
        }
        if (n == 0 || errno == EAGAIN || errno == EINTR) break;
        // EIO on a pty whose other end closed.
        throw DeviceError("serial read failed: " + errno_text());
    }
    return out;
}

SerialDevicePort::SerialDevicePort(std::unique_ptr<SerialLine> line, std::size_t dof, std::string name)
    : line_(std::move(line)), dof_(dof), name_(std::move(name)) {
    if (dof_ + 1 > serial::kServoChannels) throw DeviceError("serial device supports at most 5 joints");
    state_.q.assign(dof_, 0.0);
}

void SerialDevicePort::send_targets(std::span<const double> q, double gripper) {
    if (q.size() != dof_) throw std::invalid_argument("SerialDevicePort: dimension mismatch");
    serial::SetTargets frame;
    frame.centideg.fill(serial::angle_to_centideg(0.0));
    for (std::size_t i = 0; i < dof_; ++i) frame.centideg[i] = serial::angle_to_centideg(q[i]);
    frame.centideg[serial::kServoChannels - 1] = serial::ratio_to_centideg(gripper);
    pending_ = frame;
}

void SerialDevicePort::update(double dt) {
    if (pending_) {
        line_->write(serial::encode(*pending_));
        pending_.reset();
    }
    line_->write(serial::encode(serial::GetState{}));
    state_.t_sim += dt;
    drain(std::chrono::milliseconds(5));
}

void SerialDevicePort::drain(std::chrono::milliseconds wait) {
    decoder_.feed(line_->read_some(wait));
    while (auto frame = decoder_.next()) {
        if (const auto* s = std::get_if<serial::State>(&*frame)) {
            for (std::size_t i = 0; i < dof_; ++i) state_.q[i] = serial::centideg_to_angle(s->centideg[i]);
            state_.gripper = serial::centideg_to_ratio(s->centideg[serial::kServoChannels - 1]);
        } else if (const auto* p = std::get_if<serial::Pots>(&*frame)) {
            master::PotReading r{};
            for (std::size_t i = 0; i < master::kChannels; ++i) r[i] = p->counts[i];
            pots_ = r;
        }
    }
}

std::unique_ptr<DevicePort> open_device(const std::string& spec, const DHChain& chain, const ServoModel& model) {
    if (spec == "sim") return std::make_unique<SimDevicePort>(chain, model);
    constexpr std::string_view prefix = "serial:";
    if (spec.starts_with(prefix)) {
        const std::string path = spec.substr(prefix.size());
        if (path.empty()) throw std::invalid_argument("device spec 'serial:' needs a port path");
        return std::make_unique<SerialDevicePort>(std::make_unique<SerialLine>(path), chain.dof(), path);
    }
    throw std::invalid_argument("unknown device '" + spec + "' (expected sim or serial:PORT)");
}

FirmwareEmulator::FirmwareEmulator(DHChain chain, ServoModel model) : robot_(std::move(chain), model) {}

std::vector<std::uint8_t> FirmwareEmulator::receive(std::span<const std::uint8_t> bytes) {
    std::vector<std::uint8_t> reply;
    decoder_.feed(bytes);
    while (auto frame = decoder_.next()) {
        ++frames_;
        if (const auto* t = std::get_if<serial::SetTargets>(&*frame)) {
            JointVector q(robot_.chain().dof());
            for (std::size_t i = 0; i < q.size(); ++i) q[i] = serial::centideg_to_angle(t->centideg[i]);
            robot_.set_targets(q, serial::centideg_to_ratio(t->centideg[serial::kServoChannels - 1]));
        } else if (std::holds_alternative<serial::GetState>(*frame)) {
            serial::State s;
            s.centideg.fill(serial::angle_to_centideg(0.0));
            const RobotState& st = robot_.state();
            for (std::size_t i = 0; i < st.q.size(); ++i) s.centideg[i] = serial::angle_to_centideg(st.q[i]);
            s.centideg[serial::kServoChannels - 1] = serial::ratio_to_centideg(st.gripper);
            const auto bytes_out = serial::encode(s);
            reply.insert(reply.end(), bytes_out.begin(), bytes_out.end());
        }
    }
    return reply;
}

std::vector<std::uint8_t> FirmwareEmulator::advance(double dt) {
    robot_.advance(dt);
    if (!pots_) return {};
    since_pots_ += dt;
    if (since_pots_ + 1e-12 < 0.02) return {};
    since_pots_ = 0.0;
    serial::Pots p;
    for (std::size_t i = 0; i < master::kChannels; ++i) p.counts[i] = static_cast<std::uint16_t>((*pots_)[i]);
    return serial::encode(p);
}

}  // namespace telearm
