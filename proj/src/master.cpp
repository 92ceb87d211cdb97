#include "telearm/master.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

namespace telearm::master {

namespace {

double channel_fraction(const CalibrationState& cal, const PotReading& r, std::size_t ch) {
    if (!cal.channel_calibrated(ch)) {
        throw CalibrationError("master: channel " + std::to_string(ch + 1) + " is not calibrated");
    }
    const double span = cal.max_seen[ch] - cal.min_seen[ch];
    return std::clamp((r[ch] - cal.min_seen[ch]) / span, 0.0, 1.0);
}

double lerp(double lo, double hi, double s) {
    // Endpoints are returned exactly.
    if (s <= 0.0) return lo;
    if (s >= 1.0) return hi;
    return lo + s * (hi - lo);
}

void check_reading(const PotReading& r) {
    for (std::size_t ch = 0; ch < kChannels; ++ch) {
        if (r[ch] < 0 || r[ch] > kAdcMax) {
            throw std::out_of_range("master: channel " + std::to_string(ch + 1) + " count " +
                                    std::to_string(r[ch]) + " outside [0, 1023]");
        }
    }
}

}  // namespace

bool CalibrationState::calibrated() const {
    for (std::size_t ch = 0; ch < kChannels; ++ch)
        if (!channel_calibrated(ch)) return false;
    return true;
}

CalibrationState ingest(const CalibrationState& cal, const PotReading& r) {
    check_reading(r);
    CalibrationState out = cal;
    for (std::size_t ch = 0; ch < kChannels; ++ch) {
        if (cal.samples == 0) {
            out.min_seen[ch] = out.max_seen[ch] = r[ch];
        } else {
            out.min_seen[ch] = std::min(cal.min_seen[ch], r[ch]);
            out.max_seen[ch] = std::max(cal.max_seen[ch], r[ch]);
        }
    }
    out.samples = cal.samples + 1;
    return out;
}

JointCommand map_to_joints(const CalibrationState& cal, const PotReading& r, const DHChain& chain) {
    if (chain.dof() + 1 > kChannels) throw std::invalid_argument("master: chain has more joints than pot channels");
    JointCommand out;
    out.q.resize(chain.dof());
    for (std::size_t i = 0; i < chain.dof(); ++i) {
        out.q[i] = lerp(chain.q_min()[i], chain.q_max()[i], channel_fraction(cal, r, i));
    }
    out.gripper = channel_fraction(cal, r, kChannels - 1);
    return out;
}

std::array<double, 3> Workspace::center() const {
    return {0.5 * (t_min[0] + t_max[0]), 0.5 * (t_min[1] + t_max[1]), 0.5 * (t_min[2] + t_max[2])};
}

std::array<double, 3> Workspace::clamp(const std::array<double, 3>& t) const {
    return {std::clamp(t[0], t_min[0], t_max[0]), std::clamp(t[1], t_min[1], t_max[1]),
            std::clamp(t[2], t_min[2], t_max[2])};
}

void Workspace::validate() const {
    for (std::size_t i = 0; i < 3; ++i) {
        if (!(t_min[i] < t_max[i])) throw std::invalid_argument("workspace: box minimum must be below maximum");
        if (!(angle_min[i] < angle_max[i])) throw std::invalid_argument("workspace: angle minimum must be below maximum");
    }
    const Quaternion b = Quaternion::from_vec4(base_rotation);
    if (std::abs(b.norm() - 1.0) > UnitQuaternion::kRenormalizeWindow) {
        throw std::invalid_argument("workspace: base_rotation must be a unit quaternion");
    }
}

UnitQuaternion Workspace::orientation(const std::array<double, 3>& rpy) const {
    std::array<double, 3> a{};
    for (std::size_t i = 0; i < 3; ++i) a[i] = std::clamp(rpy[i], angle_min[i], angle_max[i]);
    return UnitQuaternion(Quaternion::from_vec4(base_rotation)) * rotation_from_rpy(a[0], a[1], a[2]);
}

UnitQuaternion rotation_from_rpy(double roll, double pitch, double yaw) {
    return from_axis_angle(PureQuaternion(0, 0, 1), yaw) * from_axis_angle(PureQuaternion(0, 1, 0), pitch) *
           from_axis_angle(PureQuaternion(1, 0, 0), roll);
}

Pose map_to_pose(const CalibrationState& cal, const PotReading& r, const Workspace& workspace) {
    std::array<double, 3> t{};
    std::array<double, 3> rpy{};
    for (std::size_t i = 0; i < 3; ++i) {
        t[i] = lerp(workspace.t_min[i], workspace.t_max[i], channel_fraction(cal, r, i));
        rpy[i] = lerp(workspace.angle_min[i], workspace.angle_max[i], channel_fraction(cal, r, i + 3));
    }
    return {workspace.orientation(rpy), PureQuaternion(t[0], t[1], t[2])};
}

PotSmoother::PotSmoother(double factor) : factor_(factor) {
    if (!(factor >= 0.0 && factor < 1.0)) throw std::invalid_argument("PotSmoother: factor must lie in [0, 1)");
}

PotReading PotSmoother::filter(const PotReading& r) {
    if (factor_ == 0.0) return r;
    if (!state_) {
        state_.emplace();
        for (std::size_t ch = 0; ch < kChannels; ++ch) (*state_)[ch] = r[ch];
        return r;
    }
    PotReading out{};
    for (std::size_t ch = 0; ch < kChannels; ++ch) {
        double& s = (*state_)[ch];
        s = factor_ * s + (1.0 - factor_) * r[ch];
        out[ch] = static_cast<int>(std::lround(s));
    }
    return out;
}

void write_calibration(std::ostream& out, const CalibrationState& cal) {
    out << "# channel min max\n" << "samples " << cal.samples << '\n';
    for (std::size_t ch = 0; ch < kChannels; ++ch) {
        out << ch + 1 << ' ' << cal.min_seen[ch] << ' ' << cal.max_seen[ch] << '\n';
    }
}

CalibrationState read_calibration(std::istream& in) {
    CalibrationState cal;
    std::array<bool, kChannels> seen{};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        if (line.find("samples") != std::string::npos) {
            std::string key;
            if (!(ls >> key >> cal.samples) || key != "samples") {
                throw CalibrationError("calibration file line " + std::to_string(line_no) + ": bad samples line");
            }
            continue;
        }
        std::size_t ch = 0;
        int lo = 0, hi = 0;
        if (!(ls >> ch)) continue;
        std::string extra;
        if (!(ls >> lo >> hi) || (ls >> extra) || ch < 1 || ch > kChannels || lo < 0 || hi > kAdcMax || lo > hi) {
            throw CalibrationError("calibration file line " + std::to_string(line_no) + ": expected 'channel min max'");
        }
        cal.min_seen[ch - 1] = lo;
        cal.max_seen[ch - 1] = hi;
        seen[ch - 1] = true;
    }
    for (std::size_t ch = 0; ch < kChannels; ++ch) {
        if (!seen[ch]) throw CalibrationError("calibration file: channel " + std::to_string(ch + 1) + " missing");
    }
    cal.samples = std::max<std::size_t>(cal.samples, 1);
    return cal;
}

void save_calibration(const CalibrationState& cal, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw CalibrationError("cannot write calibration file " + path.string());
    write_calibration(out, cal);
}

CalibrationState load_calibration(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CalibrationError("cannot open calibration file " + path.string());
    return read_calibration(in);
}

}  // namespace telearm::master
