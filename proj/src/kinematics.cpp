#include "telearm/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace telearm {

namespace {

void require_dof(const DHChain& chain, std::span<const double> q, const char* what) {
    if (q.size() != chain.dof()) {
        throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(chain.dof()) +
                                    " joint values, got " + std::to_string(q.size()));
    }
}

// Rotation and translation of one link, RotZ(θ)·TransZ(d)·TransX(a)·RotX(α).
struct LinkTransform {
    Quaternion r;
    Quaternion t;
};

LinkTransform link_transform(const DHRow& row, double q) {
    const double theta = q + row.theta_offset;
    const double ct = std::cos(0.5 * theta), st = std::sin(0.5 * theta);
    const double ca = std::cos(0.5 * row.alpha), sa = std::sin(0.5 * row.alpha);
    // rz(θ)·rx(α) expanded.
    const Quaternion r(ct * ca, ct * sa, st * sa, st * ca);
    const Quaternion t(0.0, row.a * std::cos(theta), row.a * std::sin(theta), row.d);
    return {r, t};
}

// Rotation and origin of every frame 0..n, frame 0 being the base.
struct FrameChain {
    std::vector<Quaternion> r;
    std::vector<Quaternion> t;
};

FrameChain frames(const DHChain& chain, std::span<const double> q) {
    FrameChain out;
    out.r.reserve(chain.dof() + 1);
    out.t.reserve(chain.dof() + 1);
    out.r.emplace_back(1.0);
    out.t.emplace_back();
    for (std::size_t i = 0; i < chain.dof(); ++i) {
        const LinkTransform link = link_transform(chain.rows()[i], q[i]);
        const Quaternion& r = out.r.back();
        out.t.push_back(out.t.back() + r * link.t * r.conj());
        out.r.push_back(normalize(r * link.r));
    }
    return out;
}

}  // namespace

DHChain::DHChain(std::vector<DHRow> rows, JointVector q_min, JointVector q_max)
    : rows_(std::move(rows)), q_min_(std::move(q_min)), q_max_(std::move(q_max)) {
    if (q_min_.size() != rows_.size() || q_max_.size() != rows_.size()) {
        throw std::invalid_argument("DHChain: limit vectors must have one entry per row");
    }
    for (const auto& row : rows_) {
        if (!std::isfinite(row.theta_offset) || !std::isfinite(row.d) || !std::isfinite(row.a) ||
            !std::isfinite(row.alpha)) {
            throw std::invalid_argument("DHChain: non-finite DH parameter");
        }
    }
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        if (!(q_min_[i] < q_max_[i])) throw std::invalid_argument("DHChain: q_min must be below q_max");
    }
}

JointVector DHChain::clamp(std::span<const double> q) const {
    if (q.size() != dof()) throw std::invalid_argument("DHChain::clamp: dimension mismatch");
    JointVector out(q.begin(), q.end());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], q_min_[i], q_max_[i]);
    return out;
}

bool DHChain::within_limits(std::span<const double> q, double tol) const {
    if (q.size() != dof()) return false;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (!(q[i] >= q_min_[i] - tol && q[i] <= q_max_[i] + tol)) return false;
    }
    return true;
}

DHChain umirobot_chain() {
    constexpr double pi = std::numbers::pi;
    std::vector<DHRow> rows{
        {0.0, 0.00245, 0.0, -pi / 2},
        {-pi / 2, 0.0, 0.0813, pi},
        {0.0, 0.0, 0.0, pi / 2},
        {0.0, 0.16519, 0.0, -pi / 2},
        {0.0, 0.0, 0.0, pi / 2},
    };
    return DHChain(std::move(rows), JointVector(5, -pi / 2), JointVector(5, pi / 2));
}

Pose fkm(const DHChain& chain, std::span<const double> q) {
    require_dof(chain, q, "fkm");
    const FrameChain f = frames(chain, q);
    return {UnitQuaternion(f.r.back()), PureQuaternion(f.t.back())};
}

KinematicsSnapshot evaluate(const DHChain& chain, std::span<const double> q) {
    require_dof(chain, q, "evaluate");
    const FrameChain f = frames(chain, q);
    const std::size_t n = chain.dof();
    const Quaternion& r_end = f.r.back();
    const Quaternion& t_end = f.t.back();

    KinematicsSnapshot out{{UnitQuaternion(r_end), PureQuaternion(t_end)}, Mat(4, n), Mat(4, n)};
    const Mat right_end = hamilton_right(r_end);
    for (std::size_t i = 0; i < n; ++i) {
        // Joint i turns about the z axis of frame i, expressed in the base frame.
        const Quaternion& r_prev = f.r[i];
        const Quaternion axis = r_prev * Quaternion::k() * r_prev.conj();
        // ∂r/∂qᵢ = ½·axis·r
        const Vec dr = right_end * std::span<const double>(Vec{0.5 * axis.w, 0.5 * axis.x, 0.5 * axis.y, 0.5 * axis.z});
        out.j_rotation.set_col(i, dr);
        // ∂t/∂qᵢ = axis × (t − pᵢ), the vector part of ½(axis·d − d·axis).
        const Quaternion lever = t_end - f.t[i];
        const Quaternion cross = 0.5 * (axis * lever - lever * axis);
        out.j_translation.set_col(i, std::array<double, 4>{0.0, cross.x, cross.y, cross.z});
    }
    return out;
}

Mat rotation_jacobian(const DHChain& chain, std::span<const double> q) {
    require_dof(chain, q, "rotation_jacobian");
    return evaluate(chain, q).j_rotation;
}

Mat translation_jacobian(const DHChain& chain, std::span<const double> q) {
    require_dof(chain, q, "translation_jacobian");
    return evaluate(chain, q).j_translation;
}

std::vector<std::array<double, 3>> link_origins(const DHChain& chain, std::span<const double> q) {
    require_dof(chain, q, "link_origins");
    const FrameChain f = frames(chain, q);
    std::vector<std::array<double, 3>> out;
    out.reserve(f.t.size());
    for (const auto& t : f.t) out.push_back({t.x, t.y, t.z});
    return out;
}

DHChain parse_chain(std::istream& in) {
    std::vector<DHRow> rows;
    std::vector<double> limits;
    bool have_limits = false;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string first;
        if (!(ls >> first)) continue;
        auto fail = [&](const std::string& why) {
            throw std::invalid_argument("chain file line " + std::to_string(line_no) + ": " + why);
        };
        if (have_limits) fail("content after the limits line");
        if (first == "limits") {
            double v;
            while (ls >> v) limits.push_back(v);
            if (!ls.eof()) fail("malformed limits");
            have_limits = true;
            continue;
        }
        DHRow row;
        try {
            row.theta_offset = std::stod(first);
        } catch (const std::exception&) {
            fail("expected a number, got '" + first + "'");
        }
        if (!(ls >> row.d >> row.a >> row.alpha)) fail("expected four values: theta_offset d a alpha");
        std::string extra;
        if (ls >> extra) fail("trailing content '" + extra + "'");
        rows.push_back(row);
    }
    if (!have_limits) throw std::invalid_argument("chain file: missing trailing limits line");
    const std::size_t n = rows.size();
    JointVector q_min, q_max;
    if (limits.size() == 2) {
        q_min.assign(n, limits[0]);
        q_max.assign(n, limits[1]);
    } else if (limits.size() == 2 * n) {
        q_min.assign(limits.begin(), limits.begin() + static_cast<std::ptrdiff_t>(n));
        q_max.assign(limits.begin() + static_cast<std::ptrdiff_t>(n), limits.end());
    } else {
        throw std::invalid_argument("chain file: limits line needs 2 or " + std::to_string(2 * n) + " values");
    }
    return DHChain(std::move(rows), std::move(q_min), std::move(q_max));
}

DHChain load_chain(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open chain file " + path.string());
    return parse_chain(in);
}

std::string serialize_chain(const DHChain& chain) {
    std::ostringstream os;
    os.precision(17);
    os << "# theta_offset d a alpha\n";
    for (const auto& row : chain.rows()) {
        os << row.theta_offset << ' ' << row.d << ' ' << row.a << ' ' << row.alpha << '\n';
    }
    os << "limits";
    for (double v : chain.q_min()) os << ' ' << v;
    for (double v : chain.q_max()) os << ' ' << v;
    os << '\n';
    return os.str();
}

void save_chain(const DHChain& chain, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write chain file " + path.string());
    out << serialize_chain(chain);
}

}  // namespace telearm
