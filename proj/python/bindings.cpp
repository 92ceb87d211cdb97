#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "telearm/app_config.hpp"
#include "telearm/controller.hpp"
#include "telearm/kinematics.hpp"
#include "telearm/master.hpp"
#include "telearm/runtime.hpp"
#include "telearm/serialio.hpp"
#include "telearm/ui_bridge.hpp"

namespace py = pybind11;
using namespace telearm;
using namespace telearm::app;

namespace {

using Rows = std::vector<std::vector<double>>;
using Quat = std::array<double, 4>;
using Vec3 = std::array<double, 3>;

Rows to_rows(const Mat& m) {
    Rows out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) out[r].assign(m.row(r).begin(), m.row(r).end());
    return out;
}

Pose make_pose(const Quat& r, const Vec3& t) {
    return {UnitQuaternion(Quaternion::from_vec4(r)), PureQuaternion(Quaternion(0.0, t[0], t[1], t[2]))};
}

py::dict tick_dict(const Controller::TickResult& r) {
    py::dict d;
    d["q_d"] = r.q_d;
    d["u"] = r.u;
    d["err_t"] = r.translation_error;
    d["err_r"] = r.rotation_error;
    d["cost"] = r.cost;
    d["active_constraints"] = r.active_constraints;
    return d;
}

// Cockpit message handling without a socket: commands land on a target
// board, and the arm is reported at q (0 until set_q is called).
class UiSession {
public:
    UiSession() {
        ctx_.chain = umirobot_chain();
        ctx_.state = &bus_;
        ctx_.targets = &board_;
        ctx_.node = "sim";
        set_q(JointVector(ctx_.chain.dof(), 0.0));
    }

    void set_q(const JointVector& q) {
        StateSnapshot s;
        s.q = ctx_.chain.clamp(q);
        s.q_d = s.q;
        bus_.publish(s);
    }

    std::string state() const { return ui_state_message(bus_.latest()); }

    std::string hello(bool operator_role, double rate_hz) const { return ui_hello_message(ctx_, operator_role, rate_hz); }

    std::pair<std::string, bool> apply(const std::string& text) {
        bool unknown = false;
        std::string error = ui_apply_command(ctx_, text, unknown);
        return {error, unknown};
    }

    py::object target() const {
        const auto t = board_.get();
        if (!t) return py::none();
        py::dict d;
        d["gripper"] = t->gripper;
        if (const auto* j = std::get_if<JointTarget>(&t->mode)) {
            d["q"] = j->q;
        } else {
            const Pose& p = std::get<PoseTarget>(t->mode).pose;
            d["r"] = p.r.quat().vec4();
            d["t"] = p.t.vec3();
        }
        return d;
    }

private:
    StateBus bus_;
    TargetBoard board_;
    UiContext ctx_;
};

}  // namespace

PYBIND11_MODULE(_telearm, m) {
    m.doc() = "UMIRobot kinematics, controller and protocol helpers";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ControllerError>(m, "ControllerError", PyExc_RuntimeError);

    py::class_<DHChain>(m, "DHChain")
        .def_property_readonly("dof", &DHChain::dof)
        .def_property_readonly("q_min", &DHChain::q_min)
        .def_property_readonly("q_max", &DHChain::q_max)
        .def_property_readonly("rows", [](const DHChain& c) {
            std::vector<std::array<double, 4>> rows;
            for (const auto& r : c.rows()) rows.push_back({r.theta_offset, r.d, r.a, r.alpha});
            return rows;
        })
        .def("clamp", [](const DHChain& c, const JointVector& q) { return c.clamp(q); })
        .def("__str__", &serialize_chain);

    m.def("umirobot_chain", &umirobot_chain);
    m.def("load_chain", [](const std::string& path) { return load_chain(path); });

    m.def(
        "fkm",
        [](const JointVector& q, const DHChain& c) {
            const Pose p = fkm(c, q);
            return std::make_pair(p.r.quat().vec4(), p.t.vec3());
        },
        py::arg("q"), py::arg("chain") = umirobot_chain(), "(r as w,x,y,z; t as x,y,z)");
    m.def(
        "translation_jacobian", [](const JointVector& q, const DHChain& c) { return to_rows(translation_jacobian(c, q)); },
        py::arg("q"), py::arg("chain") = umirobot_chain());
    m.def(
        "rotation_jacobian", [](const JointVector& q, const DHChain& c) { return to_rows(rotation_jacobian(c, q)); },
        py::arg("q"), py::arg("chain") = umirobot_chain());
    m.def("rotation_error", [](const Quat& r, const Quat& r_d) {
        return rotation_error(UnitQuaternion(Quaternion::from_vec4(r)), UnitQuaternion(Quaternion::from_vec4(r_d))).vec4();
    });
    m.def("rotation_from_rpy", [](double roll, double pitch, double yaw) {
        return master::rotation_from_rpy(roll, pitch, yaw).quat().vec4();
    });

    py::class_<ControllerConfig>(m, "ControllerConfig")
        .def(py::init<>())
        .def_readwrite("alpha", &ControllerConfig::alpha)
        .def_readwrite("lambda_", &ControllerConfig::lambda)
        .def_readwrite("eta", &ControllerConfig::eta)
        .def_readwrite("T", &ControllerConfig::T)
        .def_readwrite("limit_gain", &ControllerConfig::limit_gain)
        .def("validate", &ControllerConfig::validate);

    py::class_<Controller>(m, "Controller")
        .def(py::init([](const JointVector& q0, const ControllerConfig& cfg, const DHChain& c) {
                 cfg.validate();
                 return Controller(c, cfg, q0);
             }),
             py::arg("q0"), py::arg("config") = ControllerConfig{}, py::arg("chain") = umirobot_chain())
        .def_property_readonly("q_d", &Controller::q_d)
        .def("tick_pose",
             [](Controller& c, const Quat& r, const Vec3& t) { return tick_dict(c.tick(PoseTarget{make_pose(r, t)})); },
             py::arg("r"), py::arg("t"))
        .def("tick_joint", [](Controller& c, const JointVector& q) { return tick_dict(c.tick(JointTarget{q})); })
        .def("reset", &Controller::reset);

    m.def("serial_set_targets", [](const serial::ServoWords& w) {
        const auto bytes = serial::encode(serial::SetTargets{w});
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    });
    m.def(
        "serial_decode",
        [](const py::bytes& b) -> py::tuple {
            const std::string s = b;
            const auto r = serial::decode({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
            if (!r.frame) return py::make_tuple(serial::to_string(r.status), py::none(), py::none());
            const auto words = std::visit(
                [](const auto& f) -> py::object {
                    using F = std::decay_t<decltype(f)>;
                    if constexpr (std::is_same_v<F, serial::GetState>) return py::none();
                    else if constexpr (std::is_same_v<F, serial::Pots>) return py::cast(f.counts);
                    else return py::cast(f.centideg);
                },
                *r.frame);
            return py::make_tuple(serial::to_string(r.status), static_cast<int>(serial::type_of(*r.frame)), words);
        },
        "(status, frame type byte, six words)");
    m.def("angle_to_centideg", &serial::angle_to_centideg);
    m.def("centideg_to_angle", &serial::centideg_to_angle);

    m.def("parse_config", [](const std::string& text) { return serialize_config(parse_config(text)); },
          "Validates a JSON config and returns it with every default filled in.");

    py::class_<UiSession>(m, "UiSession")
        .def(py::init<>())
        .def("hello", &UiSession::hello, py::arg("operator_role") = true, py::arg("rate_hz") = 30.0)
        .def("apply", &UiSession::apply, "(error text or '', unknown type)")
        .def("set_q", &UiSession::set_q)
        .def("state", &UiSession::state)
        .def("target", &UiSession::target);
}
