#include <doctest.h>

#include <filesystem>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "telearm/master.hpp"

using namespace telearm;
using namespace telearm::master;
constexpr double kPi = std::numbers::pi;

namespace {

CalibrationState sweep(int lo, int hi) {
    CalibrationState cal;
    cal = ingest(cal, PotReading{lo, lo, lo, lo, lo, lo});
    cal = ingest(cal, PotReading{hi, hi, hi, hi, hi, hi});
    return cal;
}

}  // namespace

TEST_CASE("ingest widens the range and rejects bad counts") {
    CalibrationState cal;
    CHECK_FALSE(cal.calibrated());
    cal = ingest(cal, PotReading{500, 500, 500, 500, 500, 500});
    CHECK(cal.min_seen[0] == 500);
    CHECK(cal.max_seen[0] == 500);
    CHECK_FALSE(cal.channel_calibrated(0));
    cal = ingest(cal, PotReading{100, 520, 900, 500, 500, 0});
    CHECK(cal.min_seen[0] == 100);
    CHECK(cal.max_seen[2] == 900);
    CHECK(cal.channel_calibrated(0));
    CHECK_FALSE(cal.channel_calibrated(1));
    CHECK_FALSE(cal.calibrated());
    CHECK(cal.samples == 2);
    CHECK_THROWS_AS(ingest(cal, PotReading{0, 0, 0, 0, 0, 1024}), std::out_of_range);
    CHECK_THROWS_AS(ingest(cal, PotReading{-1, 0, 0, 0, 0, 0}), std::out_of_range);
}

TEST_CASE("joint mapping endpoints and monotonicity") {
    const DHChain c = umirobot_chain();
    const CalibrationState cal = sweep(100, 900);
    CHECK(cal.calibrated());
    const auto lo = map_to_joints(cal, PotReading{100, 100, 100, 100, 100, 100}, c);
    const auto hi = map_to_joints(cal, PotReading{900, 900, 900, 900, 900, 900}, c);
    const auto mid = map_to_joints(cal, PotReading{500, 500, 500, 500, 500, 500}, c);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(lo.q[i] == doctest::Approx(-kPi / 2));
        CHECK(hi.q[i] == doctest::Approx(kPi / 2));
        CHECK(std::abs(mid.q[i]) < 1e-12);
    }
    CHECK(lo.gripper == 0.0);
    CHECK(hi.gripper == 1.0);
    CHECK(mid.gripper == doctest::Approx(0.5));
    // Out-of-calibration counts clamp.
    const auto past = map_to_joints(cal, PotReading{1023, 0, 500, 500, 500, 1023}, c);
    CHECK(past.q[0] == kPi / 2);
    CHECK(past.q[1] == -kPi / 2);
    CHECK(past.gripper == 1.0);

    double prev = -10.0;
    for (int count = 100; count <= 900; count += 7) {
        const double q0 = map_to_joints(cal, PotReading{count, 500, 500, 500, 500, 500}, c).q[0];
        CHECK(q0 >= prev);
        prev = q0;
    }
}

TEST_CASE("uncalibrated channels are an error") {
    const DHChain c = umirobot_chain();
    CalibrationState cal;
    cal = ingest(cal, PotReading{500, 500, 500, 500, 500, 500});
    CHECK_THROWS_AS(map_to_joints(cal, PotReading{500, 500, 500, 500, 500, 500}, c), CalibrationError);
    CHECK_THROWS_AS(map_to_pose(cal, PotReading{500, 500, 500, 500, 500, 500}, Workspace{}), CalibrationError);
}

TEST_CASE("pose mapping covers the workspace box") {
    const CalibrationState cal = sweep(0, 1023);
    const Workspace ws;
    const Pose lo = map_to_pose(cal, PotReading{0, 0, 0, 512, 512, 512}, ws);
    const Pose hi = map_to_pose(cal, PotReading{1023, 1023, 1023, 512, 512, 512}, ws);
    CHECK(lo.t.x() == doctest::Approx(ws.t_min[0]));
    CHECK(lo.t.z() == doctest::Approx(ws.t_min[2]));
    CHECK(hi.t.y() == doctest::Approx(ws.t_max[1]));
    // Centred rotary pots give the base orientation (up to pot quantisation).
    const Quaternion base = Quaternion::from_vec4(ws.base_rotation);
    CHECK((lo.r.quat() - base).norm() < 5e-3);
    const Pose twisted = map_to_pose(cal, PotReading{512, 512, 512, 1023, 512, 512}, ws);
    const Quaternion rel = ws.orientation({0, 0, 0}).conj().quat() * twisted.r.quat();
    CHECK(std::abs(2.0 * std::atan2(rel.x, rel.w) - ws.angle_max[0]) < 5e-3);
}

TEST_CASE("rpy composes as z-y-x") {
    const UnitQuaternion r = rotation_from_rpy(0.3, -0.2, 0.7);
    const UnitQuaternion expected = from_axis_angle(PureQuaternion(0, 0, 1), 0.7) *
                                    from_axis_angle(PureQuaternion(0, 1, 0), -0.2) *
                                    from_axis_angle(PureQuaternion(1, 0, 0), 0.3);
    CHECK((r.quat() - expected.quat()).norm() < 1e-15);
    const auto p = rotate(rotation_from_rpy(0, 0, kPi / 2), PureQuaternion(1, 0, 0));
    CHECK(std::abs(p.y() - 1.0) < 1e-15);
}

TEST_CASE("workspace helpers") {
    Workspace ws;
    CHECK_NOTHROW(ws.validate());
    CHECK(ws.clamp({0.0, 1.0, 0.05}) == std::array<double, 3>{ws.t_min[0], ws.t_max[1], 0.05});
    CHECK(ws.center()[1] == doctest::Approx(0.0));
    ws.t_max[0] = ws.t_min[0];
    CHECK_THROWS_AS(ws.validate(), std::invalid_argument);
    Workspace bad_rotation;
    bad_rotation.base_rotation = {1.0, 1.0, 0.0, 0.0};
    CHECK_THROWS_AS(bad_rotation.validate(), std::invalid_argument);
}

TEST_CASE("smoother") {
    PotSmoother off;
    CHECK(off.filter(PotReading{1, 2, 3, 4, 5, 6}) == PotReading{1, 2, 3, 4, 5, 6});
    PotSmoother s(0.5);
    CHECK(s.filter(PotReading{0, 0, 0, 0, 0, 0}) == PotReading{0, 0, 0, 0, 0, 0});
    CHECK(s.filter(PotReading{100, 100, 100, 100, 100, 100})[0] == 50);
    CHECK(s.filter(PotReading{100, 100, 100, 100, 100, 100})[0] == 75);
    CHECK_THROWS_AS(PotSmoother(1.0), std::invalid_argument);
}

TEST_CASE("calibration file round trip") {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int> u(0, 1023);
    CalibrationState cal;
    for (int i = 0; i < 50; ++i) cal = ingest(cal, PotReading{u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)});
    std::stringstream ss;
    write_calibration(ss, cal);
    CHECK(read_calibration(ss) == cal);

    const auto path = std::filesystem::temp_directory_path() / "telearm_test_calibration.txt";
    save_calibration(cal, path);
    CHECK(load_calibration(path) == cal);
    std::filesystem::remove(path);
    CHECK_THROWS(load_calibration(path));

    std::istringstream bad("samples 3\n0 10 900\n1 900 10\n");
    CHECK_THROWS(read_calibration(bad));
    std::istringstream missing("samples 3\n0 10 900\n");
    CHECK_THROWS(read_calibration(missing));
}
