import json
import math

import numpy as np
import pytest

import telearm

HALF_PI = math.pi / 2


def dh_pose(q):
    """Standard DH product in plain numpy."""
    rows = [(0.0, 0.00245, 0.0, -HALF_PI), (-HALF_PI, 0.0, 0.0813, math.pi), (0.0, 0.0, 0.0, HALF_PI),
            (0.0, 0.16519, 0.0, -HALF_PI), (0.0, 0.0, 0.0, HALF_PI)]
    h = np.eye(4)
    for (theta0, d, a, alpha), qi in zip(rows, q):
        th = theta0 + qi
        ct, st, ca, sa = math.cos(th), math.sin(th), math.cos(alpha), math.sin(alpha)
        h = h @ np.array([[ct, -st * ca, st * sa, a * ct], [st, ct * ca, -ct * sa, a * st], [0, sa, ca, d], [0, 0, 0, 1]])
    return h


def quat_to_matrix(r):
    w, x, y, z = r
    return np.array([[1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                     [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                     [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)]])


def test_chain_table_and_limits():
    c = telearm.umirobot_chain()
    assert c.dof == 5
    assert c.q_min == [-HALF_PI] * 5 and c.q_max == [HALF_PI] * 5
    assert c.rows[1] == pytest.approx([-HALF_PI, 0.0, 0.0813, math.pi])
    assert c.clamp([3.0, -3.0, 0.1, 0.0, 0.0]) == [HALF_PI, -HALF_PI, 0.1, 0.0, 0.0]


def test_fkm_matches_numpy_dh():
    rng = np.random.default_rng(1)
    for _ in range(100):
        q = rng.uniform(-HALF_PI, HALF_PI, 5)
        r, t = telearm.fkm(list(q))
        h = dh_pose(q)
        assert np.allclose(t, h[:3, 3], atol=1e-12)
        assert np.allclose(quat_to_matrix(r), h[:3, :3], atol=1e-12)


def test_translation_jacobian_against_finite_differences():
    q = np.array([0.2, -0.4, 0.3, 0.1, -0.5])
    j = np.array(telearm.translation_jacobian(list(q)))
    assert j.shape == (4, 5)
    eps = 1e-6
    for k in range(5):
        dq = np.zeros(5)
        dq[k] = eps
        fd = (np.array(telearm.fkm(list(q + dq))[1]) - np.array(telearm.fkm(list(q - dq))[1])) / (2 * eps)
        assert np.allclose(j[1:, k], fd, atol=1e-8)


def test_rotation_error_vanishes_at_target():
    r = telearm.rotation_from_rpy(0.1, -0.2, 0.3)
    assert np.allclose(telearm.rotation_error(r, r), 0.0, atol=1e-15)
    assert np.allclose(telearm.rotation_error(r, [-v for v in r]), 0.0, atol=1e-15)


def test_controller_reaches_pose():
    q_star = [-0.3, 0.1, 0.2, 0.5, -0.2]
    r, t = telearm.fkm(q_star)
    ctl = telearm.Controller([0.0] * 5)
    for _ in range(500):
        out = ctl.tick_pose(r, t)
    assert out["err_t"] < 1e-6
    assert all(-HALF_PI <= v <= HALF_PI for v in ctl.q_d)


def test_controller_joint_target_is_clamped():
    ctl = telearm.Controller([0.0] * 5)
    assert ctl.tick_joint([2.0, 0.0, 0.0, 0.0, -2.0])["q_d"] == [HALF_PI, 0.0, 0.0, 0.0, -HALF_PI]


def test_controller_config_validation():
    cfg = telearm.ControllerConfig()
    assert (cfg.alpha, cfg.lambda_, cfg.eta, cfg.T) == (0.999, 0.01, 4.0, 0.01)
    cfg.eta = -1.0
    with pytest.raises(ValueError):
        telearm.Controller([0.0] * 5, cfg)


def test_serial_frame_round_trip_and_corruption():
    words = [0, 9000, 18000, 4500, 13500, 100]
    frame = telearm.serial_set_targets(words)
    status, kind, decoded = telearm.serial_decode(frame)
    assert (status, kind, decoded) == ("ok", 0x01, words)
    for bit in range(len(frame) * 8):
        flipped = bytearray(frame)
        flipped[bit // 8] ^= 1 << (bit % 8)
        assert telearm.serial_decode(bytes(flipped))[0] != "ok"
    assert telearm.centideg_to_angle(telearm.angle_to_centideg(0.5)) == pytest.approx(0.5, abs=1e-4)


def test_config_defaults_and_errors():
    cfg = json.loads(telearm.parse_config("{}"))
    assert cfg["device"] == "sim"
    assert cfg["tick_hz"] == 100.0
    with pytest.raises(telearm.ConfigError, match="no_such_key"):
        telearm.parse_config('{"no_such_key": 1}')


def test_ui_hello_and_commands():
    ui = telearm.UiSession()
    hello = json.loads(ui.hello())
    assert hello["type"] == "hello" and hello["role"] == "operator"
    assert len(hello["dh"]) == 5 and hello["limits"]["q_max"] == [HALF_PI] * 5
    assert json.loads(ui.hello(operator_role=False))["role"] == "readonly"

    assert ui.apply('{"type": "target_joints", "q": [3, 0, 0, 0, 0], "gripper": 2}') == ("", False)
    assert ui.target() == {"gripper": 1.0, "q": [HALF_PI, 0.0, 0.0, 0.0, 0.0]}

    assert ui.apply('{"type": "target_pose", "t": [1, 0, 0.05]}') == ("", False)
    assert ui.target()["t"] == pytest.approx([0.18, 0.0, 0.05])

    error, unknown = ui.apply("{not json")
    assert error.startswith("malformed JSON") and not unknown
    assert ui.apply('{"type": "dance"}') == ("", True)

    ui.set_q([0.1, 0.2, 0.3, 0.4, 0.5])
    assert ui.apply('{"type": "mode", "mode": "joint"}') == ("", False)
    assert ui.target()["q"] == pytest.approx([0.1, 0.2, 0.3, 0.4, 0.5])
    assert json.loads(ui.state())["type"] == "state"
