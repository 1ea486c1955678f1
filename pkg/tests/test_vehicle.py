import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uamplan.actions import enumerate_joint, nominal_action_set
from uamplan.vehicle import (KNOT, AircraftState, AutopilotParams, Command,
                             PerformanceLimits, check_limits, derivatives,
                             held_rollout, limit_excess, simulate_rows, step,
                             step_batch, wrap_angle)

P = AutopilotParams()


def test_level_flight_derivative():
    d = derivatives(AircraftState.level(0, 0, 1500, 0.0, 50.0), Command(0, 0, 50))
    assert np.allclose(d, [50, 0, 0, 0, 0, 0, 0, 0], atol=1e-12)


def test_due_east():
    d = derivatives(AircraftState.level(0, 0, 1500, math.pi / 2, 50.0), Command(0, 0, 50))
    assert np.allclose(d[:3], [0, 50, 0], atol=1e-12)


def test_derivative_term_by_term():
    # scalar oracle, written out independently of the vectorised code
    psi = chi = 0.3
    gamma, phi, v, g = 0.1, 0.2, 60.0, 9.81
    gc, pc, vc = 0.15, 0.25, 55.0
    b = 0.5
    expected = [
        v * math.cos(psi) * math.cos(gamma),
        v * math.sin(psi) * math.cos(gamma),
        v * math.sin(gamma),
        g / v * math.tan(phi),
        b * (gc - gamma),
        g / v * math.tan(phi),
        b * (pc - phi),
        b * (vc - v),
    ]
    s = AircraftState(0, 0, 0, psi, gamma, chi, phi, v)
    d = derivatives(s, Command(gc, pc, vc), AutopilotParams(b, b, b, g))
    assert np.allclose(d, expected, rtol=0, atol=1e-13)


def test_derivative_rejects_bad_input():
    s = AircraftState.level(0, 0, 0, 0, 50).as_array()
    with pytest.raises(ValueError):
        derivatives(s, [np.nan, 0, 50])
    s[7] = 0.5
    with pytest.raises(ValueError):
        derivatives(s, [0, 0, 50])


def test_state_validation():
    with pytest.raises(ValueError):
        AircraftState(0, 0, 0, 0, 0, 0, 0, -1.0)
    with pytest.raises(ValueError):
        AircraftState(np.inf, 0, 0, 0, 0, 0, 0, 50)
    s = AircraftState.from_array([0, 0, 0, 3 * math.pi, 0, -3 * math.pi, 0, 50])
    assert s.psi == pytest.approx(math.pi) and s.chi == pytest.approx(math.pi)


def test_wrap_angle_range():
    a = np.linspace(-20, 20, 4001)
    w = wrap_angle(a)
    assert np.all(w > -math.pi) and np.all(w <= math.pi)
    assert np.allclose(np.cos(w), np.cos(a)) and np.allclose(np.sin(w), np.sin(a))
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)


def test_straight_level_step():
    s = step(AircraftState.level(10, 20, 1500, 0, 50), Command(0, 0, 50), P, 1.0)
    assert s.x == pytest.approx(60, abs=1e-9) and s.y == pytest.approx(20, abs=1e-9)
    assert s.z == pytest.approx(1500, abs=1e-9)


def test_rk4_order():
    s0 = AircraftState(0, 0, 1000, 0.2, 0.05, 0.2, 0.1, 45).as_array()
    cmd = Command(0.2, 0.3, 65)
    errs = []
    for dt in (0.4, 0.2):
        fine = s0
        for _ in range(64):
            fine = step(fine, cmd, P, dt / 64)
        errs.append(np.abs(step(s0, cmd, P, dt) - fine).max())
    # local error of a fourth-order scheme scales as dt**5
    assert errs[0] / errs[1] > 20


def test_two_half_steps_match_one():
    s0 = AircraftState(0, 0, 1000, 0.2, 0.05, 0.2, 0.1, 45).as_array()
    cmd = Command(0.2, 0.3, 65)
    one = step(s0, cmd, P, 0.1)
    two = step(step(s0, cmd, P, 0.05), cmd, P, 0.05)
    assert np.abs(one - two).max() < 1e-6


def test_speed_converges_exponentially():
    p = AutopilotParams(b_v=0.5)
    s = AircraftState.level(0, 0, 1000, 0, 50)
    z = 0.5 * 0.1
    rk4_factor = 1 - z + z ** 2 / 2 - z ** 3 / 6 + z ** 4 / 24  # RK4 on a linear ODE
    for k in range(1, 51):
        s = step(s, Command(0, 0, 70), p, 0.1)
        assert s.v == pytest.approx(70 - 20 * rk4_factor ** k, abs=1e-11)
        assert s.v == pytest.approx(70 - 20 * math.exp(-z * k), abs=1e-6)


def test_step_returns_same_type_and_is_deterministic():
    arr = AircraftState.level(0, 0, 1000, 1.0, 40).as_array()
    a = step(arr, (0.1, 0.2, 55))
    b = step(arr, (0.1, 0.2, 55))
    assert isinstance(a, np.ndarray) and np.array_equal(a, b)
    assert isinstance(step(AircraftState.from_array(arr), (0, 0, 40)), AircraftState)
    with pytest.raises(ValueError):
        step(arr, (0, 0, 40), P, 0.0)


def test_step_batch_matches_single():
    cmds = enumerate_joint(nominal_action_set())[::37]
    s = AircraftState(5, 6, 1200, 0.4, -0.05, 0.4, 0.1, 48).as_array()
    batch = step_batch(np.repeat(s[None], len(cmds), 0), cmds, P, 1.0)
    for c, b in zip(cmds, batch):
        assert np.array_equal(step(s, c, P, 1.0), b)


@settings(max_examples=60, deadline=None)
@given(psi=st.floats(-math.pi, math.pi), gamma=st.floats(-0.5, 0.5), phi=st.floats(-0.5, 0.5),
       v=st.floats(5, 90))
def test_ground_speed_equals_airspeed(psi, gamma, phi, v):
    d = derivatives(AircraftState(0, 0, 0, psi, gamma, psi, phi, v), (0, 0, v))
    assert math.sqrt(d[0] ** 2 + d[1] ** 2 + d[2] ** 2) == pytest.approx(v, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(gamma=st.floats(-0.3, 0.3), v=st.floats(20, 80), psi=st.floats(-3, 3))
def test_matched_commands_are_fixed_points(gamma, v, psi):
    s = AircraftState(0, 0, 0, psi, gamma, psi, 0.0, v)
    out = step(s, Command(gamma, 0.0, v))
    assert out.gamma == pytest.approx(gamma, abs=1e-12)
    assert out.v == pytest.approx(v, abs=1e-10)
    assert out.phi == pytest.approx(0.0, abs=1e-12)


def test_course_minus_heading_stays_zero():
    s = AircraftState.level(0, 0, 1000, 0.7, 50).as_array()
    for _ in range(200):
        s = step(s, (0.05, 0.3, 60))
        assert abs(wrap_angle(s[5] - s[3])) < 1e-12


def test_simulate_rows_matches_step_loop():
    cmds = np.random.default_rng(0).uniform([-0.3, -0.3, 25], [0.3, 0.3, 70], size=(3, 12, 3))
    x0 = np.tile(AircraftState.level(0, 0, 1500, 0.1, 50).as_array(), (3, 1))
    out = simulate_rows(x0, cmds, P.b_gamma, P.b_v, P.b_phi, P.g, 1.0)
    for i in range(3):
        s = x0[i]
        for k in range(12):
            s = step(s, cmds[i, k])
            assert np.array_equal(s, out[i, k + 1])


def test_held_rollout_matches_full_integration():
    aset = nominal_action_set()
    g, p, v = aset.radians()
    s = np.array([100.0, -50, 1500, 0.3, 0.05, 0.3, 0.1, 50])
    r = held_rollout(s, g, p, v, 6, P.b_gamma, P.b_v, P.b_phi, P.g, 1.0).reshape(-1, 6, 5)
    cmds = enumerate_joint(aset)
    ref = simulate_rows(np.tile(s, (len(cmds), 1)), np.repeat(cmds[:, None], 6, axis=1),
                        P.b_gamma, P.b_v, P.b_phi, P.g, 1.0)
    assert np.abs(r[..., :3] - ref[:, 1:, :3]).max() < 1e-9
    assert np.abs(wrap_angle(r[..., 3] - ref[:, 1:, 3])).max() < 1e-9
    assert np.abs(r[..., 4] - ref[:, 1:, 7]).max() < 1e-9


def test_limits_defaults_match_table():
    lim = PerformanceLimits()
    assert (lim.v_min, lim.v_max, lim.chi_rate_min, lim.chi_rate_max, lim.phi_min, lim.phi_max,
            lim.gamma_min, lim.gamma_max) == (47, 133, -30, 30, -5, 20, -20, 20)
    with pytest.raises(ValueError):
        PerformanceLimits(v_min=200)


def test_check_limits_examples():
    assert check_limits([AircraftState.level(0, 0, 1500, 0, 50)]) == []
    assert 50 / KNOT == pytest.approx(97.19, abs=0.01)
    bank = AircraftState(0, 0, 1500, 0, 0, 0, math.radians(25), 50)
    v = check_limits([bank])
    assert len(v) == 1 and v[0].field == "phi" and v[0].value == pytest.approx(25)
    fast = AircraftState.level(0, 0, 1500, 0, 140 * KNOT)
    v = check_limits([fast])
    assert len(v) == 1 and v[0].field == "v" and v[0].value == pytest.approx(140)


def test_check_limits_course_rate():
    a = AircraftState.level(0, 0, 1500, 0.0, 50)
    b = AircraftState.level(0, 0, 1500, math.radians(35), 50)
    v = check_limits([a, b])
    assert [x.field for x in v] == ["chi_rate"] and v[0].index == 1
    assert v[0].value == pytest.approx(35)


def test_limit_excess_agrees_with_check_limits():
    rng = np.random.default_rng(3)
    lim = PerformanceLimits()
    prev = AircraftState.level(0, 0, 1500, 0, 50).as_array()
    for _ in range(200):
        s = prev.copy()
        s[[4, 6]] = rng.uniform(-0.5, 0.5, 2)
        s[5] = s[3] = rng.uniform(-0.8, 0.8)
        s[7] = rng.uniform(20, 75)
        ok = limit_excess(s[None], prev[None], lim, 1.0)[0] == 0
        assert ok == (check_limits([prev, s], lim) == [])
