import numpy as np

from uamplan.actions import (EMERGENCY_ANGLES_DEG, emergency_action_set,
                             enumerate_joint, log_spaced_angles,
                             nominal_action_set)


def test_nominal_set():
    a = nominal_action_set()
    assert len(a) == 2250 and a.shape == (15, 15, 10)
    assert a.gamma_choices[0] == -19.99 and a.gamma_choices[14] == 19.99
    assert a.gamma_choices[7] == 0.0 and a.phi_choices[7] == 0.0
    assert a.gamma_choices == a.phi_choices
    # ten points from 25 to 70 m/s, 5 m/s apart, checked by plain arithmetic
    assert a.v_choices == tuple(25.0 + 5.0 * k for k in range(10))


def test_emergency_set():
    e = emergency_action_set()
    assert list(e.gamma_choices) == [-180, -139.5, -99, -58.5, -18, 18, 58.5, 99, 139.5, 180]
    assert e.phi_choices == e.gamma_choices
    assert 0.0 not in e.gamma_choices
    assert e.v_choices == nominal_action_set().v_choices
    assert len(e) == 1000 and len(enumerate_joint(e)) == 1000


def test_sorted_and_antisymmetric():
    for a in (nominal_action_set(), emergency_action_set()):
        g = np.array(a.gamma_choices)
        assert np.all(np.diff(g) > 0)
        assert np.array_equal(g, -g[::-1])


def test_enumeration_order():
    j = enumerate_joint(nominal_action_set())
    assert j.shape == (2250, 3)
    assert np.allclose(j[0], [np.radians(-19.99), np.radians(-19.99), 25.0])
    assert np.allclose(j[1], [np.radians(-19.99), np.radians(-19.99), 30.0])
    assert np.allclose(j[10], [np.radians(-19.99), np.radians(-16.24), 25.0])
    assert np.allclose(j[150], [np.radians(-16.24), np.radians(-19.99), 25.0])


def test_log_rule_reproduces_printed_values():
    printed = np.array(nominal_action_set().gamma_choices)
    for ratio in (1.05055, 1.0506, 1.05071):
        assert np.array_equal(np.round(log_spaced_angles(ratio=ratio), 2), printed)
    assert not np.array_equal(np.round(log_spaced_angles(ratio=1.04), 2), printed)


def test_emergency_spacing_is_uniform_outside_zero():
    e = np.array(EMERGENCY_ANGLES_DEG)
    assert np.allclose(np.diff(e[:5]), 40.5) and np.allclose(np.diff(e[5:]), 40.5)
