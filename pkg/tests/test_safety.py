import numpy as np
import pytest

from uamplan.actions import EMERGENCY_ANGLES_DEG, nominal_action_set
from uamplan.config import RunConfig
from uamplan.planner import ValueBreakdown, destination_source, plan_step
from uamplan.reachability import DiscrepancyParams, build_tube
from uamplan.safety import (Deadlock, SafetyConfig, resolve_deadlock,
                            shaping_bonus, shield_filter)
from uamplan.vehicle import AircraftState

ASET = nominal_action_set()


def parked_tube(pos, radius):
    times = np.arange(11.0)
    center = np.zeros((11, 8))
    center[:, :3] = pos
    return build_tube(center, radius, DiscrepancyParams(0.0, (0.0, 10.0), (0.0,)), times)


def test_shield_filter_on_triples():
    good = ("a", None, ValueBreakdown(10, 0, 0))
    zero = ("b", None, ValueBreakdown(5, 5, 0))
    bad = ("c", None, ValueBreakdown(1, 3, 0))
    assert shield_filter([good, zero, bad]) == [good, zero]
    assert shield_filter([bad]) == []


def test_shaping_bonus_formula():
    assert shaping_bonus(10.0, 20.0, 0.97) == pytest.approx(0.97 * 20 - 10)
    assert shaping_bonus(np.array([1.0, 2.0]), np.array([3.0, 4.0]), 0.5).tolist() == [0.5, 0.0]


def test_safety_config_validation():
    with pytest.raises(ValueError):
        SafetyConfig(mode="reckless")
    with pytest.raises(ValueError):
        SafetyConfig(shaping_kappa=0.0)


def test_shield_deadlock_and_emergency_escape():
    cfg = RunConfig().replace(safety={"mode": "shield"})
    s = AircraftState.level(0, 0, 1500, 0.0, 50)
    dest = destination_source([15000, 0, 1500])
    trap = [parked_tube([0, 0, 1500], 400.0)]  # every nominal path stays inside
    with pytest.raises(Deadlock):
        plan_step(s, dest, trap, ASET, cfg)
    # baseline still returns its least-bad action
    assert plan_step(s, dest, trap, ASET, cfg, mode="baseline").breakdown.v_minus > 0
    plan = resolve_deadlock(s, dest, trap, cfg)
    assert plan.deadlock and plan.exempt
    allowed = np.radians(EMERGENCY_ANGLES_DEG)
    assert np.isclose(allowed, plan.command.gamma_c).any()
    assert np.isclose(allowed, plan.command.phi_c).any()


def test_deadlock_without_cause_rejected():
    cfg = RunConfig().replace(safety={"mode": "shield"})
    s = AircraftState.level(0, 0, 1500, 0.0, 50)
    with pytest.raises(ValueError):
        resolve_deadlock(s, destination_source([9000, 0, 1500]), [], cfg)
    low = AircraftState.level(0, 0, 500, 0.0, 50)
    assert resolve_deadlock(low, destination_source([9000, 0, 1500]), [], cfg).deadlock


def test_shield_passes_safe_choice_through():
    cfg = RunConfig()
    s = AircraftState.level(0, 0, 1500, 0.0, 50)
    dest = destination_source([9000, 0, 1500])
    far = [parked_tube([0, 2500, 1500], 20.0)]
    a = plan_step(s, dest, far, ASET, cfg, mode="baseline")
    b = plan_step(s, dest, far, ASET, cfg, mode="shield")
    assert a.index == b.index


def test_shaping_changes_ranking_only_through_potential():
    cfg = RunConfig()
    s = AircraftState.level(0, 0, 1500, 0.0, 50)
    dest = destination_source([9000, 0, 1500])
    a = plan_step(s, dest, [], ASET, cfg, mode="shaping")
    b = plan_step(s, dest, [], ASET, cfg, mode="baseline")
    # the reported breakdown is the value of the chosen action, not the shaped score
    assert a.breakdown.total <= b.breakdown.total
    assert a.score != a.breakdown.total
