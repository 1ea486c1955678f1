"""Action shield, deadlock escape and potential-based shaping."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MODES = ("baseline", "shield", "shaping")


class Deadlock(Exception):
    """Every nominal action was blocked by the shield."""


@dataclass(frozen=True)
class SafetyConfig:
    mode: str = "baseline"
    shaping_kappa: float = 0.97

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0 < self.shaping_kappa <= 1:
            raise ValueError("shaping_kappa must lie in (0, 1]")


def shield_filter(candidates):
    """Drop candidates whose total value is negative; may return an empty set.

    Works on a planner ``CandidateSet`` or on a plain sequence of
    ``(command, state, breakdown)`` triples.
    """
    if hasattr(candidates, "subset"):
        return candidates.subset(np.asarray(candidates.total) >= 0)
    return [c for c in candidates if c[2].total >= 0]


def shaping_bonus(v_current, v_next, kappa: float = 0.97):
    """Potential difference ``kappa * v_next - v_current``."""
    return kappa * v_next - v_current


def resolve_deadlock(ownship, destination, tubes, config):
    """Pick the best action from the emergency set, ignoring shield and comfort limits.

    The returned plan is flagged ``deadlock=True`` so the step is recorded as
    a comfort-limit exemption.  Rejected when nothing could have caused the
    deadlock (no intruder tubes and the aircraft above the penalty altitude).
    """
    from .actions import emergency_action_set
    from .planner import plan_step

    s = np.asarray(ownship.as_array() if hasattr(ownship, "as_array") else ownship, dtype=float)
    if not tubes and s[2] >= config.planner.penalty_altitude:
        raise ValueError("no intruder tubes and above the penalty altitude: a deadlock cannot occur")
    plan = plan_step(ownship, destination, tubes, emergency_action_set(), config,
                     mode="baseline", respect_limits=False)
    return plan._replace(deadlock=True)
