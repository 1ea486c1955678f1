"""Discrete command sets for the planner."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Printed values are authoritative; log_spaced_angles() only cross-checks them.
NOMINAL_ANGLES_DEG = (-19.99, -16.24, -12.66, -9.26, -6.02, -2.94, -0.01, 0.0,
                      0.01, 2.94, 6.02, 9.26, 12.66, 16.24, 19.99)
EMERGENCY_ANGLES_DEG = (-180.0, -139.5, -99.0, -58.5, -18.0,
                        18.0, 58.5, 99.0, 139.5, 180.0)
SPEED_RANGE = (25.0, 70.0)
N_SPEEDS = 10


@dataclass(frozen=True)
class ActionSet:
    gamma_choices: tuple  # degrees
    phi_choices: tuple  # degrees
    v_choices: tuple  # m/s
    kind: str = "nominal"

    def __len__(self):
        return len(self.gamma_choices) * len(self.phi_choices) * len(self.v_choices)

    @property
    def shape(self):
        return len(self.gamma_choices), len(self.phi_choices), len(self.v_choices)

    def radians(self):
        """(gamma, phi, v) choice arrays with angles converted to radians."""
        return (np.radians(np.asarray(self.gamma_choices, dtype=float)),
                np.radians(np.asarray(self.phi_choices, dtype=float)),
                np.asarray(self.v_choices, dtype=float))


def nominal_speeds():
    return tuple(float(v) for v in np.linspace(*SPEED_RANGE, N_SPEEDS))


def nominal_action_set() -> ActionSet:
    return ActionSet(NOMINAL_ANGLES_DEG, NOMINAL_ANGLES_DEG, nominal_speeds(), "nominal")


def emergency_action_set() -> ActionSet:
    """Wide-angle set used to break a shield deadlock; speeds as nominal."""
    return ActionSet(EMERGENCY_ANGLES_DEG, EMERGENCY_ANGLES_DEG, nominal_speeds(), "emergency")


def enumerate_joint(action_set: ActionSet) -> np.ndarray:
    """All joint commands as an (N, 3) array of (gamma_c rad, phi_c rad, v_c).

    Row-major order: gamma outermost, then phi, then speed.  Planner ties
    resolve to the lowest row.
    """
    g, p, v = action_set.radians()
    gg, pp, vv = np.meshgrid(g, p, v, indexing="ij")
    return np.stack([gg.ravel(), pp.ravel(), vv.ravel()], axis=1)


def log_spaced_angles(limit=19.99, n=15, ratio=1.0506, core=0.01):
    """Rebuild a symmetric, zero-centred set whose spacing grows geometrically.

    The positive half is ``core + a * (ratio**k - 1)`` for ``k = 0..n//2 - 1``
    with ``a`` chosen so the last value equals ``limit``.  ``ratio`` is fitted
    to the printed nominal set; any value in about [1.05055, 1.05071]
    reproduces it to two decimals.
    """
    half = (n - 1) // 2
    k = np.arange(half)
    a = (limit - core) / (ratio ** (half - 1) - 1.0)
    pos = core + a * (ratio ** k - 1.0)
    return np.concatenate([-pos[::-1], [0.0], pos])
