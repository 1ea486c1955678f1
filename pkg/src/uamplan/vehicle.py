"""Kinematic guidance model of a fixed-wing air taxi.

State vectors are stored as float arrays laid out as
``(x, y, z, psi, gamma, chi, phi, v)``; ``x`` points north, ``y`` east and
``z`` is altitude (up).  Commands are ``(gamma_c, phi_c, v_c)`` in radians
and m/s.  The dataclasses below are thin, validated views over that layout;
the batch functions work on raw arrays.
"""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

X, Y, Z, PSI, GAMMA, CHI, PHI, V = range(8)
STATE_FIELDS = ("x", "y", "z", "psi", "gamma", "chi", "phi", "v")
ANGLE_COLUMNS = (PSI, GAMMA, CHI, PHI)
POSITION_COLUMNS = (X, Y, Z)

V_FLOOR = 1.0  # m/s, guards the g/V term
KNOT = 1852.0 / 3600.0  # m/s per knot


def wrap_angle(a):
    """Wrap angles to (-pi, pi]."""
    return a - 2.0 * np.pi * np.ceil((a - np.pi) / (2.0 * np.pi))


@dataclass(frozen=True)
class AircraftState:
    x: float
    y: float
    z: float
    psi: float
    gamma: float
    chi: float
    phi: float
    v: float

    def __post_init__(self):
        vals = astuple(self)
        if not all(math.isfinite(f) for f in vals):
            raise ValueError(f"non-finite aircraft state: {vals}")
        if self.v <= 0:
            raise ValueError(f"airspeed must be positive, got {self.v}")

    @classmethod
    def from_array(cls, arr) -> "AircraftState":
        arr = np.asarray(arr, dtype=float)
        wrapped = arr.copy()
        wrapped[list(ANGLE_COLUMNS)] = wrap_angle(arr[list(ANGLE_COLUMNS)])
        return cls(*(float(f) for f in wrapped))

    @classmethod
    def level(cls, x, y, z, heading, v) -> "AircraftState":
        """Wings-level, unaccelerated flight on ``heading`` with chi == psi."""
        h = float(wrap_angle(heading))
        return cls(x, y, z, h, 0.0, h, 0.0, v)

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


class Command(NamedTuple):
    gamma_c: float
    phi_c: float
    v_c: float


@dataclass(frozen=True)
class AutopilotParams:
    """First-order autopilot tracking gains (1/s) and gravity."""

    b_gamma: float = 0.5
    b_v: float = 0.3
    b_phi: float = 1.0
    g: float = 9.81

    def __post_init__(self):
        for name in ("b_gamma", "b_v", "b_phi", "g"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class PerformanceLimits:
    """Air-taxi envelope. Speeds in knots, course rate in deg/s, angles in deg."""

    v_min: float = 47.0
    v_max: float = 133.0
    chi_rate_min: float = -30.0
    chi_rate_max: float = 30.0
    phi_min: float = -5.0
    phi_max: float = 20.0
    gamma_min: float = -20.0
    gamma_max: float = 20.0

    def __post_init__(self):
        for lo, hi in (("v_min", "v_max"), ("chi_rate_min", "chi_rate_max"),
                       ("phi_min", "phi_max"), ("gamma_min", "gamma_max")):
            if not getattr(self, lo) < getattr(self, hi):
                raise ValueError(f"{lo} must be below {hi}")


class Violation(NamedTuple):
    index: int
    field: str
    value: float


def _as_state_array(state) -> np.ndarray:
    if isinstance(state, AircraftState):
        return state.as_array()
    return np.asarray(state, dtype=float)


def derivatives(state, cmd, params: AutopilotParams = AutopilotParams()) -> np.ndarray:
    """Time derivative of the state under a commanded (gamma, phi, V) triple.

    Accepts a single state or an ``(..., 8)`` array with matching commands.
    Heading rate equals course rate (no wind).  Returns the derivative in
    state layout.
    """
    s = _as_state_array(state)
    c = np.asarray(cmd, dtype=float)
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(c))):
        raise ValueError("non-finite state or command")
    if np.any(s[..., V] <= V_FLOOR):
        raise ValueError(f"airspeed at or below the {V_FLOOR} m/s floor")

    psi, gamma, chi, phi, v = s[..., PSI], s[..., GAMMA], s[..., CHI], s[..., PHI], s[..., V]
    chi_dot = params.g / v * np.tan(phi) * np.cos(chi - psi)
    out = np.empty(np.broadcast_shapes(s.shape, c.shape[:-1] + (8,)))
    out[..., X] = v * np.cos(psi) * np.cos(gamma)
    out[..., Y] = v * np.sin(psi) * np.cos(gamma)
    out[..., Z] = v * np.sin(gamma)
    out[..., PSI] = chi_dot
    out[..., GAMMA] = params.b_gamma * (c[..., 0] - gamma)
    out[..., CHI] = chi_dot
    out[..., PHI] = params.b_phi * (c[..., 1] - phi)
    out[..., V] = params.b_v * (c[..., 2] - v)
    return out


@njit(cache=True)
def _deriv_into(s, gc, pc, vc, bg, bv, bp, g, out):
    v = s[7]
    chi_dot = g / v * math.tan(s[6]) * math.cos(s[5] - s[3])
    cg = math.cos(s[4])
    out[0] = v * math.cos(s[3]) * cg
    out[1] = v * math.sin(s[3]) * cg
    out[2] = v * math.sin(s[4])
    out[3] = chi_dot
    out[4] = bg * (gc - s[4])
    out[5] = chi_dot
    out[6] = bp * (pc - s[6])
    out[7] = bv * (vc - v)


@njit(cache=True)
def _wrap(a):
    return a - 2.0 * math.pi * math.ceil((a - math.pi) / (2.0 * math.pi))


@njit(cache=True)
def _rk4_into(s, gc, pc, vc, bg, bv, bp, g, dt, out, k1, k2, k3, k4, tmp):
    _deriv_into(s, gc, pc, vc, bg, bv, bp, g, k1)
    for d in range(8):
        tmp[d] = s[d] + 0.5 * dt * k1[d]
    _deriv_into(tmp, gc, pc, vc, bg, bv, bp, g, k2)
    for d in range(8):
        tmp[d] = s[d] + 0.5 * dt * k2[d]
    _deriv_into(tmp, gc, pc, vc, bg, bv, bp, g, k3)
    for d in range(8):
        tmp[d] = s[d] + dt * k3[d]
    _deriv_into(tmp, gc, pc, vc, bg, bv, bp, g, k4)
    for d in range(8):
        out[d] = s[d] + dt / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d])
    out[3] = _wrap(out[3])
    out[4] = _wrap(out[4])
    out[5] = _wrap(out[5])
    out[6] = _wrap(out[6])


@njit(cache=True)
def rk4_rows(states, cmds, bg, bv, bp, g, dt):
    """One RK4 step for every row of ``states`` under the matching command row."""
    m = states.shape[0]
    out = np.empty_like(states)
    k1 = np.empty(8)
    k2 = np.empty(8)
    k3 = np.empty(8)
    k4 = np.empty(8)
    tmp = np.empty(8)
    for i in range(m):
        _rk4_into(states[i], cmds[i, 0], cmds[i, 1], cmds[i, 2], bg, bv, bp, g, dt,
                  out[i], k1, k2, k3, k4, tmp)
    return out


@njit(cache=True)
def simulate_rows(x0, cmds, bg, bv, bp, g, dt):
    """Integrate ``x0`` (m, 8) through piecewise-constant commands (m, steps, 3).

    Returns an (m, steps + 1, 8) trajectory array.
    """
    m, steps = cmds.shape[0], cmds.shape[1]
    out = np.empty((m, steps + 1, 8))
    k1 = np.empty(8)
    k2 = np.empty(8)
    k3 = np.empty(8)
    k4 = np.empty(8)
    tmp = np.empty(8)
    for i in range(m):
        out[i, 0] = x0[i]
        for k in range(steps):
            _rk4_into(out[i, k], cmds[i, k, 0], cmds[i, k, 1], cmds[i, k, 2],
                      bg, bv, bp, g, dt, out[i, k + 1], k1, k2, k3, k4, tmp)
    return out


@njit(cache=True)
def held_rollout(s, gcs, pcs, vcs, steps, bg, bv, bp, g, dt):
    """Positions, heading and speed under every held command of a factor grid.

    Flight-path angle depends only on its own command and roll, speed and
    turn only on (roll, speed) commands, so stages are integrated on the
    factor grids and only positions use the full (A, B, C) product.
    RK4 throughout.  Returns an (A, B, C, steps, 5) array of ``(x, y, z,
    psi, V)`` after 1..steps steps.
    """
    na, nb, nc = gcs.shape[0], pcs.shape[0], vcs.shape[0]
    out = np.empty((na, nb, nc, steps, 5))
    cos_rel = math.cos(s[5] - s[3])  # course and heading turn together
    gam = np.full(na, s[4])
    phi = np.full((nb, nc), s[6])
    spd = np.full((nb, nc), s[7])
    psi = np.full((nb, nc), s[3])
    pos = np.empty((na, nb, nc, 3))
    for a in range(na):
        for b in range(nb):
            for c in range(nc):
                pos[a, b, c, 0] = s[0]
                pos[a, b, c, 1] = s[1]
                pos[a, b, c, 2] = s[2]
    cg = np.empty((na, 4))
    sg = np.empty((na, 4))
    vs = np.empty((nb, nc, 4))
    cp = np.empty((nb, nc, 4))
    sp = np.empty((nb, nc, 4))
    half = (0.0, 0.5, 0.5, 1.0)
    for k in range(steps):
        for a in range(na):
            g0 = gam[a]
            gi = g0
            acc = kg = 0.0
            for st in range(4):
                if st > 0:
                    gi = g0 + half[st] * dt * kg
                cg[a, st] = math.cos(gi)
                sg[a, st] = math.sin(gi)
                kg = bg * (gcs[a] - gi)
                acc += kg if st in (0, 3) else 2.0 * kg
            gam[a] = g0 + dt / 6.0 * acc
        for b in range(nb):
            for c in range(nc):
                p0, v0, h0 = phi[b, c], spd[b, c], psi[b, c]
                pi_, vi, hi = p0, v0, h0
                ap = av = ah = kp = kv = kh = 0.0
                for st in range(4):
                    if st > 0:
                        pi_ = p0 + half[st] * dt * kp
                        vi = v0 + half[st] * dt * kv
                        hi = h0 + half[st] * dt * kh
                    vs[b, c, st] = vi
                    cp[b, c, st] = math.cos(hi)
                    sp[b, c, st] = math.sin(hi)
                    kp = bp * (pcs[b] - pi_)
                    kv = bv * (vcs[c] - vi)
                    kh = g / vi * math.tan(pi_) * cos_rel
                    w = 1.0 if st in (0, 3) else 2.0
                    ap += w * kp
                    av += w * kv
                    ah += w * kh
                phi[b, c] = p0 + dt / 6.0 * ap
                spd[b, c] = v0 + dt / 6.0 * av
                psi[b, c] = h0 + dt / 6.0 * ah
        for a in range(na):
            for b in range(nb):
                for c in range(nc):
                    dx = dy = dz = 0.0
                    for st in range(4):
                        w = 1.0 if st in (0, 3) else 2.0
                        hz = vs[b, c, st] * cg[a, st]
                        dx += w * hz * cp[b, c, st]
                        dy += w * hz * sp[b, c, st]
                        dz += w * vs[b, c, st] * sg[a, st]
                    pos[a, b, c, 0] += dt / 6.0 * dx
                    pos[a, b, c, 1] += dt / 6.0 * dy
                    pos[a, b, c, 2] += dt / 6.0 * dz
                    out[a, b, c, k, 0] = pos[a, b, c, 0]
                    out[a, b, c, k, 1] = pos[a, b, c, 1]
                    out[a, b, c, k, 2] = pos[a, b, c, 2]
                    out[a, b, c, k, 3] = psi[b, c]
                    out[a, b, c, k, 4] = spd[b, c]
    return out


def step_batch(states: np.ndarray, cmds: np.ndarray, params: AutopilotParams, dt: float) -> np.ndarray:
    """Unchecked RK4 step over row batches; non-finite rows are left for the caller."""
    states = np.ascontiguousarray(states, dtype=float).reshape(-1, 8)
    cmds = np.ascontiguousarray(np.broadcast_to(cmds, (states.shape[0], 3)), dtype=float)
    return rk4_rows(states, cmds, params.b_gamma, params.b_v, params.b_phi, params.g, float(dt))


def step(state, cmd, params: AutopilotParams = AutopilotParams(), dt: float = 1.0):
    """Advance one aircraft by ``dt`` seconds with fourth-order Runge-Kutta.

    Returns the same kind of object it was given (``AircraftState`` or array).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    s = _as_state_array(state)
    derivatives(s, cmd, params)  # input validation
    out = step_batch(s, np.asarray(cmd, dtype=float), params, dt)[0]
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(f"integration produced a non-finite state: {out}")
    if out[V] <= 0:
        raise FloatingPointError(f"integration produced non-positive airspeed: {out[V]}")
    if isinstance(state, AircraftState):
        return AircraftState(*(float(f) for f in out))
    return out


def limit_excess(states: np.ndarray, prev: np.ndarray, limits: PerformanceLimits, dt: float) -> np.ndarray:
    """Total amount by which each row breaks the envelope (0 where compliant).

    Units are mixed (knots, degrees, deg/s); only the sign and ordering are
    meaningful.  ``prev`` supplies the finite-difference course rate.
    """
    v_kts = states[..., V] / KNOT
    phi = np.degrees(states[..., PHI])
    gamma = np.degrees(states[..., GAMMA])
    chi_rate = np.degrees(wrap_angle(states[..., CHI] - prev[..., CHI])) / dt
    excess = np.zeros(states.shape[:-1])
    for val, lo, hi in ((v_kts, limits.v_min, limits.v_max),
                        (chi_rate, limits.chi_rate_min, limits.chi_rate_max),
                        (phi, limits.phi_min, limits.phi_max),
                        (gamma, limits.gamma_min, limits.gamma_max)):
        excess += np.maximum(lo - val, 0.0) + np.maximum(val - hi, 0.0)
    return excess


def check_limits(trajectory, limits: PerformanceLimits = PerformanceLimits(), dt: float = 1.0) -> list[Violation]:
    """List every sample outside the envelope.

    The course rate is a backward difference, so it is only checked from the
    second sample on.  Values in the returned violations use the limit's
    units (knots, deg, deg/s).
    """
    traj = np.array([_as_state_array(s) for s in trajectory], dtype=float).reshape(-1, 8)
    if traj.shape[0] == 0:
        raise ValueError("empty trajectory")
    if not dt > 0:
        raise ValueError("dt must be positive")
    out = []
    for i, s in enumerate(traj):
        checks = [("v", s[V] / KNOT, limits.v_min, limits.v_max),
                  ("phi", math.degrees(s[PHI]), limits.phi_min, limits.phi_max),
                  ("gamma", math.degrees(s[GAMMA]), limits.gamma_min, limits.gamma_max)]
        if i > 0:
            rate = math.degrees(float(wrap_angle(s[CHI] - traj[i - 1, CHI]))) / dt
            checks.append(("chi_rate", rate, limits.chi_rate_min, limits.chi_rate_max))
        for name, val, lo, hi in checks:
            if val < lo or val > hi:
                out.append(Violation(i, name, val))
    return out
