"""Data-driven reach tubes from sampled trajectories.

A handful of simulations from a small ball around an intruder's reported
state are turned into sensitivity points ``(t, ln(D(t) / D(0)))`` where
``D`` is the largest pairwise Chebyshev distance between the sampled
positions.  A continuous piecewise-linear upper envelope of those points,
exponentiated and scaled by the initial radius, gives the tube half-width.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

from .actions import ActionSet, nominal_action_set
from .vehicle import (GAMMA, PHI, POSITION_COLUMNS, V, AircraftState,
                      AutopilotParams, simulate_rows)

DIST_EPS = 1e-6  # m, floor for the initial spread in the log ratio


@dataclass(frozen=True)
class ReachConfig:
    n_samples: int = 20
    num_segments: int = 5
    initial_radius: float = 5.0  # m
    horizon: float = 10.0  # s
    proximity: float = 3000.0  # m; intruders farther than this get no tube

    def __post_init__(self):
        if not self.initial_radius > DIST_EPS:
            raise ValueError(f"initial_radius must exceed the {DIST_EPS} m epsilon guard: "
                             "log distance ratios are undefined at zero initial separation")
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        if self.num_segments < 1:
            raise ValueError("num_segments must be >= 1")
        if not (self.horizon > 0 and self.proximity > 0):
            raise ValueError("horizon and proximity must be positive")


class Trajectories(NamedTuple):
    times: np.ndarray  # (m,)
    states: np.ndarray  # (n, m, 8); row 0 is the reference


class SensitivityPoints(NamedTuple):
    nu: np.ndarray  # elapsed time, s
    mu: np.ndarray  # log distance ratio


class Segment(NamedTuple):
    t_start: float
    t_end: float
    a: float  # slope, 1/s
    b: float  # intercept so that mu <= a * nu + b on the segment


@dataclass(frozen=True)
class DiscrepancyParams:
    """Continuous piecewise-exponential discrepancy ``K * exp(sum of slope * dt)``."""

    log_k: float
    breakpoints: tuple  # t_0 = 0 < t_1 < ... < t_n = T
    slopes: tuple  # gamma-hat per segment

    @property
    def K(self) -> float:
        return math.exp(self.log_k)

    @property
    def gamma_hat(self) -> tuple:
        return self.slopes

    @property
    def segments(self) -> list[Segment]:
        out = []
        start_val = self.log_k
        bp = self.breakpoints
        for i, a in enumerate(self.slopes):
            out.append(Segment(bp[i], bp[i + 1], a, start_val - a * bp[i]))
            start_val += a * (bp[i + 1] - bp[i])
        return out

    def log_envelope(self, t) -> np.ndarray:
        """ln K + sum_{j<i} a_j (t_j - t_{j-1}) + a_i (t - t_{i-1}) for t in segment i."""
        t = np.asarray(t, dtype=float)
        bp = np.asarray(self.breakpoints)
        a = np.asarray(self.slopes)
        cum = self.log_k + np.concatenate([[0.0], np.cumsum(a * np.diff(bp))])
        i = np.clip(np.searchsorted(bp, t, side="right") - 1, 0, len(a) - 1)
        return cum[i] + a[i] * (t - bp[i])


@dataclass(frozen=True)
class ReachTube:
    times: np.ndarray  # (m,)
    center: np.ndarray  # (m, 8) reference trajectory
    radii: np.ndarray  # (m, 3) half-widths of the position box, m
    initial_radius: float = 0.0
    params: DiscrepancyParams | None = None

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def positions(self) -> np.ndarray:
        return self.center[:, list(POSITION_COLUMNS)]


class Containment(NamedTuple):
    inside: bool
    distance: float  # Euclidean, to the box centre at the matched sample
    chebyshev: float
    in_horizon: bool
    index: int

    def __bool__(self):
        return bool(self.inside)


def sample_trajectories(center, initial_radius: float, action_set: ActionSet,
                        horizon: float, n: int, rng: np.random.Generator,
                        params: AutopilotParams = AutopilotParams(),
                        dt: float = 1.0) -> Trajectories:
    """Simulate ``n`` trajectories from a ball around ``center``.

    Row 0 starts exactly at ``center`` and flies the mean command of
    ``action_set`` (the reference the tube is centred on).  Other rows start uniformly inside the position
    ball and redraw a joint command uniformly from ``action_set`` every
    ``dt`` seconds.
    """
    if n < 2:
        raise ValueError("need at least two trajectories for pairwise distances")
    if initial_radius < 0:
        raise ValueError("initial_radius must be non-negative")
    steps = int(round(horizon / dt))
    if steps < 1 or abs(steps * dt - horizon) > 1e-9:
        raise ValueError("horizon must be a positive multiple of dt")
    c = center.as_array() if isinstance(center, AircraftState) else np.asarray(center, dtype=float)

    x0 = np.repeat(c[None, :], n, axis=0)
    direction = rng.standard_normal((n - 1, 3))
    norms = np.linalg.norm(direction, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    radius = initial_radius * rng.random((n - 1, 1)) ** (1.0 / 3.0)
    x0[1:, :3] += direction / norms * radius

    g_ch, p_ch, v_ch = action_set.radians()
    idx = rng.integers(0, [len(g_ch), len(p_ch), len(v_ch)], size=(n - 1, steps, 3))
    cmds = np.empty((n, steps, 3))
    cmds[0] = [g_ch.mean(), p_ch.mean(), v_ch.mean()]
    cmds[1:, :, 0] = g_ch[idx[..., 0]]
    cmds[1:, :, 1] = p_ch[idx[..., 1]]
    cmds[1:, :, 2] = v_ch[idx[..., 2]]

    states = simulate_rows(x0, cmds, params.b_gamma, params.b_v, params.b_phi, params.g, float(dt))
    return Trajectories(np.arange(steps + 1) * dt, states)


def sensitivity_points(trajectories, times=None, dims=POSITION_COLUMNS) -> SensitivityPoints:
    """Sensitivity points for every sample time, including ``(0, 0)``.

    ``trajectories`` is a :class:`Trajectories` or an ``(n, m, d)`` array;
    only the columns in ``dims`` enter the Chebyshev distance.
    """
    if isinstance(trajectories, Trajectories):
        times, states = trajectories
    else:
        states = np.asarray(trajectories, dtype=float)
    if states.ndim != 3 or states.shape[0] < 2:
        raise ValueError("need an (n >= 2, m, d) trajectory array")
    if times is None:
        raise ValueError("sample times are required for raw arrays")
    pos = states[:, :, list(dims)]
    # max over pairs of the max-norm == widest per-axis spread
    spread = (pos.max(axis=0) - pos.min(axis=0)).max(axis=1)
    d0 = spread[0]
    if d0 < DIST_EPS:
        warnings.warn(f"initial spread {d0:.3g} m below {DIST_EPS} m; using the floor",
                      RuntimeWarning, stacklevel=2)
    mu = np.log(np.maximum(spread, DIST_EPS) / max(d0, DIST_EPS))
    return SensitivityPoints(np.asarray(times, dtype=float), mu)


@njit(cache=True)
def _learn_slopes(nu, mu, edges):
    n_seg = edges.shape[0] - 1
    slopes = np.zeros(n_seg)
    tol = 1e-9 * max(1.0, edges[-1])
    # leftmost point(s) anchor the first segment
    nu0 = nu.min()
    mu0 = -np.inf
    for k in range(nu.shape[0]):
        if nu[k] <= nu0 + tol and mu[k] > mu0:
            mu0 = mu[k]
    anchor_t, anchor_v = nu0, mu0
    log_k = 0.0
    for i in range(n_seg):
        lo, hi = edges[i], edges[i + 1]
        best = -np.inf
        for k in range(nu.shape[0]):
            if nu[k] >= lo - tol and nu[k] <= hi + tol and nu[k] > anchor_t + tol:
                s = (mu[k] - anchor_v) / (nu[k] - anchor_t)
                if s > best:
                    best = s
        a = best if best > -np.inf else 0.0
        slopes[i] = a
        if i == 0:
            log_k = anchor_v - a * (anchor_t - edges[0])
            anchor_v = log_k + a * (hi - edges[0])
        else:
            anchor_v = anchor_v + a * (hi - anchor_t)
        anchor_t = hi
    return log_k, slopes


def learn_discrepancy(points: SensitivityPoints, num_segments: int = 5) -> DiscrepancyParams:
    """Fit a continuous upper envelope ``mu <= E(nu)`` over equal windows of [0, T].

    In each window the slope is that of the upper convex hull edge leaving
    the window's left anchor (the steepest chord from the anchor), so every
    window point lies on or below the line.  The anchor of window ``i`` is
    the envelope value where window ``i - 1`` ends, which keeps the
    envelope continuous.  A window with no later points gets slope 0.
    """
    if num_segments < 1:
        raise ValueError("num_segments must be >= 1")
    nu = np.asarray(points.nu, dtype=float)
    mu = np.asarray(points.mu, dtype=float)
    if nu.size == 0 or not (np.all(np.isfinite(nu)) and np.all(np.isfinite(mu))):
        raise ValueError("need finite sensitivity points")
    if np.any(nu < 0):
        raise ValueError("sensitivity times must be non-negative")
    T = float(nu.max())
    edges = np.linspace(0.0, T, num_segments + 1) if T > 0 else np.zeros(num_segments + 1)
    if T == 0:
        edges = np.arange(num_segments + 1, dtype=float) * 1e-9
    log_k, slopes = _learn_slopes(nu, mu, edges)
    params = DiscrepancyParams(float(log_k), tuple(float(e) for e in edges),
                               tuple(float(s) for s in slopes))
    # absorb rounding so the envelope never dips under a training point
    lift = float(np.max(mu - params.log_envelope(nu)))
    if lift > 0:
        params = DiscrepancyParams(params.log_k + lift, params.breakpoints, params.slopes)
    return params


def build_tube(center_traj, initial_radius: float, params: DiscrepancyParams,
               times=None) -> ReachTube:
    """Boxes of half-width ``initial_radius * K * exp(...)`` around the reference path."""
    if isinstance(center_traj, Trajectories):
        times, center = center_traj.times, center_traj.states[0]
    else:
        center = np.asarray(center_traj, dtype=float)
    if times is None:
        raise ValueError("sample times are required for raw arrays")
    times = np.asarray(times, dtype=float)
    if center.ndim != 2 or center.shape[0] != times.shape[0]:
        raise ValueError("center trajectory and times disagree")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    if times[-1] > params.breakpoints[-1] + 1e-9 or times[0] < params.breakpoints[0] - 1e-9:
        raise ValueError("discrepancy segments do not cover the trajectory span")
    if initial_radius < 0:
        raise ValueError("initial_radius must be non-negative")
    r = initial_radius * np.exp(params.log_envelope(times))
    return ReachTube(times, center, np.repeat(r[:, None], 3, axis=1),
                     float(initial_radius), params)


def tube_contains(tube: ReachTube, point, t: float) -> Containment:
    """Closed-box membership at the stored sample nearest to ``t``."""
    p = np.asarray(point, dtype=float)[:3]
    in_horizon = tube.times[0] - 1e-9 <= t <= tube.times[-1] + 1e-9
    i = int(np.argmin(np.abs(tube.times - t)))
    diff = np.abs(p - tube.positions[i])
    cheb = float(diff.max())
    inside = in_horizon and bool(np.all(diff <= tube.radii[i]))
    return Containment(inside, float(np.linalg.norm(diff)), cheb, in_horizon, i)


def compute_reach_tube(center, rng: np.random.Generator, config: ReachConfig = ReachConfig(),
                       action_set: ActionSet | None = None,
                       params: AutopilotParams = AutopilotParams(), dt: float = 1.0,
                       ) -> tuple[ReachTube, Trajectories]:
    """Sample, learn and build one intruder tube; returns the tube and its training set."""
    action_set = nominal_action_set() if action_set is None else action_set
    trajs = sample_trajectories(center, config.initial_radius, action_set,
                                config.horizon, config.n_samples, rng, params, dt)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        pts = sensitivity_points(trajs)
    dp = learn_discrepancy(pts, config.num_segments)
    # scale by the initial-set diameter: two samples can start 2*r0 apart
    return build_tube(trajs, 2.0 * config.initial_radius, dp), trajs


def containment_fraction(tube: ReachTube, trajectories) -> float:
    """Share of trajectories whose positions stay inside the tube at every sample."""
    states = trajectories.states if isinstance(trajectories, Trajectories) else np.asarray(trajectories)
    pos = states[:, :, list(POSITION_COLUMNS)]
    ok = np.all(np.abs(pos - tube.positions[None]) <= tube.radii[None], axis=(1, 2))
    return float(ok.mean())
