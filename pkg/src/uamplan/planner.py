"""MDP decision maker.

Every joint action is simulated with the command held for a few control
steps; the positions along that path are scored by an exponentially
decaying attraction to the destination minus the strongest intruder penalty
whose tube contains them at the matching time, minus a terrain penalty.
The best-scoring action is applied for one step and the search repeats.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, NamedTuple

import math

import numpy as np
from numba import njit

from .actions import ActionSet
from .safety import Deadlock, shaping_bonus, shield_filter
from .vehicle import (CHI, GAMMA, PHI, PSI, V, X, Y, Z, AircraftState,
                      AutopilotParams, Command, PerformanceLimits, held_rollout,
                      limit_excess, step_batch, wrap_angle)

if TYPE_CHECKING:
    from .config import RunConfig

@dataclass(frozen=True)
class PlannerConfig:
    destination_reward: float = 200.0
    destination_decay: float = 0.999  # per metre
    intruder_base: float = 500.0
    intruder_slope: float = 100.0  # per second of tube lookahead
    intruder_decay: float = 0.97  # per metre
    penalty_altitude: float = 1000.0  # m
    # held-command look-ahead in control steps; 1 scores the next state only
    rollout_steps: int = 10
    # added to every tube box half-width (x, y, z) before the membership test
    protection: tuple = (152.0, 152.0, 30.0)  # m
    enforce_limits: bool = True
    # destination distance measured along a bank-limited turn and a straight
    # line instead of straight through; needs heading and speed of each point
    turn_aware: bool = True

    def __post_init__(self):
        if self.rollout_steps < 1:
            raise ValueError("rollout_steps must be >= 1")
        for name in ("destination_decay", "intruder_decay"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if len(self.protection) != 3 or min(self.protection) < 0:
            raise ValueError("protection must be three non-negative half-widths")


@dataclass(frozen=True)
class RewardSource:
    location: np.ndarray = field(repr=False)
    magnitude: float
    decay: float
    kind: str = "destination"


def destination_source(location, config: PlannerConfig = PlannerConfig()) -> RewardSource:
    return RewardSource(np.asarray(location, dtype=float)[:3], config.destination_reward,
                        config.destination_decay, "destination")


def intruder_magnitude(t, config: PlannerConfig = PlannerConfig()):
    """Signed intruder reward at tube lookahead ``t`` seconds: -(100 t + 500)."""
    return -(config.intruder_slope * t + config.intruder_base)


@dataclass(frozen=True)
class ValueBreakdown:
    v_plus: float
    v_minus: float
    v_terrain: float

    @property
    def total(self) -> float:
        return self.v_plus - self.v_minus - self.v_terrain


def _position(state) -> np.ndarray:
    if isinstance(state, AircraftState):
        return state.position
    return np.asarray(state, dtype=float)[..., :3]


def _kinematic_rows(state) -> np.ndarray:
    """(x, y, z, psi, V) rows of full states; bare positions pass through."""
    s = state.as_array() if isinstance(state, AircraftState) else np.asarray(state, dtype=float)
    s = s.reshape(-1, s.shape[-1])
    return s[:, [X, Y, Z, PSI, V]] if s.shape[1] == 8 else s


def peak_value(state, source: RewardSource) -> float:
    """Unsigned peak ``decay ** distance * |magnitude|`` (distance in metres)."""
    d = float(np.linalg.norm(_position(state) - np.asarray(source.location)[:3]))
    return source.decay ** d * abs(source.magnitude)


def terrain_penalty(state, penalty_altitude: float = 1000.0):
    """``penalty_altitude - altitude`` strictly below the penalty altitude, else 0."""
    z = _position(state)[..., 2]
    pen = np.maximum(penalty_altitude - z, 0.0)
    return pen if np.ndim(pen) else float(pen)


@njit(cache=True)
def _turn_distance(x, y, psi, v, qx, qy, tan_left, tan_right, g):
    """Length of the shortest turn-then-straight ground path to ``(qx, qy)``.

    The turn is flown at the bank limit on either side (radius V^2 / (g tan
    phi)); heading grows clockwise from north.  Falls back to the straight
    distance when the target sits inside both turning circles.
    """
    best = np.inf
    ux, uy = math.cos(psi), math.sin(psi)
    for side in (-1.0, 1.0):
        r = v * v / (g * (tan_right if side > 0 else tan_left))
        cx, cy = x - side * r * uy, y + side * r * ux
        wx, wy = qx - cx, qy - cy
        d2 = wx * wx + wy * wy
        if d2 < r * r:
            continue
        leg = math.sqrt(d2 - r * r)
        # exit direction: w rotated by side * asin(r / |w|), left unnormalised
        ex, ey = wx * leg - side * wy * r, wy * leg + side * wx * r
        turn = math.atan2(side * (ux * ey - uy * ex), ux * ex + uy * ey)
        if turn < -1e-12:  # a hair below zero is rounding, not a full circle
            turn += 2.0 * math.pi
        best = min(best, r * max(turn, 0.0) + leg)
    if best == np.inf:
        best = math.hypot(qx - x, qy - y)
    return best


@njit(cache=True)
def _point_distance(row, dest, tan_left, tan_right, g):
    """Distance from one (x, y, z[, psi, V]) row to ``dest``."""
    dz = row[2] - dest[2]
    if row.shape[0] >= 5 and tan_left > 0.0:
        h = _turn_distance(row[0], row[1], row[3], row[4], dest[0], dest[1], tan_left, tan_right, g)
    else:
        h = math.hypot(row[0] - dest[0], row[1] - dest[1])
    return math.sqrt(h * h + dz * dz)


@njit(cache=True)
def _destination_distance(pts, dest, tan_left, tan_right, g):
    out = np.empty(pts.shape[0])
    for i in range(pts.shape[0]):
        out[i] = _point_distance(pts[i], dest, tan_left, tan_right, g)
    return out


def _turn_params(config: PlannerConfig, limits: PerformanceLimits, g: float):
    """(tan left bank, tan right bank, g); zeros switch the turn-aware distance off."""
    if not config.turn_aware:
        return 0.0, 0.0, g
    return math.tan(math.radians(-limits.phi_min)), math.tan(math.radians(limits.phi_max)), g


def _tube_slices(tubes, lookahead_t, config: PlannerConfig):
    """Stack the box of every tube at ``lookahead_t`` (nearest sample)."""
    centers, radii, times = [], [], []
    for tube in tubes:
        if not tube.times[0] - 1e-9 <= lookahead_t <= tube.times[-1] + 1e-9:
            continue
        sel = [int(np.argmin(np.abs(tube.times - lookahead_t)))]
        centers.append(tube.positions[sel])
        radii.append(tube.radii[sel] + np.asarray(config.protection, dtype=float))
        times.append(tube.times[sel])
    if not centers:
        return np.empty((0, 3)), np.empty((0, 3)), np.empty(0)
    return np.concatenate(centers), np.concatenate(radii), np.concatenate(times)


def evaluate_positions(pos: np.ndarray, lookahead_t: float, destination: RewardSource,
                       tubes, config: PlannerConfig = PlannerConfig(),
                       limits: PerformanceLimits = PerformanceLimits(), g: float = 9.81):
    """Vectorised value terms for an (N, 3) array of positions.

    Rows may carry heading and speed as two extra columns ``(x, y, z, psi,
    V)``; the destination distance is then turn-aware.  Returns
    ``(v_plus, v_minus, v_terrain)`` arrays.
    """
    pts = np.asarray(pos, dtype=float)
    pts = np.ascontiguousarray(pts.reshape(-1, pts.shape[-1] if pts.ndim > 1 else 3))
    pos = pts[:, :3]
    d_dest = _destination_distance(pts, np.asarray(destination.location, dtype=float),
                                   *_turn_params(config, limits, g))
    v_plus = abs(destination.magnitude) * destination.decay ** d_dest
    v_minus = np.zeros(len(pos))

    centers, radii, times = _tube_slices(tubes, lookahead_t, config)
    if len(centers) and len(pos):
        lo, hi = pos.min(axis=0), pos.max(axis=0)
        near = np.all((centers - radii <= hi) & (centers + radii >= lo), axis=1)
        centers, radii, times = centers[near], radii[near], times[near]
    if len(centers):
        diff = pos[:, None, :] - centers[None, :, :]
        inside = np.all(np.abs(diff) <= radii[None], axis=2)
        if inside.any():
            mags = np.abs(intruder_magnitude(times, config))
            peaks = mags[None, :] * config.intruder_decay ** np.linalg.norm(diff, axis=2)
            v_minus = np.where(inside, peaks, 0.0).max(axis=1)

    z = pos[:, 2]
    v_terrain = np.where(z < config.penalty_altitude, config.penalty_altitude - z, 0.0)
    return v_plus, v_minus, v_terrain


@njit(cache=True)
def _score_paths(paths, dest, dmag, ddecay, centers, radii, mags, idecay, pen_alt,
                 tan_left, tan_right, g):
    n, h = paths.shape[0], paths.shape[1]
    m = centers.shape[1]
    ld, li = math.log(ddecay), math.log(idecay)
    vp = np.empty(n)
    vm = np.zeros(n)
    vt = np.zeros(n)
    for i in range(n):
        dmin = np.inf
        # late samples are usually nearest; the straight distance is a lower
        # bound, so earlier samples can often skip the turn geometry
        for k in range(h - 1, -1, -1):
            x, y, z = paths[i, k, 0], paths[i, k, 1], paths[i, k, 2]
            if (x - dest[0]) ** 2 + (y - dest[1]) ** 2 + (z - dest[2]) ** 2 < dmin * dmin:
                dmin = min(dmin, _point_distance(paths[i, k], dest, tan_left, tan_right, g))
            if z < pen_alt:
                vt[i] = max(vt[i], pen_alt - z)
            for j in range(m):
                ex, ey, ez = x - centers[k, j, 0], y - centers[k, j, 1], z - centers[k, j, 2]
                if abs(ex) <= radii[k, j, 0] and abs(ey) <= radii[k, j, 1] and abs(ez) <= radii[k, j, 2]:
                    vm[i] = max(vm[i], mags[k, j] * math.exp(li * math.sqrt(ex * ex + ey * ey + ez * ez)))
        vp[i] = dmag * math.exp(ld * dmin)
    return vp, vm, vt


def evaluate_paths(paths: np.ndarray, dt: float, destination: RewardSource, tubes,
                   config: PlannerConfig = PlannerConfig(), t0: float = 0.0,
                   limits: PerformanceLimits = PerformanceLimits(), g: float = 9.81):
    """Worst-case value terms along (N, H, 3) position paths sampled every ``dt``.

    Sample k is tested against the tube boxes at ``t0 + (k + 1) dt``; each
    term is the maximum over the path (best approach to the destination,
    strongest intruder penalty, deepest terrain penalty).  Paths with five
    columns ``(x, y, z, psi, V)`` get the turn-aware destination distance.
    """
    paths = np.ascontiguousarray(paths, dtype=float)
    h = paths.shape[1]
    look = t0 + dt * np.arange(1, h + 1)
    prot = np.asarray(config.protection, dtype=float)
    # pad absent boxes with negative radii so they never contain anything
    m = max(len(tubes), 1)
    centers, radii, mags = np.zeros((h, m, 3)), np.full((h, m, 3), -1.0), np.zeros((h, m))
    for j, tube in enumerate(tubes):
        ok = (look >= tube.times[0] - 1e-9) & (look <= tube.times[-1] + 1e-9)
        sel = np.abs(tube.times[:, None] - look[None, :]).argmin(axis=0)[ok]
        centers[ok, j] = tube.positions[sel]
        radii[ok, j] = tube.radii[sel] + prot
        mags[ok, j] = np.abs(intruder_magnitude(tube.times[sel], config))
    return _score_paths(paths, np.asarray(destination.location, dtype=float), abs(destination.magnitude),
                        destination.decay, centers, radii, mags, config.intruder_decay,
                        config.penalty_altitude, *_turn_params(config, limits, g))


def evaluate_state(future, lookahead_t: float, destination: RewardSource, tubes,
                   penalty_altitude: float | None = None,
                   config: PlannerConfig = PlannerConfig(),
                   limits: PerformanceLimits = PerformanceLimits(), g: float = 9.81) -> ValueBreakdown:
    """Score one projected state ``lookahead_t`` seconds ahead."""
    if penalty_altitude is not None and penalty_altitude != config.penalty_altitude:
        config = PlannerConfig(**{**config.__dict__, "penalty_altitude": penalty_altitude})
    vp, vm, vt = evaluate_positions(_kinematic_rows(future), lookahead_t, destination, tubes,
                                    config, limits, g)
    return ValueBreakdown(float(vp[0]), float(vm[0]), float(vt[0]))


def project_actions(state, action_set: ActionSet, params: AutopilotParams, dt: float):
    """RK4 projection of ``state`` under every joint action in ``action_set``.

    Flight-path angle, roll and speed each depend on a single command axis and
    the turn rate only on (roll, speed), so those stages are computed on the
    small factor grids and broadcast; only the position stages need the full
    product.  Returns ``(commands, states)`` in enumeration order.
    """
    s = state.as_array() if isinstance(state, AircraftState) else np.asarray(state, dtype=float)
    gc, pc, vc = action_set.radians()
    gc, pc, vc = gc[:, None, None], pc[None, :, None], vc[None, None, :]
    bg, bv, bp, g = params.b_gamma, params.b_v, params.b_phi, params.g
    h = float(dt)
    gam0, phi0, v0, psi0 = s[GAMMA], s[PHI], s[V], s[PSI]
    cos_rel = np.cos(s[CHI] - s[PSI])  # heading and course turn together

    def rates(gm, ph, sp, ps):
        turn = g / sp * np.tan(ph) * cos_rel
        cg = np.cos(gm)
        return (sp * np.cos(ps) * cg, sp * np.sin(ps) * cg, sp * np.sin(gm), turn,
                bg * (gc - gm), bp * (pc - ph), bv * (vc - sp))

    k1 = rates(gam0, phi0, v0, psi0)
    k2 = rates(gam0 + 0.5 * h * k1[4], phi0 + 0.5 * h * k1[5], v0 + 0.5 * h * k1[6], psi0 + 0.5 * h * k1[3])
    k3 = rates(gam0 + 0.5 * h * k2[4], phi0 + 0.5 * h * k2[5], v0 + 0.5 * h * k2[6], psi0 + 0.5 * h * k2[3])
    k4 = rates(gam0 + h * k3[4], phi0 + h * k3[5], v0 + h * k3[6], psi0 + h * k3[3])
    inc = [h / 6.0 * (a + 2.0 * b + 2.0 * c + d) for a, b, c, d in zip(k1, k2, k3, k4)]

    shape = (gc.shape[0], pc.shape[1], vc.shape[2])
    out = np.empty(shape + (8,))
    out[..., X] = s[X] + inc[0]
    out[..., Y] = s[Y] + inc[1]
    out[..., Z] = s[Z] + inc[2]
    out[..., PSI] = wrap_angle(psi0 + inc[3])
    out[..., GAMMA] = wrap_angle(gam0 + inc[4])
    out[..., CHI] = wrap_angle(s[CHI] + inc[3])
    out[..., PHI] = wrap_angle(phi0 + inc[5])
    out[..., V] = v0 + inc[6]

    cmds = np.empty(shape + (3,))
    cmds[..., 0], cmds[..., 1], cmds[..., 2] = np.broadcast_arrays(gc, pc, vc)
    return cmds.reshape(-1, 3), out.reshape(-1, 8)


@dataclass
class CandidateSet:
    """Projected states for a batch of actions with their value terms."""

    index: np.ndarray
    commands: np.ndarray
    states: np.ndarray
    v_plus: np.ndarray
    v_minus: np.ndarray
    v_terrain: np.ndarray
    excess: np.ndarray  # comfort-limit excess, 0 when compliant

    @property
    def total(self) -> np.ndarray:
        return self.v_plus - self.v_minus - self.v_terrain

    def __len__(self):
        return len(self.index)

    def subset(self, mask) -> "CandidateSet":
        return CandidateSet(*(getattr(self, f)[mask] for f in
                              ("index", "commands", "states", "v_plus", "v_minus", "v_terrain", "excess")))

    def breakdown(self, i: int) -> ValueBreakdown:
        return ValueBreakdown(float(self.v_plus[i]), float(self.v_minus[i]), float(self.v_terrain[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield Command(*self.commands[i]), self.states[i], self.breakdown(i)


def evaluate_candidates(ownship, action_set: ActionSet, destination: RewardSource, tubes,
                        config: "RunConfig") -> CandidateSet:
    s = ownship.as_array() if isinstance(ownship, AircraftState) else np.asarray(ownship, dtype=float)
    dt = config.vehicle.dt
    ap = config.vehicle.autopilot
    cmds, states = project_actions(s, action_set, ap, dt)
    gc, pc, vc = (np.ascontiguousarray(a, dtype=float) for a in action_set.radians())
    paths = held_rollout(s, gc, pc, vc, config.planner.rollout_steps, ap.b_gamma, ap.b_v,
                         ap.b_phi, ap.g, float(dt)).reshape(len(cmds), -1, 5)
    finite = np.all(np.isfinite(states), axis=1) & (states[:, V] > 0) & np.all(np.isfinite(paths), axis=(1, 2))
    idx = np.nonzero(finite)[0]
    cmds, states, paths = cmds[idx], states[idx], paths[idx]
    vp, vm, vt = evaluate_paths(paths, dt, destination, tubes, config.planner,
                                limits=config.vehicle.limits, g=ap.g)
    excess = limit_excess(states, s, config.vehicle.limits, dt)
    return CandidateSet(idx, cmds, states, vp, vm, vt, excess)


def coast_potential(states: np.ndarray, lookahead_t: float, destination: RewardSource, tubes,
                    config: "RunConfig") -> np.ndarray:
    """Total value after one more step holding the current attitude and speed.

    Holding ``(gamma, phi, V)`` makes this a function of the state alone, so
    it can serve as a shaping potential.
    """
    states = np.asarray(states, dtype=float).reshape(-1, 8)
    held = states[:, [GAMMA, PHI, V]]
    nxt = step_batch(states, held, config.vehicle.autopilot, config.vehicle.dt)
    vp, vm, vt = evaluate_positions(_kinematic_rows(nxt), lookahead_t + config.vehicle.dt,
                                    destination, tubes, config.planner, config.vehicle.limits,
                                    config.vehicle.autopilot.g)
    total = vp - vm - vt
    return np.where(np.isfinite(total), total, -np.inf)


class PlanResult(NamedTuple):
    command: Command
    state: np.ndarray
    breakdown: ValueBreakdown
    index: int  # row in the action set's joint enumeration
    score: float  # ranking key actually maximised
    deadlock: bool = False
    recovery: bool = False  # no comfort-compliant action existed

    @property
    def exempt(self) -> bool:
        return self.deadlock or self.recovery


def plan_step(ownship, destination: RewardSource, tubes, action_set: ActionSet,
              config: "RunConfig", mode: str | None = None,
              respect_limits: bool = True) -> PlanResult:
    """Choose the best joint action for one control step.

    ``mode`` defaults to ``config.safety.mode``.  In shield mode, negative
    candidates are removed first and :class:`Deadlock` is raised when none
    survive.  In shaping mode candidates are ranked by value plus the
    potential difference of the coasted states.  Ties go to the lowest
    enumeration index.
    """
    mode = config.safety.mode if mode is None else mode
    cands = evaluate_candidates(ownship, action_set, destination, tubes, config)
    if len(cands) == 0:
        raise FloatingPointError("every projected state was non-finite")

    recovery = False
    if respect_limits and config.planner.enforce_limits:
        ok = cands.excess <= 1e-9
        if ok.any():
            cands = cands.subset(ok)
        else:
            # left the envelope (e.g. after an emergency manoeuvre): get back fastest
            recovery = True
            cands = cands.subset(cands.excess <= cands.excess.min() + 1e-9)

    if mode == "shield":
        cands = shield_filter(cands)
        if len(cands) == 0:
            raise Deadlock("shield blocked every action")

    score = cands.total
    if mode == "shaping":
        dt = config.vehicle.dt
        s = ownship.as_array() if isinstance(ownship, AircraftState) else np.asarray(ownship, dtype=float)
        phi_now = coast_potential(s, 0.0, destination, tubes, config)[0]
        phi_next = coast_potential(cands.states, dt, destination, tubes, config)
        score = score + shaping_bonus(phi_now, phi_next, config.safety.shaping_kappa)

    best = int(np.argmax(score))
    return PlanResult(Command(*(float(c) for c in cands.commands[best])), cands.states[best].copy(),
                      cands.breakdown(best), int(cands.index[best]), float(score[best]),
                      False, recovery)
