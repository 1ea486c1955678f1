"""Multi-aircraft episodes, NMAC bookkeeping and repeated experiments."""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .actions import nominal_action_set
from .config import RunConfig
from .planner import PlanResult, destination_source, plan_step
from .reachability import compute_reach_tube
from .safety import Deadlock, resolve_deadlock
from .vehicle import AircraftState, check_limits, step


class AircraftSpec(NamedTuple):
    id: int
    initial: np.ndarray  # (8,) state array
    origin: int  # index into Scenario.vertiports
    destination: int


@dataclass
class Scenario:
    radius: float
    center: np.ndarray
    aircraft: list
    vertiports: np.ndarray  # (k, 3)
    penalty_altitude: float = 1000.0
    seed: int = 0

    def destination_of(self, aircraft_id: int) -> np.ndarray:
        spec = next(a for a in self.aircraft if a.id == aircraft_id)
        return self.vertiports[spec.destination]


def generate_scenario(n_aircraft: int, radius: float = 15000.0, rng=0, *,
                      cruise_altitude: float = 1500.0, initial_speed: float = 50.0,
                      min_spacing: float = 500.0, penalty_altitude: float = 1000.0) -> Scenario:
    """Antipodal origin/destination pairs on the arena ring, all routes crossing the centre.

    ``rng`` is a seed or a Generator.  Azimuths are drawn one at a time and
    redrawn while any two vertiports (origins and destinations alike) would
    sit closer than ``min_spacing`` metres of arc.  Aircraft start at their
    origin in level flight toward the destination.
    """
    if n_aircraft < 1:
        raise ValueError("n_aircraft must be >= 1")
    seed = int(rng) if not isinstance(rng, np.random.Generator) else 0
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(seed)
    min_sep = min_spacing / radius
    axes: list[float] = []
    azimuths = []
    for _ in range(n_aircraft):
        for _attempt in range(10000):
            theta = gen.uniform(0.0, 2.0 * math.pi)
            axis = theta % math.pi
            # an origin and its antipode share one axis; compare axes mod pi
            if all(min(abs(axis - a), math.pi - abs(axis - a)) >= min_sep for a in axes):
                break
        else:
            raise RuntimeError("could not place vertiports at the requested spacing")
        axes.append(axis)
        azimuths.append(theta)

    center = np.array([0.0, 0.0, cruise_altitude])
    vertiports, aircraft = [], []
    for i, theta in enumerate(azimuths):
        origin = center + radius * np.array([math.cos(theta), math.sin(theta), 0.0])
        dest = center - radius * np.array([math.cos(theta), math.sin(theta), 0.0])
        vertiports += [origin, dest]
        heading = math.atan2(dest[1] - origin[1], dest[0] - origin[0])
        init = AircraftState.level(*origin, heading, initial_speed).as_array()
        aircraft.append(AircraftSpec(i, init, 2 * i, 2 * i + 1))
    return Scenario(float(radius), center, aircraft, np.array(vertiports),
                    float(penalty_altitude), seed)


def detect_nmac(states, horizontal: float = 152.0, vertical: float = 30.0) -> list[tuple[int, int]]:
    """Index pairs ``(i, j), i < j`` that lost both horizontal and vertical separation."""
    pos = np.array([s.position if isinstance(s, AircraftState) else np.asarray(s)[:3] for s in states],
                   dtype=float).reshape(-1, 3)
    if len(pos) < 2:
        return []
    d = pos[:, None, :] - pos[None, :, :]
    hz = np.hypot(d[..., 0], d[..., 1])
    vt = np.abs(d[..., 2])
    i, j = np.nonzero(np.triu((hz < horizontal) & (vt < vertical), k=1))
    return [(int(a), int(b)) for a, b in zip(i, j)]


class DecisionRecord(NamedTuple):
    aircraft: int
    step: int
    gamma_c: float
    phi_c: float
    v_c: float
    v_plus: float
    v_minus: float
    v_terrain: float
    total: float
    n_tubes: int
    deadlock: bool
    recovery: bool


class PlanTime(NamedTuple):
    step: int
    aircraft: int
    seconds: float


@dataclass
class EpisodeResult:
    mode: str
    seed: int
    trajectories: dict  # id -> (k, 8) array
    decisions: list
    nmac_events: list  # (first step, id_a, id_b) per contiguous violation
    nmac_steps: int  # violating (step, pair) samples
    reach_avoid_violations: list  # (step, ownship, intruder)
    arrivals: dict  # id -> arrival step or None
    steps: int
    per_step_plan_times: list = field(default_factory=list)
    throughput: float = 0.0  # wall seconds for the whole episode

    @property
    def nmac_count(self) -> int:
        return len(self.nmac_events)

    @property
    def deadlock_count(self) -> int:
        return sum(d.deadlock for d in self.decisions)

    @property
    def exempt_count(self) -> int:
        return sum(d.deadlock or d.recovery for d in self.decisions)

    @property
    def all_arrived(self) -> bool:
        return all(v is not None for v in self.arrivals.values())

    def plan_times(self) -> np.ndarray:
        return np.array([p.seconds for p in self.per_step_plan_times])


def _plan_one(aid, step_idx, snapshot, ids, scenario, config: RunConfig, mode, action_set):
    t0 = time.perf_counter()
    own = snapshot[aid]
    rc = config.reach
    tubes, owners = [], []
    for j in ids:
        if j == aid or np.linalg.norm(snapshot[j][:3] - own[:3]) > rc.proximity:
            continue
        rng = np.random.default_rng([scenario.seed, step_idx, aid, j])
        tube, _ = compute_reach_tube(snapshot[j], rng, rc, action_set,
                                     config.vehicle.autopilot, config.vehicle.dt)
        tubes.append(tube)
        owners.append(j)
    dest = destination_source(scenario.destination_of(aid), config.planner)
    try:
        plan = plan_step(own, dest, tubes, action_set, config, mode=mode)
    except Deadlock:
        plan = resolve_deadlock(own, dest, tubes, config)
    return plan, tubes, owners, time.perf_counter() - t0


def run_episode(scenario: Scenario, mode: str | None = None, config: RunConfig = RunConfig(),
                workers: int = 1) -> EpisodeResult:
    """Fly every aircraft to its destination with synchronous updates.

    Within a step all aircraft plan against the same snapshot; each ownship
    builds its own tubes for intruders inside the proximity radius with an
    RNG keyed on (scenario seed, step, ownship, intruder), so results do not
    depend on iteration order or worker count.
    """
    t_start = time.perf_counter()
    mode = config.safety.mode if mode is None else mode
    if mode != config.safety.mode:
        config = config.replace(safety={"mode": mode})
    sc = config.scenario
    dt = config.vehicle.dt
    action_set = nominal_action_set()
    states = {a.id: np.asarray(a.initial, dtype=float).copy() for a in scenario.aircraft}
    traj = {a.id: [states[a.id].copy()] for a in scenario.aircraft}
    arrivals = {a.id: None for a in scenario.aircraft}
    dests = {a.id: scenario.vertiports[a.destination] for a in scenario.aircraft}
    active = sorted(states)
    decisions, plan_times, nmac_events, ra_viol = [], [], [], []
    nmac_steps = 0
    violating: set = set()

    def record_nmac(step_idx, ids):
        nonlocal nmac_steps, violating
        pairs = {(ids[i], ids[j]) for i, j in detect_nmac([states[k] for k in ids],
                                                         sc.nmac_horizontal, sc.nmac_vertical)}
        nmac_steps += len(pairs)
        for p in sorted(pairs - violating):
            nmac_events.append((step_idx, *p))
        violating = pairs

    record_nmac(0, active)
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    step_idx = 0
    try:
        while active and step_idx < sc.max_steps:
            snapshot = {i: states[i].copy() for i in active}
            args = [(i, step_idx, snapshot, active, scenario, config, mode, action_set) for i in active]
            results = list(pool.map(lambda a: _plan_one(*a), args)) if pool else [_plan_one(*a) for a in args]
            for aid, (plan, tubes, owners, secs) in zip(active, results):
                plan: PlanResult
                new = step(snapshot[aid], plan.command, config.vehicle.autopilot, dt)
                states[aid] = new
                traj[aid].append(new.copy())
                b = plan.breakdown
                decisions.append(DecisionRecord(aid, step_idx, *plan.command, b.v_plus, b.v_minus,
                                                b.v_terrain, b.total, len(tubes), plan.deadlock,
                                                plan.recovery))
                plan_times.append(PlanTime(step_idx, aid, secs))
                for tube, j in zip(tubes, owners):
                    k = int(np.argmin(np.abs(tube.times - dt)))
                    if np.all(np.abs(new[:3] - tube.positions[k]) <= tube.radii[k]):
                        ra_viol.append((step_idx, aid, j))
            step_idx += 1
            record_nmac(step_idx, active)
            arrived = [i for i in active if np.linalg.norm(states[i][:3] - dests[i]) <= sc.arrival_threshold]
            for i in arrived:
                arrivals[i] = step_idx
            active = [i for i in active if arrivals[i] is None]
            violating = {p for p in violating if p[0] in active and p[1] in active}
    finally:
        if pool:
            pool.shutdown()

    return EpisodeResult(mode, scenario.seed, {k: np.array(v) for k, v in traj.items()}, decisions,
                         nmac_events, nmac_steps, ra_viol, arrivals, step_idx, plan_times,
                         time.perf_counter() - t_start)


def limit_audit(result: EpisodeResult, config: RunConfig = RunConfig()):
    """Count comfort-limit violations on executed steps, split by exemption.

    Returns ``(non_exempt_violations, exempt_steps)``: a step is the sample
    produced by one decision; it is exempt when that decision was a deadlock
    escape or a recovery back into the envelope.
    """
    flags = {(d.aircraft, d.step): (d.deadlock or d.recovery) for d in result.decisions}
    bad = 0
    for aid, tr in result.trajectories.items():
        hits = {v.index for v in check_limits(tr, config.vehicle.limits, config.vehicle.dt)}
        for k in hits:
            if k == 0 or not flags.get((aid, k - 1), False):
                bad += 1
    return bad, sum(flags.values())


def unanchored_recoveries(result: EpisodeResult) -> int:
    """Recovery steps not reached through an unbroken chain from a deadlock escape.

    An emergency manoeuvre can leave the comfort envelope; the recovery
    steps that follow belong to that deadlock.  Any other recovery means
    the aircraft left the envelope on its own.
    """
    kind = {(d.aircraft, d.step): ("deadlock" if d.deadlock else "recovery" if d.recovery else "")
            for d in result.decisions}
    return sum(1 for (aid, k), v in kind.items()
               if v == "recovery" and kind.get((aid, k - 1), "") == "")


def scenario_seed(base_seed: int, count: int, repetition: int) -> int:
    """Scenario seed shared by every mode, so mode comparisons are paired."""
    return int(np.random.SeedSequence([base_seed, count, repetition]).generate_state(1)[0])


class EpisodeSummary(NamedTuple):
    count: int
    mode: str
    repetition: int
    seed: int
    nmac_events: int
    nmac_steps: int
    deadlocks: int
    exempt_steps: int
    unanchored_recoveries: int
    limit_violations: int
    reach_avoid_violations: int
    arrived: int
    steps: int
    plan_time_mean: float
    plan_time_std: float
    throughput: float


TIMING_FIELDS = ("plan_time_mean", "plan_time_std", "throughput")


@dataclass
class ExperimentCell:
    count: int
    mode: str
    repetitions: int
    seeds: list
    nmac_mean: float
    nmac_std: float
    nmac_step_mean: float
    nmac_step_std: float
    deadlock_mean: float
    arrival_rate: float
    reach_avoid_violations: int
    limit_violations: int
    plan_time_mean: float
    plan_time_std: float
    throughput_mean: float
    std_undefined: bool  # single repetition: std reported as 0


@dataclass
class ExperimentReport:
    base_seed: int
    counts: list
    modes: list
    repetitions: int
    cells: dict  # (count, mode) -> ExperimentCell
    episodes: list  # EpisodeSummary rows

    def cell(self, count, mode) -> ExperimentCell:
        return self.cells[(count, mode)]

    def paired_deltas(self):
        """Per-seed NMAC differences between every pair of modes."""
        by = {(e.count, e.repetition, e.mode): e for e in self.episodes}
        rows = []
        for count in self.counts:
            for rep in range(self.repetitions):
                for i, a in enumerate(self.modes):
                    for b in self.modes[i + 1:]:
                        ea, eb = by[(count, rep, a)], by[(count, rep, b)]
                        rows.append((count, rep, ea.seed, a, b, ea.nmac_events - eb.nmac_events))
        return rows


def _std(x):
    return float(np.std(x, ddof=1)) if len(x) > 1 else 0.0


def _run_job(job):
    count, rep, mode, seed, config = job
    sc = config.scenario
    scenario = generate_scenario(count, sc.radius, seed, cruise_altitude=sc.cruise_altitude,
                                 initial_speed=sc.initial_speed, min_spacing=sc.min_spacing,
                                 penalty_altitude=config.planner.penalty_altitude)
    res = run_episode(scenario, mode, config)
    bad, exempt = limit_audit(res, config)
    t = res.plan_times()
    return EpisodeSummary(count, mode, rep, seed, res.nmac_count, res.nmac_steps, res.deadlock_count,
                          exempt, unanchored_recoveries(res), bad, len(res.reach_avoid_violations),
                          sum(v is not None for v in res.arrivals.values()), res.steps,
                          float(t.mean()) if len(t) else 0.0, _std(t), res.throughput), t


def run_experiment(aircraft_counts, repetitions: int, modes, base_seed: int = 0,
                   config: RunConfig = RunConfig(), workers: int = 1, progress=None) -> ExperimentReport:
    """Repeat episodes for every (aircraft count, mode) on paired scenario seeds."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    counts, modes = [int(c) for c in aircraft_counts], list(modes)
    jobs = [(c, r, m, scenario_seed(base_seed, c, r), config)
            for c in counts for r in range(repetitions) for m in modes]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            outs = list(ex.map(_run_job, jobs))
    else:
        outs = []
        for job in jobs:
            outs.append(_run_job(job))
            if progress:
                progress(outs[-1][0])
    episodes = [o[0] for o in outs]
    cells = {}
    for c in counts:
        for m in modes:
            rows = [o for o in outs if o[0].count == c and o[0].mode == m]
            eps = [o[0] for o in rows]
            times = np.concatenate([o[1] for o in rows]) if rows else np.empty(0)
            nm = [e.nmac_events for e in eps]
            ns = [e.nmac_steps for e in eps]
            cells[(c, m)] = ExperimentCell(
                c, m, len(eps), [e.seed for e in eps], float(np.mean(nm)), _std(nm),
                float(np.mean(ns)), _std(ns), float(np.mean([e.deadlocks for e in eps])),
                float(np.sum([e.arrived for e in eps]) / (c * len(eps))),
                int(np.sum([e.reach_avoid_violations for e in eps])),
                int(np.sum([e.limit_violations for e in eps])),
                float(times.mean()) if len(times) else 0.0, _std(times),
                float(np.mean([e.throughput for e in eps])), len(eps) < 2)
    return ExperimentReport(base_seed, counts, modes, repetitions, cells, episodes)
