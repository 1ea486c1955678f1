"""Command-line entry points: ``run``, ``experiment`` and ``reach``.

Every data file written here is a pure function of the resolved config and
seed.  Wall-clock measurements go to separate ``timing.*`` files.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .actions import nominal_action_set
from .config import RunConfig
from .reachability import (compute_reach_tube, containment_fraction,
                           sample_trajectories)
from .safety import MODES
from .sim import (TIMING_FIELDS, generate_scenario, limit_audit, run_episode,
                  run_experiment)
from .vehicle import STATE_FIELDS, AircraftState


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.mode:
        cfg = cfg.replace(safety={"mode": args.mode})
    return cfg


def _scenario(cfg: RunConfig):
    sc = cfg.scenario
    return generate_scenario(sc.n_aircraft, sc.radius, sc.seed, cruise_altitude=sc.cruise_altitude,
                             initial_speed=sc.initial_speed, min_spacing=sc.min_spacing,
                             penalty_altitude=cfg.planner.penalty_altitude)


def cmd_run(args) -> int:
    cfg = _load_config(args)
    if args.seed is not None:
        cfg = cfg.replace(scenario={"seed": args.seed})
    if args.aircraft is not None:
        cfg = cfg.replace(scenario={"n_aircraft": args.aircraft})
    out = Path(args.out)
    scenario = _scenario(cfg)
    res = run_episode(scenario, cfg.safety.mode, cfg, workers=args.workers)
    dt = cfg.vehicle.dt

    out.mkdir(parents=True, exist_ok=True)
    cfg.dump(out / "config.json")
    for aid, tr in res.trajectories.items():
        rows = ([k, k * dt, *s] for k, s in enumerate(tr))
        write_csv(out / "trajectories" / f"aircraft_{aid:03d}.csv", ["step", "t", *STATE_FIELDS], rows)
    events = [(s, "nmac", a, b) for s, a, b in res.nmac_events]
    events += [(d.step, "deadlock", d.aircraft, "") for d in res.decisions if d.deadlock]
    events += [(s, "reach_avoid", a, b) for s, a, b in res.reach_avoid_violations]
    events += [(s, "arrival", a, "") for a, s in res.arrivals.items() if s is not None]
    events.sort(key=lambda e: (e[0], e[1], e[2], str(e[3])))
    write_csv(out / "events.csv", ["step", "kind", "aircraft", "other"], events)
    write_csv(out / "decisions.csv",
              ["aircraft", "step", "gamma_c", "phi_c", "v_c", "v_plus", "v_minus", "v_terrain",
               "total", "n_tubes", "deadlock", "recovery"],
              sorted(res.decisions, key=lambda d: (d.step, d.aircraft)))
    bad, exempt = limit_audit(res, cfg)
    summary = {
        "mode": res.mode, "seed": cfg.scenario.seed, "n_aircraft": len(res.trajectories),
        "steps": res.steps, "nmac_events": res.nmac_count, "nmac_steps": res.nmac_steps,
        "deadlocks": res.deadlock_count, "exempt_steps": exempt, "limit_violations": bad,
        "reach_avoid_violations": len(res.reach_avoid_violations),
        "arrivals": {str(k): v for k, v in res.arrivals.items()}, "all_arrived": res.all_arrived,
    }
    write_json(out / "summary.json", summary)
    t = res.plan_times()
    write_json(out / "timing.json", {"plan_time_mean": float(t.mean()) if len(t) else 0.0,
                                     "plan_time_std": float(t.std(ddof=1)) if len(t) > 1 else 0.0,
                                     "throughput": res.throughput})
    print(f"{res.mode}: {summary['n_aircraft']} aircraft, {res.steps} steps, "
          f"{res.nmac_count} NMAC events, {res.deadlock_count} deadlocks, "
          f"{'all arrived' if res.all_arrived else 'not all arrived'}")
    return 0


def cmd_experiment(args) -> int:
    cfg = _load_config(args)
    ex = cfg.experiment
    base_seed = ex.base_seed if args.seed is None else args.seed
    modes = [args.mode] if args.mode else list(ex.modes)
    cfg = cfg.replace(experiment={"base_seed": base_seed, "modes": modes})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.dump(out / "config.json")

    def progress(e):
        print(f"  {e.count:>3} aircraft  {e.mode:<8} rep {e.repetition:>2}: {e.nmac_events} NMAC",
              file=sys.stderr, flush=True)

    rep = run_experiment(ex.aircraft_counts, ex.repetitions, modes, base_seed, cfg,
                         workers=args.workers, progress=progress)
    cells = [c for c in rep.cells.values()]
    data_fields = [f for f in cells[0].__dataclass_fields__ if f not in TIMING_FIELDS + ("throughput_mean",)]
    report = {"base_seed": base_seed, "repetitions": rep.repetitions, "modes": modes,
              "counts": rep.counts,
              "cells": [{f: getattr(c, f) for f in data_fields} for c in cells]}
    write_json(out / "report.json", report)
    comp = [f for f in data_fields if f != "seeds"]
    write_csv(out / "comparison.csv", comp, ([getattr(c, f) for f in comp] for c in cells))
    ep_fields = [f for f in rep.episodes[0]._fields if f not in TIMING_FIELDS]
    write_csv(out / "episodes.csv", ep_fields, ([getattr(e, f) for f in ep_fields] for e in rep.episodes))
    write_csv(out / "paired_deltas.csv", ["count", "repetition", "seed", "mode_a", "mode_b", "nmac_delta"],
              rep.paired_deltas())
    write_csv(out / "timing.csv", ["count", "mode", "plan_time_mean", "plan_time_std", "throughput_mean"],
              ([c.count, c.mode, c.plan_time_mean, c.plan_time_std, c.throughput_mean] for c in cells))
    for c in cells:
        print(f"{c.count:>3} {c.mode:<8} NMAC {c.nmac_mean:.2f} ± {c.nmac_std:.2f}  "
              f"plan {1e3 * c.plan_time_mean:.2f} ms")
    return 0


def cmd_reach(args) -> int:
    cfg = _load_config(args)
    if args.r0 is not None:
        cfg = cfg.replace(reach={"initial_radius": args.r0})
    seed = cfg.scenario.seed if args.seed is None else args.seed
    if args.state:
        state = AircraftState.from_array([float(v) for v in args.state.split(",")])
    else:
        state = AircraftState.level(0.0, 0.0, cfg.scenario.cruise_altitude, 0.0, cfg.scenario.initial_speed)
    dt, ap = cfg.vehicle.dt, cfg.vehicle.autopilot
    aset = nominal_action_set()
    tube, trajs = compute_reach_tube(state.as_array(), np.random.default_rng([seed, 0]), cfg.reach,
                                     aset, ap, dt)
    fresh = sample_trajectories(state.as_array(), cfg.reach.initial_radius, aset, cfg.reach.horizon,
                                args.fresh + 1, np.random.default_rng([seed, 1]), ap, dt)
    frac = containment_fraction(tube, fresh.states[1:])

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.dump(out / "config.json")
    lo, hi = tube.positions - tube.radii, tube.positions + tube.radii
    write_csv(out / "reach_bounds.csv", ["t", "x_lo", "x_hi", "y_lo", "y_hi", "z_lo", "z_hi"],
              ([t, lo[k, 0], hi[k, 0], lo[k, 1], hi[k, 1], lo[k, 2], hi[k, 2]]
               for k, t in enumerate(tube.times)))
    for a, b in (("x", "y"), ("x", "z"), ("y", "z")):
        i, j = "xyz".index(a), "xyz".index(b)
        write_csv(out / f"projection_{a}{b}.csv", ["t", f"{a}_lo", f"{a}_hi", f"{b}_lo", f"{b}_hi"],
                  ([t, lo[k, i], hi[k, i], lo[k, j], hi[k, j]] for k, t in enumerate(tube.times)))
    write_csv(out / "samples.csv", ["trajectory", "t", "x", "y", "z"],
              ([n, t, *trajs.states[n, k, :3]] for n in range(len(trajs.states))
               for k, t in enumerate(trajs.times)))
    write_json(out / "reach.json", {"seed": seed, "K": tube.params.K,
                                    "breakpoints": list(map(float, tube.params.breakpoints)),
                                    "slopes": list(map(float, tube.params.slopes)),
                                    "fresh_samples": args.fresh, "containment": frac})
    print(f"containment fraction: {frac:.4f} ({args.fresh} fresh trajectories)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uamplan", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, help_ in (("run", cmd_run, "fly one episode"),
                            ("experiment", cmd_experiment, "repeat episodes over counts and modes"),
                            ("reach", cmd_reach, "build one reach tube")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", help="JSON config; defaults apply to missing fields")
        s.add_argument("--mode", choices=MODES)
        s.add_argument("--seed", type=int)
        s.add_argument("--out", default=f"out/{name}")
        s.add_argument("--workers", type=int, default=1)
        s.set_defaults(func=fn)
        if name == "run":
            s.add_argument("--aircraft", type=int, help="override scenario.n_aircraft")
        if name == "reach":
            s.add_argument("--state", help="comma-separated x,y,z,psi,gamma,chi,phi,v")
            s.add_argument("--r0", type=float, help="override reach.initial_radius")
            s.add_argument("--fresh", type=int, default=1000, help="fresh trajectories for the check")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
