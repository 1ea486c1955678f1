"""
What the planner sees
=====================

The value of a position is the destination attraction minus the strongest
intruder penalty minus the terrain penalty.  Here the terms are printed
along a straight line that passes through a parked intruder box, then
the planner is asked to pick one command in front of that box.
"""
import numpy as np

from uamplan import AircraftState, RunConfig, destination_source, nominal_action_set, plan_step
from uamplan.planner import evaluate_positions
from uamplan.reachability import DiscrepancyParams, build_tube

times = np.arange(11.0)
center = np.zeros((11, 8))
center[:, :3] = [600.0, 0.0, 1500.0]
parked = build_tube(center, 20.0, DiscrepancyParams(0.0, (0.0, 10.0), (0.0,)), times)
dest = destination_source([3000.0, 0.0, 1500.0])

xs = np.linspace(0, 1200, 13)
line = np.column_stack([xs, np.zeros_like(xs), np.full_like(xs, 1500.0)])
vp, vm, vt = evaluate_positions(line, 1.0, dest, [parked])
print("    x    attraction  intruder  total")
for x, a, b, c in zip(xs, vp, vm, vt):
    print(f"{x:6.0f} {a:10.3f} {b:10.3f} {a - b - c:8.3f}")

# below the penalty altitude the terrain term grows one unit per metre
print("terrain penalty at 800 m:", evaluate_positions([[0, 0, 800.0]], 1.0, dest, [])[2][0])

cfg = RunConfig()
own = AircraftState.level(0.0, 0.0, 1500.0, 0.0, 55.0)
for mode in ("baseline", "shield", "shaping"):
    plan = plan_step(own, dest, [parked], nominal_action_set(), cfg, mode=mode)
    c = plan.command
    print(f"{mode:>8}: gamma_c {np.degrees(c.gamma_c):+6.2f} deg, phi_c {np.degrees(c.phi_c):+6.2f} deg, "
          f"v_c {c.v_c:4.0f} m/s, total {plan.breakdown.total:+.3f}")
