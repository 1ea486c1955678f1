"""
Learning a reach tube from twenty simulated flights
===================================================

An intruder at cruise is sampled from a small ball of initial states, each
sample flying a fresh random command every second.  The spread of the
samples is turned into a piecewise exponential bound, and the bound into a
box around the reference path.  A thousand flights that were never seen
during learning are then checked against the boxes.
"""
import numpy as np

from uamplan import AircraftState, ReachConfig, compute_reach_tube, sample_trajectories
from uamplan.actions import nominal_action_set
from uamplan.reachability import containment_fraction

intruder = AircraftState(0.0, 0.0, 1500.0, 0.4, 0.0, 0.4, 0.1, 55.0)
config = ReachConfig()
tube, training = compute_reach_tube(intruder.as_array(), np.random.default_rng(1), config)

# the learned envelope: ln K and one slope per window of the horizon
p = tube.params
print(f"K = {p.K:.3f}")
for seg in p.segments:
    print(f"  [{seg.t_start:4.1f}, {seg.t_end:4.1f}] s  slope {seg.a:+.3f} 1/s")

# box half-width over time, next to the spread of the training flights
spread = training.states[:, :, :3].max(axis=0) - training.states[:, :, :3].min(axis=0)
print("\n   t   half-width   widest training spread")
for t, r, s in zip(tube.times, tube.radii[:, 0], spread.max(axis=1)):
    print(f"{t:4.0f} {r:10.1f} m {s:14.1f} m")

# fresh flights from a different stream; row 0 is the reference, drop it
fresh = sample_trajectories(intruder, config.initial_radius, nominal_action_set(),
                            config.horizon, 1001, np.random.default_rng(2))
print(f"\nfresh flights inside the tube at every sample: {containment_fraction(tube, fresh.states[1:]):.1%}")
