"""
Two aircraft nose to nose
=========================

Two air taxis start 3 km apart on the same line, flying at each other.
Without tubes (every intruder treated as out of range) they collide; with
tubes each one sees the other's reachable boxes and steps aside.
"""
import math

import numpy as np

from uamplan import AircraftState, RunConfig, run_episode
from uamplan.sim import AircraftSpec, Scenario

ports = np.array([[-1500.0, 0, 1500], [3500.0, 0, 1500],
                  [1500.0, 0, 1500], [-3500.0, 0, 1500]])
aircraft = [AircraftSpec(0, AircraftState.level(*ports[0], 0.0, 50).as_array(), 0, 1),
            AircraftSpec(1, AircraftState.level(*ports[2], math.pi, 50).as_array(), 2, 3)]
scenario = Scenario(15000.0, np.array([0.0, 0.0, 1500.0]), aircraft, ports, 1000.0, seed=5)

blind = RunConfig().replace(reach={"proximity": 1.0})
for label, cfg in (("blind", blind), ("with tubes", RunConfig())):
    res = run_episode(scenario, "baseline", cfg)
    a, b = res.trajectories[0], res.trajectories[1]
    n = min(len(a), len(b))
    closest = np.linalg.norm(a[:n, :3] - b[:n, :3], axis=1)
    k = int(closest.argmin())
    print(f"{label:>10}: closest approach {closest[k]:6.1f} m at t={k} s, "
          f"{res.nmac_count} NMAC event(s), arrived {res.all_arrived}")

# where the avoiding pair went: largest sideways offset from the x axis
print(f"max lateral offset: {np.abs(a[:, 1]).max():.0f} m and {np.abs(b[:, 1]).max():.0f} m")
