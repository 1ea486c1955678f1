"""
Baseline, shield and shaping on the same skies
==============================================

A handful of seeded scenarios is flown once per safety mode.  Seeds are
shared across modes, so each column difference is a paired comparison.
Pass a larger aircraft count on the command line to crowd the sphere;
32 aircraft take a few minutes per episode on one core.
"""
import sys

from uamplan import RunConfig, run_experiment

count = int(sys.argv[1]) if len(sys.argv) > 1 else 8
reps = int(sys.argv[2]) if len(sys.argv) > 2 else 2

report = run_experiment([count], reps, ["baseline", "shield", "shaping"], base_seed=0,
                        config=RunConfig(), progress=lambda e: print(
                            f"  rep {e.repetition} {e.mode:<8} NMAC {e.nmac_events} "
                            f"deadlocks {e.deadlocks} steps {e.steps}"))
print()
for mode in ("baseline", "shield", "shaping"):
    c = report.cell(count, mode)
    print(f"{mode:>8}: NMAC {c.nmac_mean:.2f} +/- {c.nmac_std:.2f}, deadlocks {c.deadlock_mean:.1f}, "
          f"arrivals {c.arrival_rate:.0%}, plan {1e3 * c.plan_time_mean:.1f} ms")
for row in report.paired_deltas():
    print("paired delta", row)
