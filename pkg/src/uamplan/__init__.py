"""Decentralized air-taxi trajectory planning with learned reach tubes."""
from .actions import (ActionSet, emergency_action_set, enumerate_joint,
                      nominal_action_set)
from .config import (ExperimentConfig, RunConfig, ScenarioConfig,
                     VehicleConfig)
from .planner import (PlannerConfig, PlanResult, RewardSource, ValueBreakdown,
                      destination_source, evaluate_state, peak_value,
                      plan_step, terrain_penalty)
from .reachability import (DiscrepancyParams, ReachConfig, ReachTube,
                           build_tube, compute_reach_tube,
                           containment_fraction, learn_discrepancy,
                           sample_trajectories, sensitivity_points,
                           tube_contains)
from .safety import (MODES, Deadlock, SafetyConfig, resolve_deadlock,
                     shaping_bonus, shield_filter)
from .sim import (EpisodeResult, ExperimentReport, Scenario, detect_nmac,
                  generate_scenario, run_episode, run_experiment)
from .vehicle import (AircraftState, AutopilotParams, Command,
                      PerformanceLimits, check_limits, derivatives, step)

__version__ = "0.1.0"
