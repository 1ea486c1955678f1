"""Run configuration: nested dataclasses with JSON round-tripping."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .planner import PlannerConfig
from .reachability import ReachConfig
from .safety import MODES, SafetyConfig
from .vehicle import AutopilotParams, PerformanceLimits


@dataclass(frozen=True)
class VehicleConfig:
    autopilot: AutopilotParams = field(default_factory=AutopilotParams)
    limits: PerformanceLimits = field(default_factory=PerformanceLimits)
    dt: float = 1.0  # s

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")


@dataclass(frozen=True)
class ScenarioConfig:
    n_aircraft: int = 8
    radius: float = 15000.0  # m, arena sphere and vertiport ring
    cruise_altitude: float = 1500.0  # m
    initial_speed: float = 50.0  # m/s
    min_spacing: float = 500.0  # m of arc between any two vertiports
    arrival_threshold: float = 300.0  # m
    max_steps: int = 2000
    nmac_horizontal: float = 152.0  # m
    nmac_vertical: float = 30.0  # m
    seed: int = 0

    def __post_init__(self):
        if self.n_aircraft < 1:
            raise ValueError("n_aircraft must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    aircraft_counts: tuple = (2, 4, 8, 16, 32)
    repetitions: int = 25
    modes: tuple = MODES
    base_seed: int = 0

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        bad = [m for m in self.modes if m not in MODES]
        if bad:
            raise ValueError(f"unknown modes {bad}")


@dataclass(frozen=True)
class RunConfig:
    vehicle: VehicleConfig = field(default_factory=VehicleConfig)
    reach: ReachConfig = field(default_factory=ReachConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    safety: SafetyConfig = field(default_factory=SafetyConfig)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)

    def replace(self, **sections) -> "RunConfig":
        """Copy with some fields changed; ``replace(safety={"mode": "shield"})``."""
        d = self.to_dict()
        for name, changes in sections.items():
            d[name].update(changes)
        return RunConfig.from_dict(d)

    def to_dict(self) -> dict:
        return _to_jsonable(dataclasses.asdict(self))

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        return _build(cls, data or {}, "config")

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "RunConfig":
        p = Path(path)
        if not p.is_file():
            raise FileNotFoundError(f"config not found: {p}")
        return cls.from_dict(json.loads(p.read_text()))


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    return obj


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ValueError(f"{where}: expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ValueError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        default = fields[name].default_factory() if fields[name].default_factory is not dataclasses.MISSING \
            else fields[name].default
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), value, f"{where}.{name}")
        elif isinstance(default, tuple):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    return cls(**kwargs)
