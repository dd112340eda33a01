"""JSON experiment configuration.

A config file is one JSON object whose sections map onto the dataclasses below.
Missing keys take their defaults, unknown keys raise :class:`ConfigError`.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .exceptions import ConfigError
from .geometry import GeometryConfig
from .identification import AUTO, DEFAULT_GAMMA, FeasibleBox, Stage, StagePlan
from .stokes import FlowBCs
from .transport import Isotherm, IsothermKind, TransportParams

__all__ = [
    "MeshConfig",
    "SensitivityConfig",
    "TransportConfig",
    "StageConfig",
    "IdentificationConfig",
    "ExperimentConfig",
    "load_config",
    "LEVEL_NAMES",
]

LEVEL_NAMES = ("coarse", "basic", "fine")


@dataclass
class MeshConfig:
    h_target: float = 0.0825
    refinements: int = 2
    level: int = 1  # ladder level used by flow, transport and identification

    def validate(self):
        if not self.h_target > 0:
            raise ConfigError("mesh.h_target must be positive")
        if self.refinements < 0:
            raise ConfigError("mesh.refinements must be non-negative")
        if not 0 <= self.level <= self.refinements:
            raise ConfigError("mesh.level must lie within the refinement ladder")


@dataclass
class SensitivityConfig:
    axis: str = "Pe"
    values: list = field(default_factory=list)

    def validate(self):
        if self.axis not in ("Pe", "Da_a", "Da_d", "M"):
            raise ConfigError(f"transport.sensitivity.axis must be Pe, Da_a, Da_d or M, got {self.axis!r}")


@dataclass
class TransportConfig:
    Pe: float = 10.0
    isotherm: str = "henry"
    Da_a: float = 0.005
    Da_d: float = 0.05
    M: typing.Optional[float] = None
    tau: float = 0.1
    T_end: float = 40.0
    snapshot_times: list = field(default_factory=list)
    sensitivity: typing.Optional[SensitivityConfig] = None

    def params(self) -> TransportParams:
        try:
            iso = Isotherm(IsothermKind(self.isotherm), self.Da_a, self.Da_d, self.M)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return TransportParams(self.Pe, iso, self.tau, self.T_end)

    def validate(self):
        self.params()
        if self.sensitivity is not None:
            self.sensitivity.validate()


@dataclass
class StageConfig:
    box: typing.Any = AUTO  # [[lo, hi], [lo, hi]] or "AUTO"
    samples: int = 150
    strategy: str = "sobol"
    grid_shape: typing.Optional[list] = None
    T_cut: typing.Optional[float] = None

    def stage(self) -> Stage:
        box = self.box if self.box == AUTO else _box(self.box)
        shape = None if self.grid_shape is None else tuple(self.grid_shape)
        try:
            return Stage(box, self.samples, self.strategy, shape, self.T_cut)
        except ValueError as exc:
            raise ConfigError(f"invalid stage: {exc}") from None


@dataclass
class IdentificationConfig:
    box: list = field(default_factory=lambda: [[0.0, 0.01], [0.0, 0.1]])
    strategy: str = "grid"  # grid, sobol or multistage
    grid_shape: list = field(default_factory=lambda: [51, 51])
    n_samples: int = 150
    gamma: float = DEFAULT_GAMMA
    delta: list = field(default_factory=lambda: [0.01, 0.05])
    seeds: list = field(default_factory=lambda: [0])
    true_params: list = field(default_factory=lambda: [0.005, 0.05])
    stages: list = field(default_factory=list)
    T_cut: typing.Optional[float] = None
    measurement_csv: typing.Optional[str] = None

    def feasible_box(self) -> FeasibleBox:
        return _box(self.box)

    def plan(self) -> StagePlan:
        stages = [s.stage() for s in self.stages]
        if not stages:
            raise ConfigError("multistage identification needs identification.stages")
        try:
            return StagePlan(stages)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def validate(self, T_end: float):
        if self.strategy not in ("grid", "sobol", "multistage"):
            raise ConfigError(f"unknown identification.strategy {self.strategy!r}")
        self.feasible_box()
        if len(self.grid_shape) != 2 or min(self.grid_shape) < 2:
            raise ConfigError("identification.grid_shape needs two sizes >= 2")
        if self.n_samples < 1:
            raise ConfigError("identification.n_samples must be >= 1")
        if not self.gamma > 1:
            raise ConfigError("identification.gamma must exceed 1")
        if any(d < 0 for d in self.delta):
            raise ConfigError("identification.delta values must be non-negative")
        if not self.seeds:
            raise ConfigError("identification.seeds must not be empty")
        cuts = [self.T_cut] + [s.T_cut for s in self.stages]
        if any(c is not None and not 0 < c <= T_end for c in cuts):
            raise ConfigError("T_cut must lie in (0, T_end]")
        if self.strategy == "multistage":
            self.plan()


@dataclass
class ExperimentConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    mesh: MeshConfig = field(default_factory=MeshConfig)
    flow: FlowBCs = field(default_factory=FlowBCs)
    transport: TransportConfig = field(default_factory=TransportConfig)
    identification: IdentificationConfig = field(default_factory=IdentificationConfig)
    output_dir: str = "runs"
    workers: int = 1

    def validate(self) -> "ExperimentConfig":
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        self.mesh.validate()
        self.transport.validate()
        self.identification.validate(self.transport.T_end)
        return self

    def validate_geometry(self) -> None:
        # geometry errors keep their own exit code
        self.geometry.validate()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def checksum(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        return _build(cls, data, "config")


def _box(spec) -> FeasibleBox:
    try:
        (a0, a1), (d0, d1) = spec
        return FeasibleBox((float(a0), float(a1)), (float(d0), float(d1)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid box {spec!r}: {exc}") from None


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a JSON object")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        kwargs[name] = _coerce(hints[name], value, f"{where}.{name}")
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _coerce(hint, value, where):
    if value is None:
        return None
    origin = typing.get_origin(hint)
    if origin is typing.Union:
        inner = [a for a in typing.get_args(hint) if a is not type(None)]
        return _coerce(inner[0], value, where) if len(inner) == 1 else value
    if dataclasses.is_dataclass(hint):
        return _build(hint, value, where)
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        return float(value)
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
        return value
    if hint is str and not isinstance(value, str):
        raise ConfigError(f"{where} must be a string")
    if where.endswith(".delta") and not isinstance(value, list):
        return [float(value)]
    if where.endswith(".stages"):
        if not isinstance(value, list):
            raise ConfigError(f"{where} must be a list")
        return [_build(StageConfig, s, f"{where}[{i}]") for i, s in enumerate(value)]
    return value


def load_config(path=None) -> ExperimentConfig:
    """Read a JSON config; ``None`` gives the defaults."""
    if path is None:
        return ExperimentConfig().validate()
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    return ExperimentConfig.from_dict(data).validate()

