"""Experiment configuration: flat ``key = value`` files plus overrides."""
from __future__ import annotations

import dataclasses
import hashlib
import typing
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..population import CLIP_POLICIES, ReliabilitySpec
from ..iteration import CARRY_RULES, Variant

EXPERIMENTS = ("relative_error_vs_k", "error_vs_r", "series_moments", "custom_sweep")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "relative_error_vs_k"
    n_questions: int = 100
    n_users: int = 100
    r: int = 10
    s: int = 10
    iterations: int = 15
    replications: int = 50
    reliability_mean: float = 0.75
    # when set, the variance is derived so that (E(2p-1)^2)^2 equals it
    phi_squared: typing.Optional[float] = None
    reliability_variance: float = 0.0125
    clip_policy: str = "clip"
    variant: str = "raw"
    master_seed: int = 0
    output_path: str = "results"
    truth: str = "ones"
    init_mean: float = 1.0
    init_variance: float = 1.0
    resample_graph: bool = False
    resample_answers: bool = True
    tracked_edges: int = 5
    r_values: typing.Tuple[int, ...] = (2, 3, 4, 5, 6, 8, 10, 12, 15, 20)
    steady_tol: float = 1e-6
    steady_max_iterations: int = 50
    carry_rule: str = "user_mean"
    late_k: int = 0
    overflow_bound: float = 1e100
    sweep_key: str = ""
    sweep_values: typing.Tuple[str, ...] = ()

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        for name in ("n_questions", "n_users", "r", "s", "replications", "tracked_edges",
                     "steady_max_iterations"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.iterations < 0 or self.late_k < 0:
            raise ConfigError("iterations and late_k must be >= 0")
        try:
            variant = Variant(self.variant)
        except ValueError:
            raise ConfigError(f"unknown variant {self.variant!r}") from None
        if self.clip_policy not in CLIP_POLICIES:
            raise ConfigError(f"clip_policy must be one of {CLIP_POLICIES}")
        if self.truth not in ("ones", "random"):
            raise ConfigError("truth must be 'ones' or 'random'")
        if self.carry_rule not in CARRY_RULES:
            raise ConfigError(f"carry_rule must be one of {CARRY_RULES}")
        if (self.experiment == "series_moments") != (variant is Variant.SERIES):
            raise ConfigError("variant 'series' goes with experiment 'series_moments' and only it")
        if self.experiment != "error_vs_r" and self.r * self.n_questions != self.s * self.n_users:
            raise ConfigError(
                f"r*|Q| = {self.r * self.n_questions} differs from s*|U| = {self.s * self.n_users}")
        if self.experiment == "error_vs_r" and not self.r_values:
            raise ConfigError("r_values is empty")
        if self.experiment == "custom_sweep":
            if self.sweep_key not in _FIELD_TYPES or self.sweep_key in ("experiment", "sweep_key",
                                                                        "sweep_values"):
                raise ConfigError(f"sweep_key {self.sweep_key!r} is not a sweepable key")
            if not self.sweep_values:
                raise ConfigError("sweep_values is empty")
        try:
            self.reliability
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def reliability(self) -> ReliabilitySpec:
        if self.phi_squared is not None:
            return ReliabilitySpec.from_phi_squared(self.reliability_mean, self.phi_squared,
                                                    clip_policy=self.clip_policy)
        return ReliabilitySpec(self.reliability_mean, self.reliability_variance, self.clip_policy)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self, include_output: bool = True) -> str:
        lines = []
        for f in fields(self):
            if f.name == "output_path" and not include_output:
                continue
            if f.name == "reliability_variance" and self.phi_squared is not None:
                continue  # derived from phi_squared
            lines.append(f"{f.name} = {format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        """Hex digest over every key except ``output_path``."""
        return hashlib.sha256(self.to_text(include_output=False).encode()).hexdigest()[:16]


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_value(key: str, raw: str):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown key {key!r}")
    t = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if t == "int":
            return int(raw)
        if t == "float":
            return float(raw)
        if t == "bool":
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if t == "typing.Optional[float]":
            return None if raw.lower() in ("", "none") else float(raw)
        if t == "typing.Tuple[int, ...]":
            return tuple(int(x) for x in raw.split(",") if x.strip())
        if t == "typing.Tuple[str, ...]":
            return tuple(x.strip() for x in raw.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


def parse_lines(text: str) -> dict:
    out = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value', got {line!r}")
        key, value = (x.strip() for x in line.split("=", 1))
        if key in out:
            raise ConfigError(f"line {n}: {key} set twice")
        out[key] = value
    return out


def build_config(raw: dict, overrides: typing.Iterable[str] = ()) -> ExperimentConfig:
    """Resolve ``preset`` (if any), then file keys, then ``key=value`` overrides."""
    raw = dict(raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = (x.strip() for x in item.split("=", 1))
        raw[k] = v
    values: dict = {}
    preset = raw.pop("preset", None)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; see 'crowdbp presets list'")
        values.update(PRESETS[preset])
    parsed = {k: parse_value(k, v) for k, v in raw.items()}
    if "reliability_variance" in parsed and "phi_squared" not in parsed:
        values["phi_squared"] = None
    if "reliability_variance" in parsed and parsed.get("phi_squared") is not None:
        raise ConfigError("set either reliability_variance or phi_squared, not both")
    values.update(parsed)
    try:
        return ExperimentConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, overrides: typing.Iterable[str] = ()) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return build_config(parse_lines(text), overrides)


# Only the unreliable crowd's phi^2 = 0.008 is a fixed reference point; the
# two reliable crowds sit well above 1/81 with little clipping at [0, 1].
_RELERR = dict(experiment="relative_error_vs_k", variant="raw", iterations=15, replications=50)
_RSWEEP = dict(experiment="error_vs_r", variant="normalized", replications=50)
_SERIES = dict(experiment="series_moments", variant="series", iterations=8, replications=500)
_UNRELIABLE = dict(reliability_mean=0.5, phi_squared=0.008)
_RELIABLE_LOW = dict(reliability_mean=0.75, phi_squared=0.09)
_RELIABLE_HIGH = dict(reliability_mean=0.85, phi_squared=0.25)

PRESETS: dict[str, dict] = {
    "relerr_unreliable": {**_RELERR, **_UNRELIABLE},
    "relerr_reliable_low": {**_RELERR, **_RELIABLE_LOW},
    "relerr_reliable_high": {**_RELERR, **_RELIABLE_HIGH},
    "rsweep_reliable_low": {**_RSWEEP, **_RELIABLE_LOW},
    "rsweep_reliable_high": {**_RSWEEP, **_RELIABLE_HIGH},
    "series_unreliable": {**_SERIES, **_UNRELIABLE},
    "series_reliable_low": {**_SERIES, **_RELIABLE_LOW},
    "series_reliable_high": {**_SERIES, **_RELIABLE_HIGH},
}


def preset(name: str, **changes) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}")
    return ExperimentConfig(**{**PRESETS[name], **changes})
