"""Run configuration: the flat key/value file and its defaults."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

from ..model import DEFAULT_FRAME_PERIOD, ModelError

DUTY_CYCLES = (0.0, 0.25, 0.5, 0.75)

# Per-call controller latency in seconds, used instead of host wall-clock
# time so runs are reproducible. RAS: HP allocation under 15 ms, pre-emption
# at most 100 ms, LP initial allocation under 6 ms, reallocation 10-17 ms.
# WPS: HP under 15 ms, pre-emption at least 250 ms, LP initial 140-205 ms,
# reallocation about 10 ms above its initial allocation.
LATENCY_TABLES: Dict[str, Dict[str, float]] = {
    "RAS": {"hp": 0.010, "preempt": 0.100, "lp": 0.006, "realloc": 0.014, "link_rebuild": 1.0},
    "WPS": {"hp": 0.014, "preempt": 0.250, "lp": 0.170, "realloc": 0.180, "link_rebuild": 0.0},
}


class ConfigError(ModelError):
    pass


@dataclass
class SimConfig:
    trace: str = ""
    scheduler: str = "RAS"
    frame_period_s: float = DEFAULT_FRAME_PERIOD
    bw_interval_s: float = 30.0
    duty_cycle: float = 0.0
    nominal_bw_bps: float = 20e6
    probe_count: int = 10
    probe_bytes: int = 1400
    traffic_bytes: int = 1024
    seed: int = 0
    duration_s: Optional[float] = None
    # knobs the experiments leave at their defaults
    image_bytes: int = 416 * 416 * 3
    traffic_fps: float = 1950.0
    deadline_periods: float = 2.0
    hp_slack_s: float = 0.5
    padding_s: float = 0.0
    latency_mode: str = "table"
    alpha: float = 0.3
    n_exp: int = 16
    horizon_periods: float = 10.0
    probe_jitter: float = 0.05
    latency_table: Dict[str, float] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.scheduler.upper() not in LATENCY_TABLES:
            raise ConfigError(f"scheduler must be RAS or WPS, got {self.scheduler!r}")
        self.scheduler = self.scheduler.upper()
        for name in ("frame_period_s", "bw_interval_s", "nominal_bw_bps", "image_bytes",
                     "deadline_periods", "horizon_periods"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("probe_count", "probe_bytes", "traffic_bytes"):
            if int(getattr(self, name)) <= 0:
                raise ConfigError(f"{name} must be a positive integer")
        if not 0 <= self.duty_cycle < 1:
            raise ConfigError("duty_cycle must be in [0, 1)")
        if self.duration_s is not None and self.duration_s <= 0:
            raise ConfigError("duration_s must be positive")
        if self.latency_mode not in ("table", "measured"):
            raise ConfigError("latency_mode is 'table' or 'measured'")
        if self.hp_slack_s < 0 or self.padding_s < 0 or self.traffic_fps < 0:
            raise ConfigError("slack, padding and traffic rate must be non-negative")
        if not 0 < self.alpha <= 1:
            raise ConfigError("alpha must be in (0, 1]")

    @property
    def congestion_load(self) -> float:
        """Fraction of the link the background bursts take while on."""
        load = self.traffic_bytes * 8 * self.traffic_fps / self.nominal_bw_bps
        return min(load, 0.95)

    def latencies(self) -> Dict[str, float]:
        table = dict(LATENCY_TABLES[self.scheduler])
        table.update(self.latency_table)
        return table

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            if f.name == "latency_table":
                continue
            value = getattr(self, f.name)
            if value is None:
                continue
            lines.append(f"{f.name}={value}")
        return "\n".join(lines) + "\n"


_FIELDS = {f.name: f for f in dataclasses.fields(SimConfig) if f.name != "latency_table"}


def coerce(key: str, raw) -> object:
    if key not in _FIELDS:
        raise ConfigError(f"unknown configuration key {key!r}")
    default = _FIELDS[key].default
    if raw is None or isinstance(raw, (int, float)) and not isinstance(raw, bool):
        if key in ("probe_count", "probe_bytes", "traffic_bytes", "seed", "image_bytes",
                   "n_exp") and raw is not None:
            return int(raw)
        return raw
    raw = str(raw).strip()
    try:
        if key in ("trace", "scheduler", "latency_mode"):
            return raw
        if key == "duration_s":
            return None if raw.lower() in ("", "none") else float(raw)
        if isinstance(default, int) and not isinstance(default, bool):
            return int(raw)
        return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_config(text: str, **overrides) -> SimConfig:
    """``key=value`` per line, ``#`` comments; ``overrides`` win over the file."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, value = (p.strip() for p in line.split("=", 1))
        values[key] = coerce(key, value)
    for key, value in overrides.items():
        if value is not None:
            values[key] = coerce(key, value)
    return SimConfig(**values)


def load_config(path, **overrides) -> SimConfig:
    cfg = parse_config(Path(path).read_text(), **overrides)
    if cfg.trace and not Path(cfg.trace).is_absolute():
        candidate = Path(path).parent / cfg.trace
        if candidate.exists():
            cfg.trace = str(candidate)
    return cfg
