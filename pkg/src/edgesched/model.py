"""
Domain types shared by the availability model, the network link, the
schedulers and the simulator.

All times are seconds as floats. Windows are half-open ``[t1, t2)`` so two
reservations that merely touch never conflict.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

DEFAULT_FRAME_PERIOD = 18.86
DEFAULT_TOTAL_CORES = 4
N_DEVICES = 4

HP_DURATION = 0.98
LP2_DURATION = 16.862
LP4_DURATION = 11.611


class ModelError(ValueError):
    """Raised for invalid domain values (bad windows, configs, traces)."""


@dataclass(frozen=True, order=True)
class TimeWindow:
    t1: float
    t2: float

    def __post_init__(self):
        if not self.t1 < self.t2:
            raise ModelError(f"invalid window [{self.t1}, {self.t2})")

    def duration(self) -> float:
        return self.t2 - self.t1

    def __repr__(self) -> str:
        return f"[{self.t1:g}, {self.t2:g})"


def window_contains(outer: TimeWindow, inner: TimeWindow) -> bool:
    return outer.t1 <= inner.t1 and inner.t2 <= outer.t2


def windows_overlap(a: TimeWindow, b: TimeWindow) -> bool:
    return a.t1 < b.t2 and b.t1 < a.t2


def frame_period(override: Optional[float] = None) -> float:
    """Inter-frame interval of the conveyor belt, 18.86 s unless overridden."""
    if override is None:
        return DEFAULT_FRAME_PERIOD
    if override <= 0:
        raise ModelError(f"frame period must be positive, got {override}")
    return float(override)


class ConfigKind(enum.Enum):
    HIGH_PRIORITY = "hp"
    LOW_PRIORITY_2CORE = "lp2"
    LOW_PRIORITY_4CORE = "lp4"


_PROFILES = {
    ConfigKind.HIGH_PRIORITY: (1, HP_DURATION),
    ConfigKind.LOW_PRIORITY_2CORE: (2, LP2_DURATION),
    ConfigKind.LOW_PRIORITY_4CORE: (4, LP4_DURATION),
}


@dataclass(frozen=True)
class TaskConfig:
    kind: ConfigKind
    cores: int
    duration: float
    padding: float = 0.0

    def __post_init__(self):
        cores, duration = _PROFILES[self.kind]
        if self.cores != cores or self.duration != duration:
            raise ModelError(f"{self.kind.name} requires {cores} cores / {duration}s")
        if self.padding < 0:
            raise ModelError("padding must be non-negative")

    @classmethod
    def of(cls, kind: ConfigKind, padding: float = 0.0) -> "TaskConfig":
        cores, duration = _PROFILES[kind]
        return cls(kind, cores, duration, padding)

    @property
    def effective_duration(self) -> float:
        return self.duration + self.padding


def default_configs(padding: Optional[dict] = None) -> dict:
    """One TaskConfig per kind; ``padding`` maps kind -> seconds."""
    padding = padding or {}
    return {k: TaskConfig.of(k, padding.get(k, 0.0)) for k in ConfigKind}


class Priority(enum.Enum):
    HIGH = "high"
    LOW = "low"


class TaskState(enum.Enum):
    PENDING = "Pending"
    ALLOCATED = "Allocated"
    RUNNING = "Running"
    COMPLETED = "Completed"
    PREEMPTED = "Preempted"
    VIOLATED_DEADLINE = "ViolatedDeadline"
    REJECTED = "Rejected"


TERMINAL_STATES = frozenset(
    {TaskState.COMPLETED, TaskState.REJECTED, TaskState.VIOLATED_DEADLINE}
)

# Rejection straight from Pending, pre-emption of a not-yet-started
# reservation and a missed reservation (late input) are needed by the
# simulator on top of the nominal lifecycle.
TRANSITIONS = {
    TaskState.PENDING: {TaskState.ALLOCATED, TaskState.REJECTED},
    TaskState.ALLOCATED: {
        TaskState.RUNNING,
        TaskState.PREEMPTED,
        TaskState.VIOLATED_DEADLINE,
    },
    TaskState.RUNNING: {TaskState.COMPLETED, TaskState.PREEMPTED},
    TaskState.PREEMPTED: {
        TaskState.ALLOCATED,
        TaskState.REJECTED,
        TaskState.VIOLATED_DEADLINE,
    },
    TaskState.COMPLETED: set(),
    TaskState.VIOLATED_DEADLINE: set(),
    TaskState.REJECTED: set(),
}


class IllegalTransition(RuntimeError):
    pass


_task_ids = itertools.count()


@dataclass(eq=False)
class Task:
    source_device: int
    priority: Priority
    deadline: float
    config: Optional[TaskConfig] = None
    id: int = field(default_factory=lambda: next(_task_ids))
    frame: Optional[int] = None
    state: TaskState = TaskState.PENDING
    input_bytes: int = 0
    preempted: bool = False

    def transition(self, new_state: TaskState) -> None:
        if new_state not in TRANSITIONS[self.state]:
            raise IllegalTransition(f"task {self.id}: {self.state.value} -> {new_state.value}")
        if new_state is TaskState.PREEMPTED:
            self.preempted = True
        self.state = new_state

    @property
    def terminal(self) -> bool:
        return self.state in TERMINAL_STATES

    def __repr__(self) -> str:
        return f"Task({self.id}, {self.priority.value}, dev={self.source_device}, {self.state.value})"


@dataclass(frozen=True)
class CommReservation:
    bucket: int
    start: float
    duration: float

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class Allocation:
    task_id: int
    device: int
    cores: int
    processing_window: TimeWindow
    kind: ConfigKind
    deadline: float
    priority: Priority
    source_device: int
    comm: Optional[CommReservation] = None
    seq: int = 0

    @property
    def remote(self) -> bool:
        return self.device != self.source_device


@dataclass
class Device:
    id: int
    total_cores: int = DEFAULT_TOTAL_CORES
    active_workload: List[Allocation] = field(default_factory=list)


def core_usage_peak(allocations: Iterable[Allocation], window: Optional[TimeWindow] = None) -> int:
    """Maximum simultaneous core demand, by sweeping allocation boundaries."""
    points = []
    for a in allocations:
        w = a.processing_window
        if window is not None and not windows_overlap(w, window):
            continue
        lo, hi = w.t1, w.t2
        if window is not None:
            lo, hi = max(lo, window.t1), min(hi, window.t2)
        points.append((lo, a.cores))
        points.append((hi, -a.cores))
    # releases sort before acquisitions at the same instant (half-open)
    points.sort(key=lambda p: (p[0], p[1]))
    peak = used = 0
    for _, delta in points:
        used += delta
        peak = max(peak, used)
    return peak


# --------------------------------------------------------------------- traces

TRACE_VALUES = frozenset({-1, 0, 1, 2, 3, 4})


@dataclass(frozen=True)
class TraceEntry:
    frame: int
    per_device: tuple

    def __post_init__(self):
        bad = [v for v in self.per_device if v not in TRACE_VALUES]
        if bad:
            raise ModelError(f"frame {self.frame}: values {bad} outside -1..4")


def parse_trace(lines: Iterable[str], n_devices: int = N_DEVICES) -> List[TraceEntry]:
    entries = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            values = tuple(int(v) for v in line.split(","))
        except ValueError:
            raise ModelError(f"line {lineno}: not a list of integers: {line!r}") from None
        if len(values) != n_devices:
            raise ModelError(f"line {lineno}: expected {n_devices} values, got {len(values)}")
        try:
            entries.append(TraceEntry(len(entries), values))
        except ModelError as exc:
            raise ModelError(f"line {lineno}: {exc}") from None
    return entries


def load_trace(path, n_devices: int = N_DEVICES) -> List[TraceEntry]:
    with open(path) as fh:
        return parse_trace(fh, n_devices)


def format_trace(entries: Sequence[TraceEntry], header: Optional[str] = None) -> str:
    out = []
    if header:
        out.extend(f"# {h}" for h in header.splitlines())
    out.extend(",".join(str(v) for v in e.per_device) for e in entries)
    return "\n".join(out) + "\n"


@dataclass
class Frame:
    """One device's sample of the belt: an HP task and 0..4 LP tasks."""

    index: int
    device: int
    spawn_time: float
    hp_task: Task
    lp_tasks: List[Task] = field(default_factory=list)

    @property
    def completed(self) -> bool:
        return self.hp_task.state is TaskState.COMPLETED and all(
            t.state is TaskState.COMPLETED for t in self.lp_tasks
        )
