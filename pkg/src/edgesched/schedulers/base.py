"""Request/decision records and the plumbing both schedulers share."""

from __future__ import annotations

import enum
import itertools
import random
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from ..model import (
    Allocation,
    CommReservation,
    ConfigKind,
    ModelError,
    Priority,
    Task,
    TaskConfig,
    TimeWindow,
    default_configs,
)
from ..netlink import BandwidthEstimate, compute_D, update_bandwidth

LP_PREFERENCE = (ConfigKind.LOW_PRIORITY_2CORE, ConfigKind.LOW_PRIORITY_4CORE)

_request_ids = itertools.count()


class Outcome(enum.Enum):
    ALLOCATED = "Allocated"
    REJECTED = "Rejected"
    PREEMPTION_ISSUED = "PreemptionIssued"


@dataclass
class LpRequest:
    source: int
    tasks: List[Task]
    issue_time: float
    realloc: bool = False
    id: int = field(default_factory=lambda: next(_request_ids))

    def __post_init__(self):
        if not 1 <= len(self.tasks) <= 4:
            raise ModelError(f"an LP request carries 1..4 tasks, got {len(self.tasks)}")
        if any(t.priority is not Priority.LOW for t in self.tasks):
            raise ModelError("LP request with a high-priority task")
        if len({t.deadline for t in self.tasks}) != 1:
            raise ModelError("tasks of one LP request share a deadline")

    @property
    def deadline(self) -> float:
        return self.tasks[0].deadline


@dataclass
class PreemptionRequest:
    device: int
    window: TimeWindow
    task: Task
    id: int = field(default_factory=lambda: next(_request_ids))


@dataclass
class SchedulerDecision:
    outcome: Outcome
    allocations: List[Allocation] = field(default_factory=list)
    latency: float = 0.0
    preemption: Optional[PreemptionRequest] = None
    victims: List[Allocation] = field(default_factory=list)
    reason: str = ""

    def __post_init__(self):
        if self.outcome is Outcome.ALLOCATED and not self.allocations:
            raise ModelError("an Allocated decision needs at least one allocation")

    @property
    def accepted(self) -> bool:
        return self.outcome is Outcome.ALLOCATED


@dataclass
class Placement:
    """A provisional assignment produced before commit."""

    task: Task
    device: int
    window: TimeWindow
    comm: Optional[Tuple[int, float]] = None  # (bucket index, transfer start)


def timed(fn):
    def wrapper(self, *args, **kwargs):
        t0 = time.perf_counter()
        decision = fn(self, *args, **kwargs)
        latency = time.perf_counter() - t0
        if isinstance(decision, tuple):
            decision[-1].latency = latency
        else:
            decision.latency = latency
        return decision

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


class BaseScheduler:
    """Device/workload bookkeeping common to RAS and WPS."""

    name = "base"

    def __init__(self, device_ids: Sequence[int], configs: Optional[Dict[ConfigKind, TaskConfig]] = None,
                 total_cores: int = 4, bandwidth: float = 20e6, image_bits: float = 519168 * 8,
                 alpha: float = 0.3, seed: Optional[int] = 0, now: float = 0.0):
        self.device_ids = list(device_ids)
        self.configs = configs or default_configs()
        self.total_cores = total_cores
        self.image_bits = image_bits
        self.estimate = BandwidthEstimate(bandwidth, alpha, now)
        self.rng = random.Random(seed)
        self.workload: Dict[int, List[Allocation]] = {d: [] for d in self.device_ids}
        self._seq = itertools.count()

    @property
    def D(self) -> float:
        return compute_D(self.image_bits, self.estimate.value)

    def viable_configs(self, now: float, deadline: float) -> List[TaskConfig]:
        # best case: local placement, no transfer
        return [self.configs[k] for k in LP_PREFERENCE
                if now + self.configs[k].effective_duration <= deadline]

    def remote_order(self, source: int) -> List[int]:
        others = [d for d in self.device_ids if d != source]
        self.rng.shuffle(others)
        return others

    def make_allocation(self, p: Placement, cfg: TaskConfig, comm_duration: float) -> Allocation:
        comm = None
        if p.comm is not None:
            comm = CommReservation(p.comm[0], p.comm[1], comm_duration)
        return Allocation(
            task_id=p.task.id, device=p.device, cores=cfg.cores,
            processing_window=p.window, kind=cfg.kind, deadline=p.task.deadline,
            priority=p.task.priority, source_device=p.task.source_device, comm=comm,
            seq=next(self._seq),
        )

    def allocations(self) -> List[Allocation]:
        return [a for d in self.device_ids for a in self.workload[d]]

    def find_allocation(self, task_id: int) -> Optional[Allocation]:
        for a in self.allocations():
            if a.task_id == task_id:
                return a
        return None

    def release(self, task_id: int) -> Optional[Allocation]:
        """Forget a finished, failed or cancelled task's reservation."""
        for d in self.device_ids:
            for i, a in enumerate(self.workload[d]):
                if a.task_id == task_id:
                    del self.workload[d][i]
                    self._released(a)
                    return a
        return None

    def _released(self, alloc: Allocation) -> None:
        pass

    def update_bandwidth(self, samples: Sequence[float], now: float):
        self.estimate = update_bandwidth(self.estimate, samples, now)
        return self._bandwidth_changed(now)

    def _bandwidth_changed(self, now: float):
        return None

    def _hp_window(self, task: Task, now: float) -> TimeWindow:
        cfg = self.configs[ConfigKind.HIGH_PRIORITY]
        return TimeWindow(now, now + cfg.effective_duration)

    @staticmethod
    def victim_order(candidates: List[Allocation]) -> List[Allocation]:
        # farthest deadline first; later allocation wins ties
        return sorted(candidates, key=lambda a: (-a.deadline, -a.seq))
