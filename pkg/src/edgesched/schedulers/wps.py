"""
Baseline scheduler working directly on raw workloads.

Every query is an overlapping-range search: core demand is recomputed from
all allocations of a device and transfers are packed exactly on the link.
It is exact where RAS is conservative, which makes it the feasibility
oracle for RAS, and slower, which is the point of the comparison.
"""

from __future__ import annotations

import bisect
import itertools
from typing import Dict, List, Optional, Sequence, Tuple

from ..model import (
    Allocation,
    ConfigKind,
    Priority,
    Task,
    TaskConfig,
    TimeWindow,
    core_usage_peak,
    windows_overlap,
)
from .base import (
    BaseScheduler,
    LpRequest,
    Outcome,
    Placement,
    PreemptionRequest,
    SchedulerDecision,
    timed,
)

EPS = 1e-9


def earliest_start(workload: Sequence[Allocation], total_cores: int, cores: int,
                   earliest: float, duration: float, deadline: float) -> Optional[float]:
    """Earliest ``s >= earliest`` such that ``cores`` more fit over ``[s, s+duration)``."""
    candidates = sorted({earliest} | {a.processing_window.t2 for a in workload
                                      if a.processing_window.t2 > earliest})
    for s in candidates:
        if s + duration > deadline + EPS:
            return None
        if core_usage_peak(workload, TimeWindow(s, s + duration)) + cores <= total_cores:
            return s
    return None


def earliest_gap(transfers: Sequence[Tuple[float, float]], earliest: float,
                 duration: float) -> float:
    cand = earliest
    for s, e in transfers:
        if s >= cand + duration - EPS:
            break
        if e > cand + EPS:
            cand = e
    return cand


class WPScheduler(BaseScheduler):
    name = "WPS"

    def __init__(self, device_ids: Sequence[int], **kwargs):
        kwargs.pop("horizon", None)
        kwargs.pop("n_exp", None)
        kwargs.pop("executor", None)
        super().__init__(device_ids, **kwargs)
        self.transfers: List[Tuple[float, float, int]] = []

    def _released(self, alloc: Allocation) -> None:
        if alloc.comm is not None:
            self.transfers = [t for t in self.transfers if t[2] != alloc.task_id]

    def prune(self, now: float) -> None:
        self.transfers = [t for t in self.transfers if t[1] > now]

    def _commit(self, placements: List[Placement], cfg: TaskConfig) -> List[Allocation]:
        allocs = []
        for p in placements:
            alloc = self.make_allocation(p, cfg, self.D)
            if p.comm is not None:
                bisect.insort(self.transfers, (p.comm[1], p.comm[1] + self.D, p.task.id))
            self.workload[p.device].append(alloc)
            p.task.config = cfg
            allocs.append(alloc)
        return allocs

    def _fits(self, device: int, window: TimeWindow, cores: int,
              extra: Sequence[Allocation] = ()) -> bool:
        load = list(self.workload[device]) + list(extra)
        return core_usage_peak(load, window) + cores <= self.total_cores

    @timed
    def schedule_high_priority(self, task: Task, now: float) -> SchedulerDecision:
        assert task.priority is Priority.HIGH
        cfg = self.configs[ConfigKind.HIGH_PRIORITY]
        window = self._hp_window(task, now)
        if window.t2 > task.deadline:
            return SchedulerDecision(Outcome.REJECTED, reason="deadline")
        if not self._fits(task.source_device, window, cfg.cores):
            req = PreemptionRequest(task.source_device, window, task)
            return SchedulerDecision(Outcome.PREEMPTION_ISSUED, preemption=req)
        allocs = self._commit([Placement(task, task.source_device, window)], cfg)
        return SchedulerDecision(Outcome.ALLOCATED, allocs)

    # ------------------------------------------------------------------- LP

    def _evaluate(self, tasks: List[Task], sequence: Sequence[int], source: int, now: float,
                  cfg: TaskConfig, deadline: float, stack: bool = True) -> Optional[List[Placement]]:
        """Place tasks one by one on the devices named by ``sequence``.

        With ``stack`` off a task may not queue behind another task of the
        same request on one device, which is the shape RAS produces.
        """
        D = self.D
        dur = cfg.effective_duration
        extra: Dict[int, List[Allocation]] = {d: [] for d in self.device_ids}
        transfers = [(s, e) for s, e, _ in self.transfers]
        placements = []
        for task, dev in zip(tasks, sequence):
            comm = None
            arrival = now
            if dev != source:
                start = earliest_gap(transfers, now, D)
                arrival = start + D
                comm = (-1, start)
            s = earliest_start(self.workload[dev] + extra[dev], self.total_cores, cfg.cores,
                               arrival, dur, deadline)
            if s is None:
                return None
            if not stack and any(s >= a.processing_window.t2 - EPS for a in extra[dev]):
                return None
            if comm is not None:
                bisect.insort(transfers, (comm[1], comm[1] + D))
            window = TimeWindow(s, s + dur)
            extra[dev].append(Allocation(task.id, dev, cfg.cores, window, cfg.kind, deadline,
                                         Priority.LOW, source))
            placements.append(Placement(task, dev, window, comm))
        return placements

    def _greedy(self, req: LpRequest, now: float, cfg: TaskConfig,
                remotes: List[int]) -> Optional[List[Placement]]:
        tasks = list(req.tasks)
        sequence: List[int] = []
        # as many as possible on the source device, then one per remote in turn
        for k in range(len(tasks), -1, -1):
            if k == 0 or self._evaluate(tasks[:k], [req.source] * k, req.source, now, cfg,
                                        req.deadline, stack=False) is not None:
                sequence = [req.source] * k
                break
        live = list(remotes)
        while len(sequence) < len(tasks) and live:
            for d in list(live):
                if len(sequence) == len(tasks):
                    break
                trial = sequence + [d]
                if self._evaluate(tasks[:len(trial)], trial, req.source, now, cfg,
                                  req.deadline, stack=False) is not None:
                    sequence = trial
                else:
                    live.remove(d)
        if len(sequence) < len(tasks):
            return None
        return self._evaluate(tasks, sequence, req.source, now, cfg, req.deadline)

    def _capacity_bound(self, req: LpRequest, now: float, cfg: TaskConfig) -> int:
        """Upper bound on how many tasks the network could take at all."""
        total = 0
        n = len(req.tasks)
        first_arrival = earliest_gap([(s, e) for s, e, _ in self.transfers], now, self.D) + self.D
        for d in self.device_ids:
            arrival = now if d == req.source else first_arrival
            extra: List[Allocation] = []
            for _ in range(n):
                s = earliest_start(self.workload[d] + extra, self.total_cores, cfg.cores,
                                   arrival, cfg.effective_duration, req.deadline)
                if s is None:
                    break
                extra.append(Allocation(-1, d, cfg.cores,
                                        TimeWindow(s, s + cfg.effective_duration), cfg.kind,
                                        req.deadline, Priority.LOW, req.source))
            total += len(extra)
            if total >= n:
                break
        return total

    def _place_lp(self, req: LpRequest, now: float, cfg: TaskConfig) -> Optional[List[Placement]]:
        remotes = self.remote_order(req.source)
        found = self._greedy(req, now, cfg, remotes)
        if found is not None:
            return found
        n = len(req.tasks)
        if self._capacity_bound(req, now, cfg) < n:
            return None
        # exhaustive: every local count, every ordered choice of remote hosts
        for k in range(n, -1, -1):
            for rest in itertools.product(remotes, repeat=n - k):
                seq = [req.source] * k + list(rest)
                found = self._evaluate(list(req.tasks), seq, req.source, now, cfg, req.deadline)
                if found is not None:
                    return found
        return None

    @timed
    def schedule_low_priority(self, req: LpRequest, now: float) -> SchedulerDecision:
        configs = self.viable_configs(now, req.deadline)
        if not configs:
            return SchedulerDecision(Outcome.REJECTED, reason="deadline")
        for cfg in configs:
            placements = self._place_lp(req, now, cfg)
            if placements is not None:
                return SchedulerDecision(Outcome.ALLOCATED, self._commit(placements, cfg))
        return SchedulerDecision(Outcome.REJECTED, reason="capacity")

    @timed
    def preempt(self, req: PreemptionRequest, now: float) -> Tuple[List[Allocation], SchedulerDecision]:
        cfg = self.configs[ConfigKind.HIGH_PRIORITY]
        task, dev = req.task, req.device
        window = req.window
        if window.t1 < now:
            window = self._hp_window(task, now)
        if window.t2 > task.deadline:
            return [], SchedulerDecision(Outcome.REJECTED, reason="deadline")
        workload = self.workload[dev]
        candidates = self.victim_order([
            a for a in workload
            if a.priority is Priority.LOW and windows_overlap(a.processing_window, window)
        ])
        if not candidates:
            return [], SchedulerDecision(Outcome.REJECTED, reason="no-victim")
        victims = []
        for victim in candidates:
            victims.append(victim)
            remaining = [a for a in workload if a not in victims]
            if core_usage_peak(remaining, window) + cfg.cores <= self.total_cores:
                break
        else:
            return [], SchedulerDecision(Outcome.REJECTED, reason="no-room")
        self.workload[dev] = remaining
        for v in victims:
            self._released(v)
        allocs = self._commit([Placement(task, dev, window)], cfg)
        return victims, SchedulerDecision(Outcome.ALLOCATED, allocs, victims=victims)
