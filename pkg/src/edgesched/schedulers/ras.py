"""Resource Availability Scheduler: availability windows plus discretised link."""

from __future__ import annotations

from concurrent.futures import Executor
from typing import Dict, List, Optional, Sequence, Tuple

from ..availability import DeviceAvailability, find_window, fitting_windows, rebuild
from ..model import (
    Allocation,
    ConfigKind,
    Priority,
    Task,
    TaskConfig,
    TimeWindow,
    windows_overlap,
)
from ..netlink import (
    CascadeResult,
    build_link,
    cascade,
    find_comm_slot,
    reserve,
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


class RAScheduler(BaseScheduler):
    name = "RAS"

    def __init__(self, device_ids: Sequence[int], *, horizon: float = 188.6, n_exp: int = 16,
                 executor: Optional[Executor] = None, **kwargs):
        now = kwargs.get("now", 0.0)
        super().__init__(device_ids, **kwargs)
        self.horizon_len = horizon
        self.n_exp = n_exp
        self.executor = executor
        span = TimeWindow(now, now + horizon)
        self.availability: Dict[int, DeviceAvailability] = {
            d: DeviceAvailability(d, self.configs, span, self.total_cores) for d in self.device_ids
        }
        self.link = build_link(now, self.D, n_exp=n_exp)

    # ------------------------------------------------------------ housekeeping

    def ensure_horizon(self, until: float) -> None:
        for av in self.availability.values():
            if av.horizon.t2 < until:
                av.extend_horizon(until + self.horizon_len)

    def prune(self, now: float) -> None:
        for av in self.availability.values():
            av.prune(now)
        self.link.prune(now)

    def _released(self, alloc: Allocation) -> None:
        # the availability lists cannot take capacity back; only the link can
        if alloc.comm is not None:
            self.link.release(alloc.task_id)

    def _bandwidth_changed(self, now: float) -> CascadeResult:
        new = build_link(now, self.D, n_exp=self.n_exp)
        result = cascade(self.link, new)
        self.link = result.link
        return result

    def _commit(self, placements: List[Placement], cfg: TaskConfig) -> List[Allocation]:
        allocs = []
        for p in placements:
            alloc = self.make_allocation(p, cfg, self.D)
            if p.comm is not None:
                reserve(self.link, p.comm[0], p.task.id, p.comm[1], self.D)
            self.workload[p.device].append(alloc)
            self.availability[p.device].record_allocation(p.window, cfg.cores)
            p.task.config = cfg
            allocs.append(alloc)
        return allocs

    # -------------------------------------------------------------- algorithms

    @timed
    def schedule_high_priority(self, task: Task, now: float) -> SchedulerDecision:
        assert task.priority is Priority.HIGH
        cfg = self.configs[ConfigKind.HIGH_PRIORITY]
        window = self._hp_window(task, now)
        if window.t2 > task.deadline:
            return SchedulerDecision(Outcome.REJECTED, reason="deadline")
        self.ensure_horizon(window.t2)
        hit = find_window(self.availability[task.source_device][cfg.kind], window)
        if hit is None:
            req = PreemptionRequest(task.source_device, window, task)
            return SchedulerDecision(Outcome.PREEMPTION_ISSUED, preemption=req)
        allocs = self._commit([Placement(task, task.source_device, window)], cfg)
        return SchedulerDecision(Outcome.ALLOCATED, allocs)

    def _provisional_slots(self, now: float, n: int) -> List[Tuple[int, float]]:
        """Up to ``n`` distinct link slots; nothing stays reserved afterwards."""
        slots, tmp_ids = [], []
        try:
            for i in range(n):
                hit = find_comm_slot(self.link, now)
                if hit is None:
                    break
                tid = -(i + 1)
                reserve(self.link, hit[0], tid, hit[1])
                tmp_ids.append(tid)
                slots.append(hit)
        finally:
            for tid in tmp_ids:
                self.link.release(tid)
        return slots

    def _query_device(self, device: int, kind: ConfigKind, earliest: float, deadline: float,
                      duration: float):
        lst = self.availability[device][kind]
        found = list(fitting_windows(lst, earliest, duration, deadline))
        found.sort(key=lambda wp: (wp[1].t1, wp[0].track))
        return device, found

    def _place_lp(self, req: LpRequest, now: float, cfg: TaskConfig) -> Optional[List[Placement]]:
        n = len(req.tasks)
        deadline = req.deadline
        dur = cfg.effective_duration
        slots = self._provisional_slots(now, n)
        D = self.D
        queries = [(req.source, now)]
        if slots:
            first_arrival = slots[0][1] + D
            queries += [(d, first_arrival) for d in self.device_ids if d != req.source]
        if self.executor is not None:
            futures = [self.executor.submit(self._query_device, d, cfg.kind, e, deadline, dur)
                       for d, e in queries]
            results = dict(f.result() for f in futures)
        else:
            results = dict(self._query_device(d, cfg.kind, e, deadline, dur) for d, e in queries)
        if sum(len(v) for v in results.values()) < n:
            return None

        placements = []
        tasks = list(req.tasks)
        for _, window in results[req.source]:
            if not tasks:
                break
            placements.append(Placement(tasks.pop(0), req.source, window))
        if not tasks:
            return placements

        queues = {d: list(results.get(d, [])) for d in self.remote_order(req.source)}
        slot_iter = iter(slots)
        slot = next(slot_iter, None)
        while tasks and slot is not None and any(queues.values()):
            for d, q in queues.items():
                if not tasks or slot is None:
                    break
                while q:
                    aw, _ = q.pop(0)
                    start = max(aw.window.t1, slot[1] + D)
                    if start + dur <= min(aw.window.t2, deadline) + 1e-9:
                        end = min(start + dur, aw.window.t2)
                        placements.append(Placement(tasks.pop(0), d, TimeWindow(start, end), slot))
                        slot = next(slot_iter, None)
                        break
        if tasks:
            return None
        return placements

    @timed
    def schedule_low_priority(self, req: LpRequest, now: float) -> SchedulerDecision:
        configs = self.viable_configs(now, req.deadline)
        if not configs:
            return SchedulerDecision(Outcome.REJECTED, reason="deadline")
        self.ensure_horizon(req.deadline)
        for cfg in configs:
            placements = self._place_lp(req, now, cfg)
            if placements is not None:
                return SchedulerDecision(Outcome.ALLOCATED, self._commit(placements, cfg))
        return SchedulerDecision(Outcome.REJECTED, reason="capacity")

    @timed
    def preempt(self, req: PreemptionRequest, now: float) -> Tuple[List[Allocation], SchedulerDecision]:
        """Evict farthest-deadline LP work overlapping the HP window until it fits.

        Every trial rebuilds the device's lists from the surviving workload.
        Nothing changes if no set of overlapping LP tasks makes room.
        """
        cfg = self.configs[ConfigKind.HIGH_PRIORITY]
        task, dev = req.task, req.device
        window = req.window
        if window.t1 < now:
            window = self._hp_window(task, now)
        if window.t2 > task.deadline:
            return [], SchedulerDecision(Outcome.REJECTED, reason="deadline")
        self.ensure_horizon(window.t2)
        workload = self.workload[dev]
        candidates = self.victim_order([
            a for a in workload
            if a.priority is Priority.LOW and windows_overlap(a.processing_window, window)
        ])
        if not candidates:
            return [], SchedulerDecision(Outcome.REJECTED, reason="no-victim")
        av = self.availability[dev]
        horizon = TimeWindow(min(now, av.horizon.t2 - 1e-6), av.horizon.t2)
        victims = []
        for victim in candidates:
            victims.append(victim)
            remaining = [a for a in workload if a not in victims]
            trial = rebuild(dev, self.configs, remaining, horizon, self.total_cores)
            if find_window(trial[cfg.kind], window) is not None:
                break
        else:
            return [], SchedulerDecision(Outcome.REJECTED, reason="no-room")
        self.workload[dev] = remaining
        for v in victims:
            self._released(v)
        av.horizon, av.lists = trial.horizon, trial.lists
        allocs = self._commit([Placement(task, dev, window)], cfg)
        return victims, SchedulerDecision(Outcome.ALLOCATED, allocs, victims=victims)
