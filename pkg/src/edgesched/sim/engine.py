"""
Discrete-event simulation of the conveyor-belt workload.

One controller serves scheduling requests in FIFO order. Each call costs
simulated time (a fixed per-call table by default, or the host's measured
wall-clock), and its effects land once that time has passed. Devices run
their reservations; remote inputs cross one shared serial medium whose
true speed follows the background traffic, while the schedulers only ever
see the probed estimate.

The output is a run log: a list of plain dicts, one per record, which
:mod:`edgesched.metrics` turns into a report.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import json
import math
import random
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional

from ..model import (
    ConfigKind,
    Frame,
    HP_DURATION,
    N_DEVICES,
    Priority,
    Task,
    TaskState,
    TraceEntry,
    default_configs,
    load_trace,
)
from ..netlink import mean_of_means
from ..schedulers import LpRequest, Outcome, make_scheduler
from .config import SimConfig
from .traffic import burst_on, effective_bandwidth, probe_samples

EPS = 1e-6


class EventKind(enum.IntEnum):
    """Ties at one instant resolve in this order."""

    TRAFFIC_BURST_OFF = 0
    TRAFFIC_BURST_ON = 1
    TASK_COMPLETE = 2
    HP_COMPLETE = 3
    TRANSFER_END = 4
    DEADLINE_CHECK = 5
    TASK_START = 6
    TRANSFER_START = 7
    DECISION = 8
    LP_REQUEST_ISSUE = 9
    BANDWIDTH_PROBE = 10
    FRAME_SPAWN = 11

    @property
    def label(self) -> str:
        return "".join(p.capitalize() for p in self.name.split("_"))


@dataclass(order=True)
class SimEvent:
    time: float
    kind: EventKind
    seq: int
    payload: dict = field(compare=False, default_factory=dict)


@dataclass
class Request:
    id: int
    kind: str  # hp, preempt, lp, realloc
    tasks: List[Task]
    issued: float
    preemption: object = None


class Simulator:
    def __init__(self, config: SimConfig, trace: Optional[List[TraceEntry]] = None):
        self.cfg = config
        if trace is None:
            if not config.trace:
                raise ValueError("no trace given")
            trace = load_trace(config.trace)
        self.trace = trace
        self.devices = list(range(N_DEVICES))
        padding = {k: config.padding_s for k in ConfigKind if k is not ConfigKind.HIGH_PRIORITY}
        self.configs = default_configs(padding)
        period = config.frame_period_s
        self.n_frames = len(trace)
        if config.duration_s is not None:
            self.n_frames = min(self.n_frames, math.ceil(config.duration_s / period - 1e-9))
        self.scheduler = make_scheduler(
            config.scheduler, self.devices, configs=self.configs,
            bandwidth=config.nominal_bw_bps, image_bits=config.image_bytes * 8,
            alpha=config.alpha, seed=config.seed,
            horizon=config.horizon_periods * period, n_exp=config.n_exp,
        )
        self.rng = random.Random(f"probe-{config.seed}")
        self.latencies = config.latencies()
        self.estimates: Dict[str, float] = dict(self.latencies)

        self._events: List[SimEvent] = []
        self._seq = itertools.count()
        self._task_ids = itertools.count()
        self._request_ids = itertools.count()
        self.now = 0.0
        self.log: List[dict] = []
        self.tasks: Dict[int, Task] = {}
        self.frames: List[Frame] = []
        self.spawned_at: Dict[int, float] = {}
        self.frame_slot: Dict[int, int] = {}  # HP task id -> index into frames
        self.allocs = {}
        self.gen: Dict[int, int] = {}
        self.queue: Deque[Request] = deque()
        self.busy = False
        self.stall_until = 0.0
        self.medium_free = 0.0
        self.in_flight: Dict[int, float] = {}
        self.overflow = 0

    # ----------------------------------------------------------------- plumbing

    def push(self, t: float, kind: EventKind, **payload) -> None:
        heapq.heappush(self._events, SimEvent(t, kind, next(self._seq), payload))

    def record(self, rtype: str, **fields) -> None:
        fields = {"type": rtype, **fields}
        self.log.append(fields)

    def new_task(self, source: int, priority: Priority, deadline: float, frame: int) -> Task:
        task = Task(source, priority, deadline, id=next(self._task_ids), frame=frame,
                    input_bytes=self.cfg.image_bytes)
        self.tasks[task.id] = task
        self.gen[task.id] = 0
        return task

    def cancel(self, task: Task) -> None:
        self.gen[task.id] += 1

    def live(self, payload: dict) -> bool:
        return self.gen[payload["task"]] == payload["gen"]

    # --------------------------------------------------------------------- run

    def run(self) -> List[dict]:
        cfg = self.cfg
        period = cfg.frame_period_s
        self.record("config", **{k: v for k, v in vars(cfg).items() if k != "latency_table"},
                    latencies=self.latencies, frames=self.n_frames)
        for i in range(self.n_frames):
            self.push(i * period, EventKind.FRAME_SPAWN, frame=i)
        end = self.n_frames * period
        interval = cfg.bw_interval_s
        k = 1
        while k * interval < end:
            self.push(k * interval, EventKind.BANDWIDTH_PROBE)
            k += 1
        if cfg.duty_cycle > 0:
            k = 0
            while k * interval < end:
                self.push(k * interval, EventKind.TRAFFIC_BURST_ON)
                self.push(k * interval + cfg.duty_cycle * interval, EventKind.TRAFFIC_BURST_OFF)
                k += 1

        handlers = {
            EventKind.FRAME_SPAWN: self.on_frame_spawn,
            EventKind.DECISION: self.on_decision,
            EventKind.HP_COMPLETE: self.on_hp_complete,
            EventKind.LP_REQUEST_ISSUE: self.on_lp_issue,
            EventKind.TRANSFER_START: self.on_transfer_start,
            EventKind.TRANSFER_END: self.on_transfer_end,
            EventKind.TASK_START: self.on_task_start,
            EventKind.TASK_COMPLETE: self.on_task_complete,
            EventKind.DEADLINE_CHECK: self.on_deadline_check,
            EventKind.BANDWIDTH_PROBE: self.on_probe,
            EventKind.TRAFFIC_BURST_ON: self.on_burst,
            EventKind.TRAFFIC_BURST_OFF: self.on_burst,
        }
        while self._events:
            ev = heapq.heappop(self._events)
            if ev.time < self.now - 1e-9:
                raise RuntimeError(f"event {ev.kind.label} at {ev.time} is in the past")
            self.now = max(self.now, ev.time)
            handlers[ev.kind](ev)
        self.finish()
        return self.log

    def finish(self) -> None:
        for task in self.tasks.values():
            if not task.terminal:
                raise RuntimeError(f"{task!r} never reached a terminal state")
        for frame in self.frames:
            self.record("frame", frame=frame.index, device=frame.device, spawn=frame.spawn_time,
                        hp=frame.hp_task.id, lp=[t.id for t in frame.lp_tasks])
        for tid in sorted(self.tasks):
            t = self.tasks[tid]
            a = self.allocs.get(tid)
            self.record(
                "task", id=tid, priority=t.priority.value, source=t.source_device,
                frame=t.frame, spawn=self.spawned_at[tid], deadline=t.deadline,
                state=t.state.value, preempted=t.preempted,
                device=None if a is None else a.device,
                cores=None if a is None else a.cores,
                remote=bool(a is not None and a.remote),
            )
        self.record("end", t=self.now, overflow=self.overflow)

    # ------------------------------------------------------------ controller

    def enqueue(self, req: Request) -> None:
        self.queue.append(req)
        if not self.busy:
            self.serve(self.now)

    def serve(self, t: float) -> None:
        if not self.queue:
            self.busy = False
            return
        self.busy = True
        req = self.queue.popleft()
        start = max(t, self.stall_until)
        self.push(start + self.estimates[req.kind], EventKind.DECISION, request=req, start=start)

    def on_decision(self, ev: SimEvent) -> None:
        req: Request = ev.payload["request"]
        now = ev.time
        sched = self.scheduler
        victims = []
        if req.kind == "hp":
            decision = sched.schedule_high_priority(req.tasks[0], now)
        elif req.kind == "preempt":
            victims, decision = sched.preempt(req.preemption, now)
        else:
            lp = LpRequest(req.tasks[0].source_device, req.tasks, req.issued,
                           realloc=req.kind == "realloc", id=req.id)
            decision = sched.schedule_low_priority(lp, now)
        if self.cfg.latency_mode == "measured":
            charged = decision.latency
            self.estimates[req.kind] = charged
        else:
            charged = self.latencies[req.kind]
        self.record(
            "decision", t=now, request=req.id, kind=req.kind, issued=req.issued,
            outcome=decision.outcome.value, reason=decision.reason,
            tasks=[t.id for t in req.tasks], latency_us=round(charged * 1e6, 3),
            allocations=[self.alloc_record(a) for a in decision.allocations],
            victims=[v.task_id for v in victims],
        )
        self.apply(req, decision, victims)
        next_free = max(now, ev.payload["start"] + charged)
        self.serve(next_free)

    @staticmethod
    def alloc_record(a) -> dict:
        rec = {"task": a.task_id, "device": a.device, "cores": a.cores, "kind": a.kind.value,
               "t1": a.processing_window.t1, "t2": a.processing_window.t2,
               "remote": a.remote}
        if a.comm is not None:
            rec.update(bucket=a.comm.bucket, comm_start=a.comm.start, comm_dur=a.comm.duration)
        return rec

    def apply(self, req: Request, decision, victims) -> None:
        now = self.now
        if decision.outcome is Outcome.PREEMPTION_ISSUED:
            self.enqueue(Request(next(self._request_ids), "preempt", req.tasks, now,
                                 preemption=decision.preemption))
            return
        if decision.outcome is Outcome.REJECTED:
            for task in req.tasks:
                task.transition(TaskState.REJECTED)
                if task.priority is Priority.HIGH:
                    self.reject_frame_lp(task)
            return
        for v in victims:
            task = self.tasks[v.task_id]
            self.cancel(task)
            task.transition(TaskState.PREEMPTED)
            self.allocs.pop(task.id, None)
            self.in_flight.pop(task.id, None)
            self.enqueue(Request(next(self._request_ids), "realloc", [task], now))
        for a in decision.allocations:
            task = self.tasks[a.task_id]
            task.transition(TaskState.ALLOCATED)
            self.allocs[task.id] = a
            g = self.gen[task.id]
            if a.comm is not None:
                self.push(a.comm.start, EventKind.TRANSFER_START, task=task.id, gen=g)
            else:
                self.push(a.processing_window.t1, EventKind.TASK_START, task=task.id, gen=g)

    def reject_frame_lp(self, hp: Task) -> None:
        frame = self.frames[self.frame_slot[hp.id]]
        for t in frame.lp_tasks:
            if t.state is TaskState.PENDING:
                t.transition(TaskState.REJECTED)

    # ---------------------------------------------------------------- events

    def on_frame_spawn(self, ev: SimEvent) -> None:
        i = ev.payload["frame"]
        now = ev.time
        cfg = self.cfg
        self.scheduler.prune(now)
        for d, value in zip(self.devices, self.trace[i].per_device):
            if value < 0:
                continue
            hp = self.new_task(d, Priority.HIGH, now + HP_DURATION + cfg.hp_slack_s, i)
            lp_deadline = now + cfg.deadline_periods * cfg.frame_period_s
            lps = [self.new_task(d, Priority.LOW, lp_deadline, i) for _ in range(value)]
            for t in [hp] + lps:
                self.spawned_at[t.id] = now
            self.frame_slot[hp.id] = len(self.frames)
            self.frames.append(Frame(i, d, now, hp, lps))
            self.record("event", t=now, kind="FrameSpawn", frame=i, device=d, task=hp.id)
            self.enqueue(Request(next(self._request_ids), "hp", [hp], now))

    def on_task_start(self, ev: SimEvent) -> None:
        if not self.live(ev.payload):
            return
        task = self.tasks[ev.payload["task"]]
        a = self.allocs[task.id]
        task.transition(TaskState.RUNNING)
        dur = self.configs[a.kind].duration
        self.record("event", t=ev.time, kind="TaskStart", task=task.id, device=a.device,
                    cores=a.cores, end=ev.time + dur)
        done = EventKind.HP_COMPLETE if task.priority is Priority.HIGH else EventKind.TASK_COMPLETE
        self.push(ev.time + dur, done, task=task.id, gen=self.gen[task.id])

    def on_task_complete(self, ev: SimEvent) -> None:
        if not self.live(ev.payload):
            return
        task = self.tasks[ev.payload["task"]]
        task.transition(TaskState.COMPLETED)
        self.scheduler.release(task.id)
        self.record("event", t=ev.time, kind="TaskComplete", task=task.id)

    def on_hp_complete(self, ev: SimEvent) -> None:
        self.on_task_complete(ev)
        task = self.tasks[ev.payload["task"]]
        frame = self.frames[self.frame_slot[task.id]]
        if frame.lp_tasks:
            self.push(ev.time, EventKind.LP_REQUEST_ISSUE, frame=self.frame_slot[task.id])

    def on_lp_issue(self, ev: SimEvent) -> None:
        frame = self.frames[ev.payload["frame"]]
        self.record("event", t=ev.time, kind="LpRequestIssue", frame=frame.index,
                    device=frame.device, tasks=[t.id for t in frame.lp_tasks])
        for t in frame.lp_tasks:
            self.push(t.deadline, EventKind.DEADLINE_CHECK, task=t.id)
        self.enqueue(Request(next(self._request_ids), "lp", list(frame.lp_tasks), ev.time))

    def on_transfer_start(self, ev: SimEvent) -> None:
        if not self.live(ev.payload):
            return
        tid = ev.payload["task"]
        if self.medium_free > ev.time + 1e-12:
            # the medium is serial; wait for the transfer ahead to finish
            self.push(self.medium_free, EventKind.TRANSFER_START, **ev.payload)
            return
        bw = effective_bandwidth(ev.time, self.cfg)
        dur = self.cfg.image_bytes * 8 / bw
        self.medium_free = ev.time + dur
        self.in_flight[tid] = ev.time + dur
        self.record("event", t=ev.time, kind="TransferStart", task=tid, end=ev.time + dur)
        self.push(ev.time + dur, EventKind.TRANSFER_END, **ev.payload)

    def on_transfer_end(self, ev: SimEvent) -> None:
        tid = ev.payload["task"]
        self.in_flight.pop(tid, None)
        if not self.live(ev.payload):
            return
        task = self.tasks[tid]
        a = self.allocs[tid]
        self.record("event", t=ev.time, kind="TransferEnd", task=tid)
        start = max(a.processing_window.t1, ev.time)
        if start > a.processing_window.t1 + EPS:
            # the input missed its reservation; the slot is lost
            task.transition(TaskState.VIOLATED_DEADLINE)
            self.scheduler.release(tid)
            self.record("event", t=ev.time, kind="ReservationMissed", task=tid)
            return
        self.push(start, EventKind.TASK_START, **ev.payload)

    def on_deadline_check(self, ev: SimEvent) -> None:
        task = self.tasks[ev.payload["task"]]
        if task.state in (TaskState.ALLOCATED, TaskState.RUNNING):
            a = self.allocs[task.id]
            if a.processing_window.t2 > task.deadline + EPS:
                self.cancel(task)
                task.transition(TaskState.VIOLATED_DEADLINE)
                self.scheduler.release(task.id)
                self.record("event", t=ev.time, kind="DeadlineCheck", task=task.id,
                            violated=True)

    def on_probe(self, ev: SimEvent) -> None:
        now = ev.time
        host = self.rng.choice(self.devices)
        peers = [d for d in self.devices if d != host]
        in_flight = sum(1 for end in self.in_flight.values() if end > now)
        samples = probe_samples(now, self.cfg, peers, in_flight, self.rng)
        means = mean_of_means(samples)
        t0 = time.perf_counter()
        result = self.scheduler.update_bandwidth(means, now)
        took = time.perf_counter() - t0
        stall = took if self.cfg.latency_mode == "measured" else self.latencies["link_rebuild"]
        self.stall_until = max(self.stall_until, now + stall)
        rec = {"t": now, "host": host, "in_flight": in_flight,
               "sample_mean": sum(means) / len(means), "estimate": self.scheduler.estimate.value,
               "stall": stall}
        if result is not None:
            self.overflow += len(result.overflow)
            rec.update(kept=len(result.kept), dropped=len(result.dropped),
                       overflow=len(result.overflow))
        self.record("bw", **rec)

    def on_burst(self, ev: SimEvent) -> None:
        self.record("event", t=ev.time, kind=ev.kind.label, on=burst_on(ev.time, self.cfg))


def run(config: SimConfig, trace: Optional[List[TraceEntry]] = None) -> List[dict]:
    return Simulator(config, trace).run()


def dump_log(log: List[dict], path) -> None:
    with open(path, "w") as fh:
        for rec in log:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
