"""Random workload generators shared by the property and acceptance tests."""

import itertools
import random
import time

from edgesched.availability import DeviceAvailability
from edgesched.model import Allocation, ConfigKind, Priority, Task, TimeWindow, default_configs
from edgesched.netlink import build_link, cascade, find_comm_slot, reserve
from edgesched.schedulers import LpRequest, Outcome, RAScheduler, WPScheduler

from oracles import max_usage, usage_at

CONFIGS = default_configs()
HORIZON = TimeWindow(0.0, 400.0)


def lists_sound(av: DeviceAvailability, workload, total=4) -> bool:
    """At every instant, free tracks of a j-core list <= floor(free cores / j)."""
    iv = [(a.processing_window.t1, a.processing_window.t2, a.cores) for a in workload]
    for lst in av.lists.values():
        j = lst.min_core_capacity
        points = sorted({p for t in lst.tracks for w in t for p in (w.t1, w.t2)}
                        | {p for a, b, _ in iv for p in (a, b)})
        for a, b in zip(points, points[1:]):
            mid = (a + b) / 2
            free_tracks = sum(any(w.t1 <= mid < w.t2 for w in t) for t in lst.tracks)
            if free_tracks > (total - usage_at(iv, mid)) // j:
                return False
    return True


def random_device_run(rng: random.Random, steps: int = 12):
    """Drive a one-device RAS through random HP/LP/pre-emption traffic.

    Yields the scheduler after every step so callers can check invariants.
    """
    ids = itertools.count()
    sched = RAScheduler([0], seed=rng.randrange(1 << 30), horizon=HORIZON.t2)
    now = 0.0
    for _ in range(steps):
        now += rng.choice([0.0, 0.5, 1.0, 3.0, 8.0])
        if rng.random() < 0.4:
            task = Task(0, Priority.HIGH, now + 2.0, id=next(ids))
            d = sched.schedule_high_priority(task, now)
            if d.outcome is Outcome.PREEMPTION_ISSUED:
                sched.preempt(d.preemption, now)
        else:
            n = rng.randint(1, 3)
            deadline = now + rng.uniform(12.0, 60.0)
            tasks = [Task(0, Priority.LOW, deadline, id=next(ids)) for _ in range(n)]
            sched.schedule_low_priority(LpRequest(0, tasks, now), now)
        yield sched


def random_workload(rng: random.Random, n: int):
    """Allocations on one device that never overcommit, in allocation order."""
    out = []
    kinds = list(ConfigKind)
    for seq in range(n * 4):
        if len(out) == n:
            break
        kind = rng.choice(kinds)
        cfg = CONFIGS[kind]
        t1 = round(rng.uniform(0, 200), rng.choice([0, 1, 3]))
        w = TimeWindow(t1, t1 + cfg.effective_duration)
        cand = Allocation(seq, 0, cfg.cores, w, kind, 500.0, Priority.LOW, 0, seq=seq)
        iv = [(a.processing_window.t1, a.processing_window.t2, a.cores) for a in out + [cand]]
        if max_usage(iv) <= 4:
            out.append(cand)
    return out


def random_instance(rng: random.Random):
    """A small network state plus one LP request, for RAS/WPS pairing."""
    n_dev = rng.randint(1, 3)
    devices = list(range(n_dev))
    seed = rng.randrange(1 << 30)
    history = []
    tid = itertools.count(1000)
    # at most 3 earlier requests of <= 2 tasks, so <= 10 tasks in all
    for _ in range(rng.randint(0, 3)):
        src = rng.choice(devices)
        at = round(rng.uniform(0, 20), 1)
        if rng.random() < 0.3:
            history.append(("hp", src, at, None))
        else:
            history.append(("lp", src, at, (rng.randint(1, 2), round(rng.uniform(14, 50), 1))))
    history.sort(key=lambda h: h[2])
    src = rng.choice(devices)
    now = round(history[-1][2] + rng.uniform(0, 5), 1) if history else 0.0
    k = rng.randint(1, 4)
    slack = round(rng.uniform(12, 45), 1)
    return devices, seed, history, (src, now, k, slack), tid


def replay(devices, seed, history, ids_start=1000):
    """Build a RAS state from ``history``."""
    sched = RAScheduler(devices, seed=seed, horizon=HORIZON.t2)
    ids = itertools.count(ids_start)
    for kind, src, at, extra in history:
        if kind == "hp":
            t = Task(src, Priority.HIGH, at + 1.5, id=next(ids))
            sched.schedule_high_priority(t, at)
        else:
            n, slack = extra
            tasks = [Task(src, Priority.LOW, at + slack, id=next(ids)) for _ in range(n)]
            sched.schedule_low_priority(LpRequest(src, tasks, at), at)
    return sched, ids


def mirror(ras: RAScheduler, seed) -> WPScheduler:
    """A WPS holding exactly the allocations and transfers of ``ras``."""
    wps = WPScheduler(ras.device_ids, seed=seed)
    for d in ras.device_ids:
        wps.workload[d] = list(ras.workload[d])
    wps.transfers = sorted((s, e, tid) for s, e, tid in ras.link.intervals)
    return wps


def paired_decision(rng: random.Random):
    """One request (LP, or HP 30% of the time) against identical RAS and WPS states."""
    devices, seed, history, (src, now, k, slack), _ = random_instance(rng)
    ras, ids = replay(devices, seed, history)
    wps = mirror(ras, seed)
    first = next(ids)
    high = rng.random() < 0.3
    out = []
    for sched in (ras, wps):
        if high:
            task = Task(src, Priority.HIGH, now + 1.5, id=first)
            out.append(sched.schedule_high_priority(task, now))
        else:
            tasks = [Task(src, Priority.LOW, now + slack, id=first + i) for i in range(k)]
            out.append(sched.schedule_low_priority(LpRequest(src, tasks, now), now))
    return out


def random_link_state(rng):
    D = rng.uniform(0.05, 2.0)
    link = build_link(rng.uniform(0, 100), D, n_exp=rng.randint(1, 6))
    tid = 0
    for _ in range(rng.randint(0, 40)):
        hit = find_comm_slot(link, link.t_r + rng.uniform(0, 30) * D)
        if hit is None:
            break
        reserve(link, hit[0], tid, hit[1])
        tid += 1
    return link


def check_cascade(rng):
    """kept + dropped + overflow == original, and the new link stays within capacity."""
    old = random_link_state(rng)
    before = sorted(o.task_id for _, o in old.occupants())
    now = old.t_r + rng.uniform(-1, 20) * old.D
    new = build_link(max(now, old.t_r), old.D * rng.uniform(0.2, 5.0), n_exp=rng.randint(1, 6))
    res = cascade(old, new)
    moved = sorted([o.task_id for _, o in res.kept] + [o.task_id for o in res.dropped]
                   + [o.task_id for o in res.overflow])
    placed = sorted(o.task_id for _, o in res.link.occupants())
    ok = moved == before and placed == sorted(o.task_id for _, o in res.kept)
    ok &= all(len(b.occupants) <= b.capacity for b in res.link.buckets)
    ok &= all(o.start >= new.t_r for _, o in res.kept)
    return ok


def loaded_pair(n_allocs, seed=0):
    """RAS and a WPS mirror holding ``n_allocs`` allocations."""
    rng = random.Random(seed)
    ids = itertools.count(1 << 20)
    ras = RAScheduler(range(4), seed=seed, horizon=4000.0)
    now = 0.0
    while len(ras.allocations()) < n_allocs:
        src = rng.randrange(4)
        if rng.random() < 0.5:
            ras.schedule_high_priority(Task(src, Priority.HIGH, now + 5, id=next(ids)), now)
        else:
            ras.schedule_low_priority(
                LpRequest(src, [Task(src, Priority.LOW, now + 60, id=next(ids))], now), now)
        now += 0.3
    return ras, mirror(ras, seed), now


def timed_lp(s, now, reps=5):
    """Best-of-``reps`` wall-clock time of one 2-task LP decision."""
    ids = itertools.count(1 << 21)
    best = float("inf")
    for _ in range(reps):
        req = LpRequest(0, [Task(0, Priority.LOW, now + 60, id=next(ids)) for _ in range(2)], now)
        t0 = time.perf_counter()
        s.schedule_low_priority(req, now)
        best = min(best, time.perf_counter() - t0)
        # undo the commit so every repetition sees the same workload
        for t in req.tasks:
            s.release(t.id)
    return best
