"""
Guaranteed-availability windows for one device.

A device keeps one :class:`AvailabilityList` per task configuration. A list
for a configuration needing ``j`` cores on an ``n``-core device has ``n / j``
tracks; a window on a track promises that ``j`` cores are free for the whole
window. Queries are containment checks that stop at the first hit. Writes
subtract an allocated slot from every list of the device, and pre-emption
forces a full rebuild from the remaining workload, since freed capacity
cannot be re-inserted.
"""

from __future__ import annotations

import bisect
import math
import threading
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from .model import (
    Allocation,
    ConfigKind,
    ModelError,
    TaskConfig,
    TimeWindow,
    window_contains,
    windows_overlap,
)

EPS = 1e-9


class AvailabilityError(ModelError):
    pass


@dataclass(frozen=True)
class AvailabilityWindow:
    window: TimeWindow
    track: int


def track_count(total_cores: int, cores: int) -> int:
    if cores <= 0 or total_cores % cores:
        raise AvailabilityError(
            f"config needing {cores} cores does not divide a {total_cores}-core device"
        )
    return total_cores // cores


class AvailabilityList:
    def __init__(self, device, config: TaskConfig, tracks: List[List[TimeWindow]],
                 total_cores: int):
        self.device = device
        self.kind = config.kind
        self.min_core_capacity = config.cores
        self.min_duration = config.effective_duration
        self.total_cores = total_cores
        self.tracks = tracks

    @property
    def track_count(self) -> int:
        return len(self.tracks)

    def windows(self) -> Iterator[AvailabilityWindow]:
        for i, track in enumerate(self.tracks):
            for w in track:
                yield AvailabilityWindow(w, i)

    def multiset(self) -> List[Tuple[int, float, float]]:
        return sorted((a.track, a.window.t1, a.window.t2) for a in self.windows())

    def copy(self) -> "AvailabilityList":
        new = object.__new__(AvailabilityList)
        new.__dict__.update(self.__dict__)
        new.tracks = [list(t) for t in self.tracks]
        return new

    def check(self) -> None:
        """Assert the structural invariants; used by tests after mutations."""
        assert self.track_count == self.total_cores // self.min_core_capacity
        for track in self.tracks:
            for w in track:
                assert w.duration() >= self.min_duration - EPS, (w, self.min_duration)
            for a, b in zip(track, track[1:]):
                assert a.t2 <= b.t1, (a, b)

    def __repr__(self) -> str:
        return f"AvailabilityList(dev={self.device}, {self.kind.value}, tracks={self.tracks})"


def new_full_list(device, config: TaskConfig, horizon: TimeWindow,
                  total_cores: int = 4) -> AvailabilityList:
    n = track_count(total_cores, config.cores)
    if horizon.duration() < config.effective_duration:
        raise AvailabilityError(
            f"horizon {horizon} shorter than minimum duration {config.effective_duration}"
        )
    return AvailabilityList(device, config, [[horizon] for _ in range(n)], total_cores)


def _t2(w: TimeWindow) -> float:
    return w.t2


def find_window(avail: AvailabilityList, desired: TimeWindow) -> Optional[AvailabilityWindow]:
    """First window containing ``desired``, tracks in index order."""
    for i, track in enumerate(avail.tracks):
        # windows are disjoint and sorted, so only the first one ending
        # after desired.t1 can contain it
        k = bisect.bisect_right(track, desired.t1, key=_t2)
        if k < len(track) and window_contains(track[k], desired):
            return AvailabilityWindow(track[k], i)
    return None


def fitting_windows(avail: AvailabilityList, earliest: float, duration: float,
                    deadline: float) -> Iterator[Tuple[AvailabilityWindow, TimeWindow]]:
    """Every window that can host ``duration`` seconds starting no earlier
    than ``earliest`` and ending by ``deadline``, with its earliest placement."""
    for i, track in enumerate(avail.tracks):
        k = bisect.bisect_right(track, earliest, key=_t2)
        for w in track[k:]:
            start = max(w.t1, earliest)
            if start + duration > deadline + EPS:
                break
            if start + duration <= w.t2 + EPS:
                end = min(start + duration, w.t2)
                yield AvailabilityWindow(w, i), TimeWindow(start, end)


def bisect_window(window: TimeWindow, slot: TimeWindow, min_duration: float) -> List[TimeWindow]:
    """Split ``window`` around ``slot``; keep fragments of at least ``min_duration``."""
    if not window_contains(window, slot):
        raise AvailabilityError(f"slot {slot} not contained in {window}")
    return _subtract(window, [(slot.t1, slot.t2)], min_duration)


def _subtract(window: TimeWindow, removed: Sequence[Tuple[float, float]],
              min_duration: float) -> List[TimeWindow]:
    out = []
    cursor = window.t1
    for a, b in sorted(removed):
        a, b = max(a, window.t1), min(b, window.t2)
        if b <= a:
            continue
        if a - cursor >= min_duration - EPS and a > cursor:
            out.append(TimeWindow(cursor, a))
        cursor = max(cursor, b)
    if window.t2 - cursor >= min_duration - EPS and window.t2 > cursor:
        out.append(TimeWindow(cursor, window.t2))
    return out


def _overlapping(track: List[TimeWindow], slot: TimeWindow) -> range:
    lo = bisect.bisect_right(track, slot.t1, key=_t2)
    hi = lo
    while hi < len(track) and track[hi].t1 < slot.t2:
        hi += 1
    return range(lo, hi)


def subtract_slot(avail: AvailabilityList, slot: TimeWindow, cores: int) -> List[List[TimeWindow]]:
    """New tracks for ``avail`` after ``cores`` cores are taken over ``slot``.

    At every instant of the slot, ``ceil(cores / j)`` of the tracks that are
    free at that instant lose it, lowest track index first. When the slot
    sits inside one window per chosen track this is plain bisection.
    """
    need = math.ceil(cores / avail.min_core_capacity)
    spans = [_overlapping(track, slot) for track in avail.tracks]
    cuts = {slot.t1, slot.t2}
    for track, span in zip(avail.tracks, spans):
        for k in span:
            w = track[k]
            if slot.t1 < w.t1 < slot.t2:
                cuts.add(w.t1)
            if slot.t1 < w.t2 < slot.t2:
                cuts.add(w.t2)
    points = sorted(cuts)
    removed: Dict[int, List[Tuple[float, float]]] = {}
    for a, b in zip(points, points[1:]):
        taken = 0
        for i, (track, span) in enumerate(zip(avail.tracks, spans)):
            if taken == need:
                break
            if any(track[k].t1 <= a and b <= track[k].t2 for k in span):
                segs = removed.setdefault(i, [])
                if segs and segs[-1][1] == a:
                    segs[-1] = (segs[-1][0], b)
                else:
                    segs.append((a, b))
                taken += 1
    tracks = []
    for i, (track, span) in enumerate(zip(avail.tracks, spans)):
        if i not in removed:
            tracks.append(track)
            continue
        fresh = []
        for k in span:
            fresh.extend(_subtract(track[k], removed[i], avail.min_duration))
        tracks.append(track[: span.start] + fresh + track[span.stop:])
    return tracks


class DeviceAvailability:
    """All availability lists of one device plus the horizon they cover.

    Mutations build new track lists and swap them in under the lock, so a
    concurrent reader sees either the old or the new state, never a mix.
    """

    def __init__(self, device, configs: Dict[ConfigKind, TaskConfig], horizon: TimeWindow,
                 total_cores: int = 4):
        self.device = device
        self.configs = configs
        self.total_cores = total_cores
        self.horizon = horizon
        self.lists: Dict[ConfigKind, AvailabilityList] = {
            kind: new_full_list(device, cfg, horizon, total_cores)
            for kind, cfg in configs.items()
        }
        self._lock = threading.RLock()

    def __getitem__(self, kind: ConfigKind) -> AvailabilityList:
        return self.lists[kind]

    def record_allocation(self, slot: TimeWindow, cores: int) -> None:
        with self._lock:
            fresh = {k: subtract_slot(lst, slot, cores) for k, lst in self.lists.items()}
            for k, tracks in fresh.items():
                self.lists[k].tracks = tracks

    def rebuild(self, active: Iterable[Allocation], horizon: Optional[TimeWindow] = None) -> None:
        fresh = rebuild(self.device, self.configs, active, horizon or self.horizon,
                        self.total_cores)
        with self._lock:
            self.horizon = fresh.horizon
            self.lists = fresh.lists

    def extend_horizon(self, new_end: float) -> None:
        """Grow every track up to ``new_end``; nothing is booked past the old end."""
        with self._lock:
            old_end = self.horizon.t2
            if new_end <= old_end:
                return
            for lst in self.lists.values():
                for track in lst.tracks:
                    if track and track[-1].t2 >= old_end - EPS:
                        track[-1] = TimeWindow(track[-1].t1, new_end)
                    elif new_end - old_end >= lst.min_duration - EPS:
                        track.append(TimeWindow(old_end, new_end))
            self.horizon = TimeWindow(self.horizon.t1, new_end)

    def prune(self, now: float) -> None:
        """Drop windows that are over; they can never host a placement."""
        with self._lock:
            for lst in self.lists.values():
                for i, track in enumerate(lst.tracks):
                    k = bisect.bisect_right(track, now, key=_t2)
                    if k:
                        lst.tracks[i] = track[k:]

    def snapshot(self) -> Dict[ConfigKind, List[Tuple[int, float, float]]]:
        with self._lock:
            return {k: lst.multiset() for k, lst in self.lists.items()}

    def dump(self) -> str:
        return dump_lists(self.lists.values())


def rebuild(device, configs: Dict[ConfigKind, TaskConfig], active: Iterable[Allocation],
            horizon: TimeWindow, total_cores: int = 4) -> DeviceAvailability:
    """Fresh lists for ``device`` with ``active`` replayed in allocation order."""
    state = DeviceAvailability(device, configs, horizon, total_cores)
    for a in sorted(active, key=lambda a: a.seq):
        if a.device != device:
            raise AvailabilityError(f"allocation {a.task_id} belongs to device {a.device}")
        if windows_overlap(a.processing_window, horizon):
            state.record_allocation(a.processing_window, a.cores)
    return state


def dump_lists(lists: Iterable[AvailabilityList]) -> str:
    """Line-per-track text dump used for golden comparisons."""
    lines = []
    for lst in lists:
        for i, track in enumerate(lst.tracks):
            body = " ".join(f"[{w.t1:.6f},{w.t2:.6f})" for w in track) or "-"
            lines.append(f"device={lst.device} config={lst.kind.value} track={i} {body}")
    return "\n".join(lines) + "\n"
