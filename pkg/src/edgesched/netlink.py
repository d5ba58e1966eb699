"""
Discretised shared network link and the bandwidth estimate that sizes it.

The link is anchored at a reasoning time ``t_r`` (construction time rounded
up to a multiple of the base transfer unit ``D``). Four unit buckets of one
transfer each come first, followed by buckets whose capacity and span double
each step, so bucket ``m >= 4`` covers base slots ``[2**(m-2), 2**(m-1))``.
That layout is what makes the closed-form index in :func:`query_index` land
on the right bucket.
"""

from __future__ import annotations

import bisect
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, List, Optional, Sequence, Tuple

from .model import ModelError, TimeWindow

EPS = 1e-9
N_BASE = 4
DEFAULT_N_EXP = 16
DEFAULT_ALPHA = 0.3


class LinkConfigError(ModelError):
    pass


class CapacityError(RuntimeError):
    pass


@dataclass(frozen=True)
class Occupant:
    task_id: int
    start: float
    duration: float

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass
class Bucket:
    index: int
    window: TimeWindow
    capacity: int
    lo: int  # first base slot (relative to t_r) covered
    hi: int  # one past the last base slot covered
    occupants: List[Occupant] = field(default_factory=list)

    @property
    def full(self) -> bool:
        return len(self.occupants) >= self.capacity


class NetworkLink:
    def __init__(self, t_r: float, D: float, n_base: int, n_exp: int, buckets: List[Bucket],
                 built_at: float):
        self.t_r = t_r
        self.D = D
        self.n_base = n_base
        self.n_exp = n_exp
        self.buckets = buckets
        self.built_at = built_at
        # every transfer the link knows of, (start, end, task_id), sorted;
        # used so a new transfer never overlaps one already on the air
        self.intervals: List[Tuple[float, float, int]] = []

    @property
    def horizon(self) -> TimeWindow:
        return TimeWindow(self.buckets[0].window.t1, self.buckets[-1].window.t2)

    def occupants(self) -> List[Tuple[int, Occupant]]:
        return [(b.index, o) for b in self.buckets for o in b.occupants]

    def occupancy(self) -> int:
        return sum(len(b.occupants) for b in self.buckets)

    def _add_interval(self, start: float, end: float, task_id: int) -> None:
        bisect.insort(self.intervals, (start, end, task_id))

    def _drop_interval(self, task_id: int) -> None:
        self.intervals = [iv for iv in self.intervals if iv[2] != task_id]

    def gap_start(self, lo: float, hi: float, duration: float) -> Optional[float]:
        """Earliest start in ``[lo, hi - duration]`` clear of known transfers."""
        cand = lo
        # sorted by start; anything ending after cand matters
        for s, e, _ in self.intervals:
            if s >= cand + duration - EPS:
                break
            if e > cand + EPS:
                cand = max(cand, e)
        if cand + duration <= hi + EPS:
            return cand
        return None

    def release(self, task_id: int) -> bool:
        found = False
        for b in self.buckets:
            kept = [o for o in b.occupants if o.task_id != task_id]
            if len(kept) != len(b.occupants):
                b.occupants = kept
                found = True
        self._drop_interval(task_id)
        return found

    def prune(self, now: float) -> None:
        self.intervals = [iv for iv in self.intervals if iv[1] > now]

    def dump(self) -> str:
        lines = [f"t_r={self.t_r:.6f} D={self.D:.6f} n_base={self.n_base} n_exp={self.n_exp}"]
        for b in self.buckets:
            ids = ",".join(str(o.task_id) for o in b.occupants) or "-"
            lines.append(
                f"bucket={b.index} [{b.window.t1:.6f},{b.window.t2:.6f}) "
                f"cap={b.capacity} used={len(b.occupants)} tasks={ids}"
            )
        return "\n".join(lines) + "\n"


def compute_D(max_image_bits: float, bandwidth: float) -> float:
    """Base transfer unit: time to send the largest input at ``bandwidth``."""
    if max_image_bits <= 0 or bandwidth <= 0:
        raise LinkConfigError("image size and bandwidth must be positive")
    return max_image_bits / bandwidth


def bucket_span(m: int, n_base: int = N_BASE) -> Tuple[int, int]:
    if m < n_base:
        return m, m + 1
    return 2 ** (m - 2), 2 ** (m - 1)


def build_link(now: float, D: float, n_base: int = N_BASE, n_exp: int = DEFAULT_N_EXP) -> NetworkLink:
    if D <= 0:
        raise LinkConfigError("D must be positive")
    if n_base != N_BASE:
        raise LinkConfigError(f"n_base must be {N_BASE} for the closed-form index")
    if n_exp < 1:
        raise LinkConfigError("need at least one exponential bucket")
    t_r = math.ceil(now / D) * D
    if t_r < now:  # rounding in the division
        t_r += D
    buckets = []
    for m in range(n_base + n_exp):
        lo, hi = bucket_span(m, n_base)
        buckets.append(Bucket(m, TimeWindow(t_r + lo * D, t_r + hi * D), hi - lo, lo, hi))
    return NetworkLink(t_r, D, n_base, n_exp, buckets, now)


def base_index(link: NetworkLink, t_p: float) -> int:
    """``(x + (D - x mod D)) / D`` with ``x = t_p - t_r``, i.e. ``floor(x/D) + 1``.

    Evaluated as an integer quotient: the float form can land a hair under
    the integer and drop a time into the previous slot.
    """
    q, _ = divmod(t_p - link.t_r, link.D)
    return int(q) + 1


def query_index(link: NetworkLink, t_p: float) -> int:
    """Bucket index for time ``t_p``; negative when ``t_p`` precedes ``t_r``.

    An exact multiple of D maps to the following slot, so a transfer is never
    placed in a slot that has already begun.
    """
    x = t_p - link.t_r
    if x < 0:
        return int(divmod(x, link.D)[0])
    b = base_index(link, t_p)
    if b < link.n_base:
        return b
    # floor(log2(b) + 2), exact for integers
    return b.bit_length() + 1


def find_comm_slot(link: NetworkLink, earliest: float,
                   duration: Optional[float] = None) -> Optional[Tuple[int, float]]:
    """First bucket at or after ``earliest`` with room for one more transfer.

    Returns ``(bucket index, transfer start)``. The transfer must fit inside
    the bucket without overlapping any transfer already on the link.
    """
    duration = link.D if duration is None else duration
    start_idx = max(query_index(link, earliest), 0)
    for b in link.buckets[start_idx:]:
        if b.full:
            continue
        start = link.gap_start(max(b.window.t1, earliest), b.window.t2, duration)
        if start is not None:
            return b.index, start
    return None


def reserve(link: NetworkLink, index: int, task_id: int, start: Optional[float] = None,
            duration: Optional[float] = None) -> Occupant:
    b = link.buckets[index]
    if b.full:
        raise CapacityError(f"bucket {index} is full ({b.capacity})")
    occ = Occupant(task_id, b.window.t1 if start is None else start,
                   link.D if duration is None else duration)
    b.occupants.append(occ)
    link._add_interval(occ.start, occ.end, task_id)
    return occ


@dataclass(frozen=True)
class CascadeResult:
    link: NetworkLink
    kept: List[Tuple[int, Occupant]]
    dropped: List[Occupant]
    overflow: List[Occupant]


def cascade(old: NetworkLink, new: NetworkLink) -> CascadeResult:
    """Move every pending transfer of ``old`` into ``new``.

    Transfers that start before the new anchor are finished as far as the
    link is concerned and are dropped; the rest go to the bucket their start
    time indexes, or the next one with spare capacity.
    """
    if new.t_r < old.t_r - EPS:
        raise LinkConfigError("new link must not be anchored before the old one")
    kept, dropped, overflow = [], [], []
    for b in old.buckets:
        for occ in b.occupants:
            idx = query_index(new, occ.start)
            if idx < 0 or occ.start < new.t_r:
                dropped.append(occ)
                continue
            target = next((nb for nb in new.buckets[idx:] if not nb.full), None)
            if target is None:
                overflow.append(occ)
                continue
            target.occupants.append(occ)
            kept.append((target.index, occ))
    # anything still on the air stays visible to the gap search
    for s, e, tid in old.intervals:
        if e > new.built_at:
            new._add_interval(s, e, tid)
    return CascadeResult(new, kept, dropped, overflow)


@dataclass(frozen=True)
class BandwidthEstimate:
    value: float
    alpha: float = DEFAULT_ALPHA
    last_update: float = 0.0

    def __post_init__(self):
        if not self.value > 0:
            raise LinkConfigError("bandwidth estimate must be positive")
        if not 0 < self.alpha <= 1:
            raise LinkConfigError("alpha must be in (0, 1]")


def update_bandwidth(est: BandwidthEstimate, samples: Sequence[float],
                     now: Optional[float] = None) -> BandwidthEstimate:
    """EWMA step with the mean of ``samples``; empty input leaves ``est`` as is."""
    if len(samples) == 0:
        warnings.warn("no bandwidth samples, estimate unchanged", RuntimeWarning, stacklevel=2)
        return est
    if any(s <= 0 for s in samples):
        raise LinkConfigError("bandwidth samples must be positive")
    mean = math.fsum(samples) / len(samples)
    value = est.alpha * mean + (1 - est.alpha) * est.value
    return replace(est, value=value, last_update=est.last_update if now is None else now)


def mean_of_means(per_peer: Iterable[Sequence[float]]) -> List[float]:
    """Collapse per-peer probe samples to one mean per peer."""
    return [math.fsum(s) / len(s) for s in per_peer if len(s)]
