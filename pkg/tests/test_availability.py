import random

import pytest
from hypothesis import given, strategies as st

from edgesched.availability import (
    AvailabilityError,
    AvailabilityList,
    DeviceAvailability,
    bisect_window,
    find_window,
    fitting_windows,
    new_full_list,
    rebuild,
    track_count,
)
from edgesched.model import (
    Allocation,
    ConfigKind,
    Priority,
    TaskConfig,
    TimeWindow,
    default_configs,
)
from oracles import free_cores_over, scan_find_window
from workloads import lists_sound, random_workload

CFGS = default_configs()
LP2 = CFGS[ConfigKind.LOW_PRIORITY_2CORE]
LP4 = CFGS[ConfigKind.LOW_PRIORITY_4CORE]
HP = CFGS[ConfigKind.HIGH_PRIORITY]
W = TimeWindow


@pytest.mark.parametrize("cfg,tracks", [(LP2, 2), (LP4, 1), (HP, 4)])
def test_new_full_list_track_counts(cfg, tracks):
    lst = new_full_list(0, cfg, W(0, 1000))
    assert lst.tracks == [[W(0, 1000)]] * tracks
    lst.check()


def test_track_count_needs_divisor():
    with pytest.raises(AvailabilityError):
        track_count(4, 3)


def _list(cfg, tracks):
    return AvailabilityList(0, cfg, tracks, 4)


def test_find_window_examples():
    lst = _list(LP2, [[W(0, 100)], []])
    assert find_window(lst, W(10, 26.862)).window == W(0, 100)
    lst = _list(LP2, [[W(0, 5)], [W(0, 100)]])
    hit = find_window(lst, W(10, 30))
    assert (hit.track, hit.window) == (1, W(0, 100))
    assert find_window(_list(LP2, [[], []]), W(0, 10)) is None


windows_st = st.lists(st.tuples(st.integers(0, 200), st.integers(1, 40)), max_size=6)


@given(st.lists(windows_st, min_size=1, max_size=4), st.integers(0, 220), st.integers(1, 30))
def test_find_window_matches_scan_oracle(raw_tracks, t1, dur):
    tracks = []
    for raw in raw_tracks:
        track, cursor = [], 0
        for gap, length in raw:
            track.append(W(cursor + gap, cursor + gap + length))
            cursor += gap + length
        tracks.append(track)
    lst = _list(HP, tracks)
    got = find_window(lst, W(t1, t1 + dur))
    want = scan_find_window(tracks, t1, t1 + dur)
    assert (None if got is None else (got.track, got.window)) == want


def test_bisect_examples():
    assert bisect_window(W(0, 100), W(10, 30), 5) == [W(0, 10), W(30, 100)]
    assert bisect_window(W(0, 100), W(0, 100), 5) == []
    assert bisect_window(W(0, 20), W(5, 18), 5) == [W(0, 5)]
    with pytest.raises(AvailabilityError):
        bisect_window(W(0, 20), W(15, 25), 5)


def _device(horizon=W(0, 100)):
    return DeviceAvailability(0, CFGS, horizon)


def test_write_through_example():
    av = _device()
    av.record_allocation(W(10, 26.9), 2)
    # the [0, 10) remnant is shorter than both LP durations and is dropped
    assert av[ConfigKind.LOW_PRIORITY_2CORE].tracks == [[W(26.9, 100)], [W(0, 100)]]
    assert av[ConfigKind.LOW_PRIORITY_4CORE].tracks == [[W(26.9, 100)]]
    assert av[ConfigKind.HIGH_PRIORITY].tracks == [
        [W(0, 10), W(26.9, 100)], [W(0, 10), W(26.9, 100)], [W(0, 100)], [W(0, 100)],
    ]


def test_write_through_keeps_long_remnants():
    av = _device(W(0, 200))
    av.record_allocation(W(50, 66.862), 2)
    assert av[ConfigKind.LOW_PRIORITY_2CORE].tracks[0] == [W(0, 50), W(66.862, 200)]


def test_full_and_empty_subtraction():
    av = _device()
    av.record_allocation(W(0, 100), 4)
    assert all(t == [] for lst in av.lists.values() for t in lst.tracks)
    av.record_allocation(W(10, 20), 1)
    assert all(t == [] for lst in av.lists.values() for t in lst.tracks)


def test_partial_overlaps_do_not_overcommit():
    # three staggered 1-core tasks leave 2 cores free only where at most one
    # of them runs; the 2-core list must never offer more than that
    av = _device(W(0, 100))
    work = []
    for i, (a, b) in enumerate([(0, 30), (20, 50), (40, 70)]):
        av.record_allocation(W(a, b), 1)
        work.append(Allocation(i, 0, 1, W(a, b), ConfigKind.HIGH_PRIORITY, 500,
                               Priority.LOW, 0, seq=i))
    assert lists_sound(av, work)


def test_rebuild_examples():
    empty = rebuild(0, CFGS, [], W(0, 1000))
    assert empty.snapshot() == _device(W(0, 1000)).snapshot()
    a = Allocation(1, 0, 2, W(10, 26.9), ConfigKind.LOW_PRIORITY_2CORE, 50, Priority.LOW, 0)
    inc = _device(W(0, 1000))
    inc.record_allocation(a.processing_window, 2)
    assert rebuild(0, CFGS, [a], W(0, 1000)).snapshot() == inc.snapshot()
    with pytest.raises(AvailabilityError):
        rebuild(1, CFGS, [a], W(0, 1000))


@given(st.integers(0, 10_000))
def test_rebuild_of_pairs_is_sound_in_either_order(seed):
    # fragments below the minimum duration are dropped, so the two orders can
    # leave different (both safe) window sets; safety is what must hold
    rng = random.Random(seed)
    work = random_workload(rng, 2)
    for order in (work, work[::-1]):
        reseq = [Allocation(a.task_id, 0, a.cores, a.processing_window, a.kind, a.deadline,
                            a.priority, 0, seq=i) for i, a in enumerate(order)]
        assert lists_sound(rebuild(0, CFGS, reseq, W(0, 400)), reseq)


@given(st.integers(0, 10_000), st.integers(1, 8))
def test_lists_stay_sound_under_random_workloads(seed, n):
    rng = random.Random(seed)
    work = random_workload(rng, n)
    av = _device(W(0, 400))
    for a in work:
        av.record_allocation(a.processing_window, a.cores)
        for lst in av.lists.values():
            lst.check()
    assert lists_sound(av, work)


@given(st.integers(0, 10_000), st.integers(1, 8), st.integers(0, 250), st.integers(1, 25))
def test_every_qualifying_window_has_the_cores(seed, n, earliest, dur):
    rng = random.Random(seed)
    work = random_workload(rng, n)
    av = rebuild(0, CFGS, work, W(0, 400))
    iv = [(a.processing_window.t1, a.processing_window.t2, a.cores) for a in work]
    for kind, lst in av.lists.items():
        for aw, placement in fitting_windows(lst, earliest, dur, 400):
            assert placement.t1 >= earliest
            assert free_cores_over(iv, placement.t1, placement.t2) >= lst.min_core_capacity


def test_extend_horizon_and_prune():
    av = _device(W(0, 100))
    av.record_allocation(W(80, 100), 4)
    av.extend_horizon(200)
    assert av[ConfigKind.LOW_PRIORITY_4CORE].tracks == [[W(0, 80), W(100, 200)]]
    av.prune(90)
    assert av[ConfigKind.LOW_PRIORITY_4CORE].tracks == [[W(100, 200)]]


def test_padding_raises_minimum_duration():
    cfg = TaskConfig.of(ConfigKind.LOW_PRIORITY_4CORE, padding=1.0)
    lst = new_full_list(0, cfg, W(0, 100))
    assert lst.min_duration == pytest.approx(12.611)
