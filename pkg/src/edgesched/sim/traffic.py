"""Background traffic and the simulated ping probes that feed the estimator."""

from __future__ import annotations

import random
from typing import List, Sequence

from .config import SimConfig


def burst_on(t: float, config: SimConfig) -> bool:
    """Bursts fill the first ``duty_cycle`` share of every update interval."""
    if config.duty_cycle <= 0:
        return False
    phase = t % config.bw_interval_s
    return phase < config.duty_cycle * config.bw_interval_s


def effective_bandwidth(t: float, config: SimConfig) -> float:
    if burst_on(t, config):
        return config.nominal_bw_bps * (1 - config.congestion_load)
    return config.nominal_bw_bps


def probe_samples(t: float, config: SimConfig, peers: Sequence[int], in_flight: int,
                  rng: random.Random) -> List[List[float]]:
    """Per-peer bits-per-second samples from ``probe_count`` pings each.

    A ping sharing the link with ``k`` transfers gets a ``1/(k+1)`` share.
    Pings go out back to back, so later ones can fall into a burst. Jitter
    only ever adds delay, so a quiet link is never over-estimated.
    """
    bits = config.probe_bytes * 8
    out = []
    clock = t
    for _ in peers:
        samples = []
        for _ in range(config.probe_count):
            share = effective_bandwidth(clock, config) / (in_flight + 1)
            one_way = bits / share
            if config.probe_jitter:
                one_way *= 1.0 + abs(rng.gauss(0.0, config.probe_jitter))
            samples.append(bits / one_way)
            clock += 2 * one_way
        out.append(samples)
    return out


def probe_airtime(samples: Sequence[Sequence[float]], config: SimConfig) -> float:
    bits = config.probe_bytes * 8
    return sum(2 * bits / s for peer in samples for s in peer)
