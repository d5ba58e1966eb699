"""The three experiment batches and a runner for them."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from .metrics import RunReport, aggregate
from .sim.config import ConfigError, SimConfig
from .sim.engine import run
from .sim.traces import ensure_trace

PRESETS = ("compare", "bw_sweep", "congestion_sweep")
WEIGHTS = ("weighted1", "weighted2", "weighted3", "weighted4")
BW_INTERVALS = (1.5, 5.0, 10.0, 20.0, 30.0)
SLICE_S = 1800.0
DEFAULT_FRAMES = 100


def _frames(base: SimConfig, duration: Optional[float] = None) -> int:
    duration = duration or base.duration_s
    if duration:
        return math.ceil(duration / base.frame_period_s - 1e-9)
    return DEFAULT_FRAMES


def experiment_preset(name: str, base: Optional[SimConfig] = None,
                      trace_dir="traces") -> List[Tuple[str, SimConfig]]:
    """Labelled run configurations of one preset, derived from ``base``."""
    base = base or SimConfig()
    if name == "compare":
        out = []
        frames = _frames(base)
        for sched in ("RAS", "WPS"):
            for kind in WEIGHTS:
                trace = ensure_trace(trace_dir, kind, frames, base.seed)
                cfg = base.replace(scheduler=sched, trace=str(trace))
                out.append((f"{sched}-{kind}-s{base.seed}", cfg))
        return out
    if name == "bw_sweep":
        trace = base.trace or str(ensure_trace(trace_dir, "weighted4", _frames(base, SLICE_S),
                                               base.seed))
        return [(f"RAS-weighted4-i{i:g}-s{base.seed}",
                 base.replace(scheduler="RAS", trace=trace, bw_interval_s=i,
                              duration_s=SLICE_S))
                for i in BW_INTERVALS]
    if name == "congestion_sweep":
        trace = base.trace or str(ensure_trace(trace_dir, "weighted4", _frames(base),
                                               base.seed))
        return [(f"RAS-weighted4-d{int(d * 100)}-s{base.seed}",
                 base.replace(scheduler="RAS", trace=trace, duty_cycle=d, bw_interval_s=30.0))
                for d in (0.0, 0.25, 0.5, 0.75)]
    raise ConfigError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")


def run_one(item: Tuple[str, SimConfig]) -> RunReport:
    label, cfg = item
    return aggregate(run(cfg), label)


def run_batch(items: Sequence[Tuple[str, SimConfig]], jobs: int = 1) -> List[RunReport]:
    """Runs are independent, so they may go to separate processes."""
    if jobs <= 1:
        return [run_one(i) for i in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_one, items))


def run_preset(name: str, base: Optional[SimConfig] = None, trace_dir="traces",
               jobs: int = 1) -> List[RunReport]:
    Path(trace_dir).mkdir(parents=True, exist_ok=True)
    return run_batch(experiment_preset(name, base, trace_dir), jobs)
