"""Synthetic trace files: uniform and weighted task-count distributions."""

from __future__ import annotations

import random
from pathlib import Path
from typing import List, Optional

from ..model import N_DEVICES, TraceEntry, format_trace

TRACE_KINDS = ("uniform", "weighted1", "weighted2", "weighted3", "weighted4")
ALL_VALUES = (-1, 0, 1, 2, 3, 4)


def distribution(kind: str, dominant: float = 0.7) -> List[tuple]:
    kind = kind.lower()
    if kind == "uniform":
        return [(v, 0.25) for v in (1, 2, 3, 4)]
    if kind.startswith("weighted") and kind[-1] in "1234":
        x = int(kind[-1])
        rest = (1 - dominant) / (len(ALL_VALUES) - 1)
        return [(v, dominant if v == x else rest) for v in ALL_VALUES]
    raise ValueError(f"unknown trace kind {kind!r}; expected one of {TRACE_KINDS}")


def generate_entries(kind: str, frames: int, seed: int, dominant: float = 0.7,
                     n_devices: int = N_DEVICES) -> List[TraceEntry]:
    if frames <= 0:
        raise ValueError("frames must be positive")
    dist = distribution(kind, dominant)
    values = [v for v, _ in dist]
    weights = [w for _, w in dist]
    rng = random.Random(seed)
    return [TraceEntry(i, tuple(rng.choices(values, weights, k=n_devices)))
            for i in range(frames)]


def generate_trace(kind: str, frames: int, seed: int, path=None, dominant: float = 0.7,
                   n_devices: int = N_DEVICES) -> str:
    """Render a trace; written to ``path`` when given. Same seed, same bytes."""
    entries = generate_entries(kind, frames, seed, dominant, n_devices)
    text = format_trace(entries, header=f"kind={kind.lower()} frames={frames} seed={seed}")
    if path is not None:
        Path(path).write_text(text)
    return text


def trace_path(directory, kind: str, frames: int, seed: int) -> Path:
    return Path(directory) / f"{kind.lower()}_f{frames}_s{seed}.trace"


def ensure_trace(directory, kind: str, frames: int, seed: int) -> Path:
    path = trace_path(directory, kind, frames, seed)
    if not path.exists():
        Path(directory).mkdir(parents=True, exist_ok=True)
        generate_trace(kind, frames, seed, path)
    return path
