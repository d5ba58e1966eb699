"""
Run-log aggregation and report output.

A run log is the list of records the simulator produces (one JSON object
per line on disk). :func:`aggregate` is a pure function of that list, and
:func:`report_json` serialises with sorted keys, so the same log always
yields the same bytes.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

# Frozen column order of the summary CSV; docs/report.md describes each one.
SUMMARY_COLUMNS = [
    "label", "scheduler", "trace", "seed", "bw_interval_s", "duty_cycle", "duration_s",
    "frames_total", "frames_completed", "frame_completion_rate",
    "hp_total", "hp_completed", "hp_rejected", "hp_alloc_direct", "hp_alloc_preempt",
    "hp_latency_direct_ms", "hp_latency_preempt_ms",
    "lp_total", "lp_completed", "lp_violated", "lp_rejected", "lp_preempted",
    "lp_reallocated", "lp_latency_initial_ms", "lp_latency_realloc_ms",
    "lp_offloaded", "lp_offloaded_completed", "offloaded_completion_rate",
    "alloc_2core", "alloc_4core", "frac_2core", "frac_4core",
    "preemptions", "cascade_overflow", "bw_updates", "bw_estimate_mean",
]

BREAKDOWNS = {
    # frame outcomes per run, the scheduler/load comparison
    "frames": ["label", "frames_total", "frames_completed", "frame_completion_rate"],
    # controller latency per request class
    "latency": ["label", "hp_latency_direct_ms", "hp_latency_preempt_ms",
                "lp_latency_initial_ms", "lp_latency_realloc_ms"],
    # task outcomes per priority class
    "tasks": ["label", "hp_completed", "hp_rejected", "hp_alloc_direct", "hp_alloc_preempt",
              "lp_completed", "lp_violated", "lp_rejected", "lp_preempted", "lp_reallocated"],
    # offloading under the bandwidth and congestion sweeps
    "network": ["label", "bw_interval_s", "duty_cycle", "frame_completion_rate",
                "lp_offloaded", "lp_offloaded_completed", "offloaded_completion_rate",
                "bw_updates", "bw_estimate_mean", "cascade_overflow"],
}


class LogParseError(ValueError):
    pass


@dataclass
class RunReport:
    label: str = ""
    scheduler: str = ""
    trace: str = ""
    seed: int = 0
    bw_interval_s: float = 0.0
    duty_cycle: float = 0.0
    duration_s: float = 0.0
    frames_total: int = 0
    frames_completed: int = 0
    frame_completion_rate: float = 0.0
    hp_total: int = 0
    hp_completed: int = 0
    hp_rejected: int = 0
    hp_alloc_direct: int = 0
    hp_alloc_preempt: int = 0
    hp_latency_direct_ms: float = 0.0
    hp_latency_preempt_ms: float = 0.0
    lp_total: int = 0
    lp_completed: int = 0
    lp_violated: int = 0
    lp_rejected: int = 0
    lp_preempted: int = 0
    lp_reallocated: int = 0
    lp_latency_initial_ms: float = 0.0
    lp_latency_realloc_ms: float = 0.0
    lp_offloaded: int = 0
    lp_offloaded_completed: int = 0
    offloaded_completion_rate: float = 0.0
    alloc_2core: int = 0
    alloc_4core: int = 0
    frac_2core: float = 0.0
    frac_4core: float = 0.0
    preemptions: int = 0
    cascade_overflow: int = 0
    bw_updates: int = 0
    bw_estimate_mean: float = 0.0
    bandwidth_series: List[List[float]] = field(default_factory=list)
    frames: List[dict] = field(default_factory=list)
    tasks: List[dict] = field(default_factory=list)

    def summary(self) -> Dict[str, object]:
        return {c: getattr(self, c) for c in SUMMARY_COLUMNS}

    def to_dict(self) -> dict:
        return asdict(self)


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values) if values else 0.0


def _rate(num: int, den: int) -> float:
    return num / den if den else 0.0


def run_label(cfg: dict) -> str:
    trace = Path(str(cfg.get("trace") or "trace")).stem
    return (f"{cfg.get('scheduler', '?')}-{trace}-i{cfg.get('bw_interval_s')}"
            f"-d{cfg.get('duty_cycle')}-s{cfg.get('seed')}")


def aggregate(records: Iterable[dict], label: Optional[str] = None) -> RunReport:
    """Compute every report field from the records of one run."""
    cfg: dict = {}
    decisions, frames, tasks, bw = [], [], [], []
    end = None
    for rec in records:
        rtype = rec.get("type")
        if rtype == "config":
            cfg = rec
        elif rtype == "decision":
            decisions.append(rec)
        elif rtype == "frame":
            frames.append(rec)
        elif rtype == "task":
            tasks.append(rec)
        elif rtype == "bw":
            bw.append(rec)
        elif rtype == "end":
            end = rec
    rep = RunReport()
    if cfg:
        rep.label = label or run_label(cfg)
        rep.scheduler = str(cfg.get("scheduler", ""))
        rep.trace = Path(str(cfg.get("trace") or "")).name
        rep.seed = int(cfg.get("seed", 0))
        rep.bw_interval_s = float(cfg.get("bw_interval_s", 0.0))
        rep.duty_cycle = float(cfg.get("duty_cycle", 0.0))
    elif label:
        rep.label = label
    if end is not None:
        rep.duration_s = float(end["t"])
        rep.cascade_overflow = int(end.get("overflow", 0))

    state = {t["id"]: t["state"] for t in tasks}
    rep.frames_total = len(frames)
    frame_rows = []
    for f in frames:
        ids = [f["hp"]] + list(f["lp"])
        done = all(state.get(i) == "Completed" for i in ids)
        rep.frames_completed += done
        frame_rows.append({"frame": f["frame"], "device": f["device"], "spawn": f["spawn"],
                           "tasks": len(ids), "completed": done})
    rep.frame_completion_rate = _rate(rep.frames_completed, rep.frames_total)
    rep.frames = frame_rows

    hp = [t for t in tasks if t["priority"] == "high"]
    lp = [t for t in tasks if t["priority"] == "low"]
    rep.hp_total, rep.lp_total = len(hp), len(lp)
    rep.hp_completed = sum(t["state"] == "Completed" for t in hp)
    rep.hp_rejected = sum(t["state"] == "Rejected" for t in hp)
    rep.lp_completed = sum(t["state"] == "Completed" for t in lp)
    rep.lp_violated = sum(t["state"] == "ViolatedDeadline" for t in lp)
    rep.lp_rejected = sum(t["state"] == "Rejected" for t in lp)
    rep.lp_preempted = sum(bool(t["preempted"]) for t in lp)
    offloaded = [t for t in lp if t.get("remote")]
    rep.lp_offloaded = len(offloaded)
    rep.lp_offloaded_completed = sum(t["state"] == "Completed" for t in offloaded)
    rep.offloaded_completion_rate = _rate(rep.lp_offloaded_completed, rep.lp_offloaded)
    rep.tasks = [dict((k, v) for k, v in t.items() if k != "type") for t in tasks]

    # latency of the HP path: its own call, plus the pre-emption call if one ran
    hp_call: Dict[int, float] = {}
    direct, via_preempt, lp_initial, lp_realloc = [], [], [], []
    for d in decisions:
        lat_ms = d["latency_us"] / 1000.0
        kind, ok = d["kind"], d["outcome"] == "Allocated"
        if kind == "hp":
            hp_call[d["tasks"][0]] = lat_ms
            if ok:
                direct.append(lat_ms)
        elif kind == "preempt":
            rep.preemptions += ok
            if ok:
                via_preempt.append(hp_call.get(d["tasks"][0], 0.0) + lat_ms)
        elif kind == "lp":
            lp_initial.append(lat_ms)
        elif kind == "realloc":
            lp_realloc.append(lat_ms)
            rep.lp_reallocated += len(d["allocations"]) if ok else 0
        if ok and kind in ("lp", "realloc"):
            for a in d["allocations"]:
                if a["cores"] == 4:
                    rep.alloc_4core += 1
                else:
                    rep.alloc_2core += 1
    rep.hp_alloc_direct, rep.hp_alloc_preempt = len(direct), len(via_preempt)
    rep.hp_latency_direct_ms = _mean(direct)
    rep.hp_latency_preempt_ms = _mean(via_preempt)
    rep.lp_latency_initial_ms = _mean(lp_initial)
    rep.lp_latency_realloc_ms = _mean(lp_realloc)
    n_alloc = rep.alloc_2core + rep.alloc_4core
    rep.frac_2core = _rate(rep.alloc_2core, n_alloc)
    rep.frac_4core = _rate(rep.alloc_4core, n_alloc)

    rep.bandwidth_series = [[b["t"], b["estimate"]] for b in bw]
    rep.bw_updates = len(bw)
    rep.bw_estimate_mean = _mean([b["estimate"] for b in bw])
    return rep


def parse_log(lines: Iterable[str]) -> List[dict]:
    """JSON-lines to records; errors name the offending line."""
    records = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogParseError(f"line {lineno}: {exc.msg}") from None
        if not isinstance(rec, dict) or "type" not in rec:
            raise LogParseError(f"line {lineno}: record without a type")
        missing = _REQUIRED.get(rec["type"], ())
        missing = [k for k in missing if k not in rec]
        if missing:
            raise LogParseError(f"line {lineno}: {rec['type']} record lacks {', '.join(missing)}")
        records.append(rec)
    return records


_REQUIRED = {
    "decision": ("kind", "outcome", "tasks", "latency_us", "allocations"),
    "frame": ("frame", "device", "hp", "lp"),
    "task": ("id", "priority", "state", "preempted"),
    "bw": ("t", "estimate"),
    "end": ("t",),
}


def load_log(path) -> List[dict]:
    with open(path) as fh:
        return parse_log(fh)


def aggregate_file(path, label: Optional[str] = None) -> RunReport:
    return aggregate(load_log(path), label)


# ------------------------------------------------------------------ output

def report_json(report: RunReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=1) + "\n"


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(round(value, 9))
    return str(value)


def write_csv(path, columns: Sequence[str], rows: Iterable[Dict[str, object]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def core_mix_table(reports: Sequence[RunReport]) -> List[List[str]]:
    """Two rows (2-core, 4-core) by one column per run, in percent."""
    header = ["config"] + [r.label for r in reports]
    two = ["2-core"] + [f"{100 * r.frac_2core:.2f}" for r in reports]
    four = ["4-core"] + [f"{100 * r.frac_4core:.2f}" for r in reports]
    return [header, two, four]


def emit(reports: Union[RunReport, Sequence[RunReport]], out_dir, fmt: str = "csv") -> List[Path]:
    """Write ``summary`` plus the breakdown tables; returns the files written."""
    if isinstance(reports, RunReport):
        reports = [reports]
    if fmt not in ("csv", "json", "both"):
        raise ValueError(f"unknown format {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    rows = [r.summary() for r in reports]
    if fmt in ("csv", "both"):
        p = out / "summary.csv"
        write_csv(p, SUMMARY_COLUMNS, rows)
        written.append(p)
        for name, cols in BREAKDOWNS.items():
            p = out / f"{name}.csv"
            write_csv(p, cols, rows)
            written.append(p)
        p = out / "core_mix.csv"
        with open(p, "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(core_mix_table(reports))
        written.append(p)
    if fmt in ("json", "both"):
        for r in reports:
            p = out / f"{r.label or 'run'}.report.json"
            p.write_text(report_json(r))
            written.append(p)
        p = out / "summary.json"
        p.write_text(json.dumps({"columns": SUMMARY_COLUMNS, "runs": rows},
                                sort_keys=True, indent=1) + "\n")
        written.append(p)
    return written
