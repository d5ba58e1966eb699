"""Trace-driven simulation of the edge network."""

from .config import LATENCY_TABLES, ConfigError, SimConfig, load_config, parse_config
from .engine import EventKind, Simulator, dump_log, run
from .traces import TRACE_KINDS, ensure_trace, generate_trace
from .traffic import burst_on, effective_bandwidth, probe_samples

__all__ = [
    "LATENCY_TABLES", "ConfigError", "SimConfig", "load_config", "parse_config",
    "EventKind", "Simulator", "dump_log", "run", "TRACE_KINDS", "ensure_trace",
    "generate_trace", "burst_on", "effective_bandwidth", "probe_samples",
]
