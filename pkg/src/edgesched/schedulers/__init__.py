"""The resource-availability scheduler (RAS) and the exhaustive baseline (WPS)."""

from .base import (
    BaseScheduler,
    LpRequest,
    Outcome,
    Placement,
    PreemptionRequest,
    SchedulerDecision,
)
from .ras import RAScheduler
from .wps import WPScheduler, earliest_gap, earliest_start

SCHEDULERS = {"RAS": RAScheduler, "WPS": WPScheduler}


def make_scheduler(name: str, device_ids, **kwargs) -> BaseScheduler:
    try:
        cls = SCHEDULERS[name.upper()]
    except KeyError:
        raise ValueError(f"unknown scheduler {name!r}; expected RAS or WPS") from None
    return cls(device_ids, **kwargs)


__all__ = [
    "BaseScheduler", "LpRequest", "Outcome", "Placement", "PreemptionRequest",
    "SchedulerDecision", "RAScheduler", "WPScheduler", "SCHEDULERS", "make_scheduler",
    "earliest_gap", "earliest_start",
]
