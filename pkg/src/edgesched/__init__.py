"""Deadline-constrained task offloading for edge devices: availability-window
scheduling, a discretised network link and a trace-driven simulator."""

__version__ = "0.1.0"
