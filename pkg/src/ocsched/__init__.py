"""Discrete-time simulator and techno-economic models for a star-coupler
optical circuit-switched sub-network with hardware-style iterative
wavelength/timeslot schedulers (epoch-level and slot-level)."""

from .arbiter import RoundRobinArbiter
from .core import (
    Algorithm,
    ConfigError,
    Grant,
    GridAuditError,
    NetworkConfig,
    Request,
    ResourceGrid,
    SchedulerConfig,
    SizeDistribution,
    TrafficConfig,
    ValidatedConfig,
    compute_iterations,
    default_config_text,
    load_config,
    validate,
)
from .metrics import RunMetrics, latency_cdf, saturation_point, wavelength_usage
from .scheduler import EpochOutcome, SchedulerState, plan_buffer_iterations, schedule_epoch
from .sim import effective_throughput, propagation_overhead_ns, run
from .traffic import TrafficGenerator, sample_size

__version__ = "0.1.0"

__all__ = [
    "Algorithm",
    "ConfigError",
    "EpochOutcome",
    "Grant",
    "GridAuditError",
    "NetworkConfig",
    "Request",
    "ResourceGrid",
    "RoundRobinArbiter",
    "RunMetrics",
    "SchedulerConfig",
    "SchedulerState",
    "SizeDistribution",
    "TrafficConfig",
    "TrafficGenerator",
    "ValidatedConfig",
    "compute_iterations",
    "default_config_text",
    "effective_throughput",
    "latency_cdf",
    "load_config",
    "plan_buffer_iterations",
    "propagation_overhead_ns",
    "run",
    "sample_size",
    "saturation_point",
    "schedule_epoch",
    "validate",
    "wavelength_usage",
]
