"""Run statistics: throughput, wavelength usage, latency distribution,
buffer occupancy, and their CSV/JSON emission.

Quantiles use the midpoint convention (the median of {100,200,300,400} is
250).  "Tail latency" is reported as three numbers (p99, p99.9, max).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .core import Algorithm, ResourceGrid, SizeDistribution, ValidatedConfig

CSV_COLUMNS = [
    "algorithm",
    "epoch_ns",
    "requests_per_node",
    "distribution",
    "input_load",
    "seed",
    "n_epochs",
    "offered_slots",
    "granted_slots",
    "raw_throughput",
    "throughput",
    "wavelength_usage",
    "latency_mean_ns",
    "latency_median_ns",
    "latency_p99_ns",
    "latency_p999_ns",
    "latency_max_ns",
    "latency_samples",
    "tx_buffer_mean_bytes",
    "sched_buffer_mean_requests",
    "sched_buffer_mean_bytes",
    "saturated",
]


def quantile(samples: np.ndarray, q: float) -> float:
    """Midpoint-convention quantile of a latency sample vector."""
    if len(samples) == 0:
        raise ValueError("quantile of an empty sample set is undefined")
    return float(np.quantile(samples, q, method="midpoint"))


def latency_cdf(samples: Sequence[float]) -> List[Tuple[float, float]]:
    """Nondecreasing step function as (latency_ns, cumulative fraction).

    Empty input yields an explicit empty result (quantiles undefined).
    """
    arr = np.sort(np.asarray(samples, dtype=np.float64))
    n = len(arr)
    if n == 0:
        return []
    return [(float(v), (i + 1) / n) for i, v in enumerate(arr)]


def wavelength_usage(grids: Iterable[ResourceGrid], algorithm: Algorithm) -> float:
    """Average wavelength usage over per-epoch grids.

    Epoch-level counts the fraction of wavelengths carrying any allocation
    during the epoch; slot-level counts the per-timeslot occupied fraction,
    averaged over slots.
    """
    total = 0.0
    count = 0
    for grid in grids:
        if algorithm is Algorithm.EPOCH_LEVEL:
            total += grid.used_wavelengths() / grid.n_wavelengths
        else:
            total += grid.occupied_cells() / (grid.n_wavelengths * grid.slots_per_epoch)
        count += 1
    if count == 0:
        raise ValueError("wavelength_usage requires at least one epoch grid")
    return total / count


def saturation_point(curve: Sequence[Tuple[float, float]]) -> float:
    """Smallest load whose throughput is within 1% of the curve maximum."""
    if len(curve) < 2:
        raise ValueError("saturation_point needs at least two (load, throughput) points")
    loads = [p[0] for p in curve]
    if sorted(loads) != loads:
        raise ValueError("curve must be sampled on an increasing load grid")
    peak = max(p[1] for p in curve)
    for load, value in curve:
        if value >= 0.99 * peak:
            return load
    return curve[-1][0]


@dataclass
class RunMetrics:
    """Aggregated statistics of one simulated run."""

    algorithm: Algorithm
    epoch_ns: int
    requests_per_node: int
    distribution: SizeDistribution
    input_load: float
    seed: int
    n_epochs: int
    offered_slots: int
    granted_slots: int
    raw_throughput: float
    throughput: float
    wavelength_usage: float
    latency_mean_ns: float
    latency_median_ns: float
    latency_p99_ns: float
    latency_p999_ns: float
    latency_max_ns: float
    tx_buffer_mean_bytes: float
    sched_buffer_mean_requests: float
    sched_buffer_mean_bytes: float
    saturated: bool
    latency_samples: np.ndarray = field(repr=False, default=None)
    event_log: object = field(repr=False, default=None)

    def __post_init__(self) -> None:
        if not 0.0 <= self.throughput <= 1.0:
            raise ValueError(f"throughput {self.throughput} outside [0, 1]")
        if not 0.0 <= self.wavelength_usage <= 1.0:
            raise ValueError(f"wavelength usage {self.wavelength_usage} outside [0, 1]")
        if not (
            self.latency_median_ns
            <= self.latency_p99_ns
            <= self.latency_p999_ns
            <= self.latency_max_ns
        ):
            raise ValueError("latency quantiles are not monotone")

    @property
    def n_latency_samples(self) -> int:
        return 0 if self.latency_samples is None else len(self.latency_samples)

    def csv_row(self) -> List:
        return [
            self.algorithm.value,
            self.epoch_ns,
            self.requests_per_node,
            self.distribution.value,
            f"{self.input_load:.6g}",
            self.seed,
            self.n_epochs,
            self.offered_slots,
            self.granted_slots,
            f"{self.raw_throughput:.8f}",
            f"{self.throughput:.8f}",
            f"{self.wavelength_usage:.8f}",
            f"{self.latency_mean_ns:.3f}",
            f"{self.latency_median_ns:.3f}",
            f"{self.latency_p99_ns:.3f}",
            f"{self.latency_p999_ns:.3f}",
            f"{self.latency_max_ns:.3f}",
            self.n_latency_samples,
            f"{self.tx_buffer_mean_bytes:.3f}",
            f"{self.sched_buffer_mean_requests:.3f}",
            f"{self.sched_buffer_mean_bytes:.3f}",
            int(self.saturated),
        ]

    def to_json_dict(self, include_cdf: bool = True) -> dict:
        out = {
            "algorithm": self.algorithm.value,
            "epoch_ns": self.epoch_ns,
            "requests_per_node": self.requests_per_node,
            "distribution": self.distribution.value,
            "input_load": self.input_load,
            "seed": self.seed,
            "n_epochs": self.n_epochs,
            "offered_slots": self.offered_slots,
            "granted_slots": self.granted_slots,
            "raw_throughput": self.raw_throughput,
            "throughput": self.throughput,
            "wavelength_usage": self.wavelength_usage,
            "latency_mean_ns": self.latency_mean_ns,
            "latency_median_ns": self.latency_median_ns,
            "latency_p99_ns": self.latency_p99_ns,
            "latency_p999_ns": self.latency_p999_ns,
            "latency_max_ns": self.latency_max_ns,
            "latency_samples": self.n_latency_samples,
            "tx_buffer_mean_bytes": self.tx_buffer_mean_bytes,
            "sched_buffer_mean_requests": self.sched_buffer_mean_requests,
            "sched_buffer_mean_bytes": self.sched_buffer_mean_bytes,
            "saturated": self.saturated,
        }
        if include_cdf:
            cdf = latency_cdf(self.latency_samples if self.latency_samples is not None else [])
            out["latency_cdf_ns"] = [v for v, _ in cdf]
            out["latency_cdf_fraction"] = [f for _, f in cdf]
        return out


def build_metrics(
    config: ValidatedConfig,
    seed: int,
    n_epochs: int,
    offered_slots: int,
    granted_slots: int,
    throughput: float,
    wavelength_usage: float,
    latency_samples: np.ndarray,
    tx_buffer_mean_bytes: float,
    sched_buffer_mean_requests: float,
    sched_buffer_mean_bytes: float,
    saturated: bool,
) -> RunMetrics:
    if len(latency_samples):
        lat_mean = float(latency_samples.mean())
        lat_median = quantile(latency_samples, 0.5)
        lat_p99 = quantile(latency_samples, 0.99)
        lat_p999 = quantile(latency_samples, 0.999)
        lat_max = float(latency_samples.max())
    else:
        lat_mean = lat_median = lat_p99 = lat_p999 = lat_max = 0.0
    return RunMetrics(
        algorithm=config.algorithm,
        epoch_ns=config.epoch_ns,
        requests_per_node=config.traffic.requests_per_node,
        distribution=config.traffic.distribution,
        input_load=config.traffic.input_load,
        seed=seed,
        n_epochs=n_epochs,
        offered_slots=offered_slots,
        granted_slots=granted_slots,
        raw_throughput=granted_slots / offered_slots if offered_slots else 0.0,
        throughput=throughput,
        wavelength_usage=wavelength_usage,
        latency_mean_ns=lat_mean,
        latency_median_ns=lat_median,
        latency_p99_ns=lat_p99,
        latency_p999_ns=lat_p999,
        latency_max_ns=lat_max,
        tx_buffer_mean_bytes=tx_buffer_mean_bytes,
        sched_buffer_mean_requests=sched_buffer_mean_requests,
        sched_buffer_mean_bytes=sched_buffer_mean_bytes,
        saturated=saturated,
        latency_samples=latency_samples,
    )


def write_csv(rows: List[RunMetrics], path: str) -> None:
    """Emit one CSV row per run; column order is part of the contract."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for m in rows:
            fh.write(",".join(str(v) for v in m.csv_row()) + "\n")


def write_json(metrics: RunMetrics, path: str, include_cdf: bool = True) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(metrics.to_json_dict(include_cdf=include_cdf), fh, indent=2)
        fh.write("\n")
