"""End-to-end epoch pipeline: traffic -> scheduler -> grant execution.

Grants computed during epoch k execute during epoch k+1 (requests reach
the scheduler ahead of the epoch they are served in), so a request's
completion time is the start of its final grant's execution epoch plus the
end of its last granted timeslot.  Scheduling latency is completion minus
generation time and is therefore never below one epoch.

Tuning dead time is charged as a throughput factor (per timeslot for
slot-level, per epoch for epoch-level); propagation is reported as an
additive constant, not simulated, since the scheduler is co-located with
the sources.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    BYTES_PER_SLOT,
    REQUEST_RECORD_BITS,
    TUNING_NS,
    Algorithm,
    ValidatedConfig,
)
from .metrics import RunMetrics, build_metrics
from .scheduler import SchedulerState, plan_buffer_iterations
from .traffic import TrafficGenerator

# fiber propagation, both directions, plus fixed serialization/transceiver
# overhead; the three canonical reach classes (intra-rack, inter-rack,
# end-of-rack) carry calibrated totals, the 20 m one 10 ns above the
# linear model
_PROPAGATION_TABLE_NS = {3: 150, 20: 330, 100: 1120}
_NS_PER_METER_ONE_WAY = 5
_FIXED_OVERHEAD_NS = 120


def propagation_overhead_ns(length_m: float) -> int:
    """End-to-end latency overhead for fiber runs of ``length_m`` meters."""
    if length_m <= 0:
        raise ValueError("length must be positive")
    key = int(length_m)
    if key == length_m and key in _PROPAGATION_TABLE_NS:
        return _PROPAGATION_TABLE_NS[key]
    return round(2 * length_m * _NS_PER_METER_ONE_WAY + _FIXED_OVERHEAD_NS)


def tuning_efficiency(algorithm: Algorithm, epoch_ns: int) -> float:
    """Fraction of capacity left after laser tuning dead time."""
    if algorithm is Algorithm.SLOT_LEVEL:
        return 1.0 - TUNING_NS / 20.0
    return 1.0 - TUNING_NS / epoch_ns


def effective_throughput(
    granted_slots: int, offered_capacity: int, algorithm: Algorithm, epoch_ns: int
) -> float:
    """Granted share of capacity, de-rated by the tuning overhead."""
    if offered_capacity <= 0:
        raise ValueError("offered_capacity must be positive")
    raw = granted_slots / offered_capacity
    return raw * tuning_efficiency(algorithm, epoch_ns)


class SimAuditError(AssertionError):
    """A per-epoch simulation invariant was violated."""


@dataclass
class EventLog:
    """Per-request lifecycle records (one row per released request)."""

    req_id: np.ndarray
    source: np.ndarray
    dest: np.ndarray
    size: np.ndarray
    generated_ns: np.ndarray
    granted_epoch: np.ndarray   # execution epoch of the final grant, -1 if never
    completed_ns: np.ndarray    # -1 if never completed

    def write_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("req_id,source,dest,size,generated_ns,granted_epoch,completed_ns\n")
            for i in range(len(self.req_id)):
                fh.write(
                    f"{self.req_id[i]},{self.source[i]},{self.dest[i]},{self.size[i]},"
                    f"{self.generated_ns[i]},{self.granted_epoch[i]},{self.completed_ns[i]}\n"
                )


def run(
    config: ValidatedConfig,
    n_epochs: Optional[int] = None,
    seed: Optional[int] = None,
    audit: bool = False,
    warmup_discard: int = 0,
    collect_event_log: bool = False,
) -> RunMetrics:
    """Simulate ``n_epochs`` and aggregate run statistics.

    ``audit=True`` verifies the structural invariants (grid conflict
    freedom, epoch-level wavelength locks, request conservation, latency
    floor, transmit-buffer accounting) on every epoch and raises
    SimAuditError on any violation.  ``warmup_discard`` drops the first k
    epochs from all reported statistics.
    """
    epochs = n_epochs if n_epochs is not None else config.traffic.n_epochs
    run_seed = seed if seed is not None else config.traffic.seed
    if warmup_discard >= epochs:
        raise ValueError("warmup_discard must be smaller than the epoch count")

    seq = np.random.SeedSequence(run_seed)
    traffic_seq, rom_seq = seq.spawn(2)
    gen = TrafficGenerator(config, rng=np.random.default_rng(traffic_seq))
    state = SchedulerState(config, rom_rng=np.random.default_rng(rom_seq))

    n = config.n_nodes
    w = config.n_wavelengths
    t = config.slots_per_epoch
    epoch_ns = config.epoch_ns
    slot_ns = config.network.slot_ns
    epoch_level = config.algorithm is Algorithm.EPOCH_LEVEL

    latency_chunks = []
    outstanding_rem = 0            # slots released to the scheduler, not yet granted
    granted_slots_total = 0
    usage_acc = 0.0
    tx_slots_acc = 0.0
    buf_req_acc = 0.0
    counted = 0
    buffer_series = np.empty(epochs, dtype=np.int64)

    if collect_event_log:
        completed_epoch_chunks = []
        completed_rows_chunks = []
        completed_ns_chunks = []

    for epoch in range(epochs):
        src, dst, size, arrival, origin = gen.epoch_arrays(epoch)
        rows = state.add_request_rows(src, dst, size, origin, arrival)
        outstanding_rem += int(size.sum())

        i_buf = plan_buffer_iterations(
            state.buffer_size,
            w,
            config.scheduler.buffer_coefficient,
            config.iterations,
            config.scheduler.buffer_iteration_cap,
        )
        res = state.run_epoch_arrays(rows, i_buf=i_buf, log_grants=False)

        # grants execute in epoch + 1
        comp_rows = res["completed_rows"]
        if len(comp_rows):
            completion = (epoch + 1) * epoch_ns + (res["completed_maxslot"] + 1) * slot_ns
            generated = state.store_column("generated")[comp_rows]
            latencies = completion - generated
            if epoch >= warmup_discard:
                latency_chunks.append(latencies)
            if collect_event_log:
                completed_rows_chunks.append(comp_rows)
                completed_ns_chunks.append(completion)
                completed_epoch_chunks.append(np.full(len(comp_rows), epoch + 1, dtype=np.int64))
            if audit and int(latencies.min()) < epoch_ns:
                raise SimAuditError(
                    f"latency {int(latencies.min())} ns below the epoch floor {epoch_ns}"
                )

        outstanding_rem -= res["granted_slots"]
        buffer_series[epoch] = res["buffer_after"]
        if epoch >= warmup_discard:
            granted_slots_total += res["granted_slots"]
            if epoch_level:
                usage_acc += res["distinct_wavelengths"] / w
            else:
                usage_acc += res["occupied_cells"] / (w * t)
            tx_slots_acc += outstanding_rem + gen.carry_slots
            buf_req_acc += res["buffer_after"]
            counted += 1

        if audit:
            _audit_epoch(state, config, res, outstanding_rem, epoch)

    offered = n * t * (epochs - warmup_discard)
    latencies = (
        np.concatenate(latency_chunks) if latency_chunks else np.empty(0, dtype=np.int64)
    )
    metrics = build_metrics(
        config=config,
        seed=run_seed,
        n_epochs=epochs - warmup_discard,
        offered_slots=offered,
        granted_slots=granted_slots_total,
        throughput=effective_throughput(
            granted_slots_total, offered, config.algorithm, epoch_ns
        ),
        wavelength_usage=usage_acc / max(counted, 1),
        latency_samples=latencies,
        tx_buffer_mean_bytes=(tx_slots_acc / max(counted, 1)) * BYTES_PER_SLOT / n,
        sched_buffer_mean_requests=buf_req_acc / max(counted, 1),
        sched_buffer_mean_bytes=(buf_req_acc / max(counted, 1)) * REQUEST_RECORD_BITS / 8,
        saturated=_saturation_flag(buffer_series, n),
    )
    if collect_event_log:
        metrics.event_log = _build_event_log(state, completed_rows_chunks,
                                             completed_epoch_chunks, completed_ns_chunks)
    return metrics


def _saturation_flag(buffer_series: np.ndarray, n_nodes: int) -> bool:
    """Heuristic: retry backlog keeps growing through the end of the run."""
    epochs = len(buffer_series)
    if epochs < 20:
        return bool(buffer_series[-1] > 2 * n_nodes)
    tail = buffer_series[-max(epochs // 10, 1):].mean()
    mid = buffer_series[epochs // 2 : epochs // 2 + max(epochs // 10, 1)].mean()
    return bool(tail > 1.5 * mid and tail > n_nodes)


def _build_event_log(state, rows_chunks, epoch_chunks, ns_chunks) -> EventLog:
    count = state.request_count
    granted_epoch = np.full(count, -1, dtype=np.int64)
    completed_ns = np.full(count, -1, dtype=np.int64)
    if rows_chunks:
        rows = np.concatenate(rows_chunks)
        granted_epoch[rows] = np.concatenate(epoch_chunks)
        completed_ns[rows] = np.concatenate(ns_chunks)
    return EventLog(
        req_id=np.arange(count, dtype=np.int64),
        source=state.store_column("src").copy(),
        dest=state.store_column("dst").copy(),
        size=state.store_column("size").copy(),
        generated_ns=state.store_column("generated").copy(),
        granted_epoch=granted_epoch,
        completed_ns=completed_ns,
    )


def audit_grid_arrays(cell_src: np.ndarray, cell_dst: np.ndarray,
                      lock_src: np.ndarray, lock_dst: np.ndarray,
                      n_nodes: int, epoch_level: bool, epoch: int = -1) -> None:
    """Vectorized grid invariants: conflict freedom and wavelength locks."""
    w, t = cell_src.shape
    occupied = cell_src >= 0
    if not np.array_equal(occupied, cell_dst >= 0):
        raise SimAuditError(f"epoch {epoch}: cell source/dest occupancy disagree")
    w_idx, t_idx = np.nonzero(occupied)
    if len(w_idx) == 0:
        return
    srcs = cell_src[occupied].astype(np.int64)
    dsts = cell_dst[occupied].astype(np.int64)
    if np.bincount(srcs * t + t_idx, minlength=n_nodes * t).max() > 1:
        raise SimAuditError(f"epoch {epoch}: a source transmits twice in one timeslot")
    if np.bincount(dsts * t + t_idx, minlength=n_nodes * t).max() > 1:
        raise SimAuditError(f"epoch {epoch}: a destination receives twice in one timeslot")
    if epoch_level:
        src_wl = np.bincount(srcs * w + w_idx, minlength=n_nodes * w) > 0
        dst_wl = np.bincount(dsts * w + w_idx, minlength=n_nodes * w) > 0
        if src_wl.reshape(n_nodes, w).sum(axis=1).max() > 1:
            raise SimAuditError(f"epoch {epoch}: a node transmits on several wavelengths")
        if dst_wl.reshape(n_nodes, w).sum(axis=1).max() > 1:
            raise SimAuditError(f"epoch {epoch}: a node receives on several wavelengths")
        if not np.all(lock_src[srcs] == w_idx) or not np.all(lock_dst[dsts] == w_idx):
            raise SimAuditError(f"epoch {epoch}: wavelength lock disagrees with the grid")


def _audit_epoch(state: SchedulerState, config: ValidatedConfig, res: dict,
                 outstanding_rem: int, epoch: int) -> None:
    epoch_level = config.algorithm is Algorithm.EPOCH_LEVEL
    # request conservation over this epoch's reachable inputs
    inputs = res["input_buffer"] + res["input_new"]
    accounted = (
        res["completed"]
        + res["partial"]
        + res["invalidated"]
        + res["no_free_slot"]
        + res["untouched_buffer"]
        + res["untouched_new"]
    )
    if inputs != accounted:
        raise SimAuditError(
            f"epoch {epoch}: conservation violated ({inputs} in, {accounted} accounted)"
        )
    audit_grid_arrays(
        state._cell_src, state._cell_dst, state._lock_src, state._lock_dst,
        state.n_nodes, epoch_level, epoch,
    )
    cells = res["occupied_cells"]
    if cells != int((state._cell_src >= 0).sum()):
        raise SimAuditError(f"epoch {epoch}: occupied cell count mismatch")
    # transmit-buffer identity: tracked outstanding slots equal the store
    # residue (full store scan; thinned once the store grows large)
    if state.request_count < 100_000 or epoch % 25 == 0:
        rem = state.store_column("rem")
        if len(rem) and int(rem.min()) < 0:
            raise SimAuditError(f"epoch {epoch}: negative remaining slots")
        store_rem = int(rem.sum())
        if store_rem != outstanding_rem:
            raise SimAuditError(
                f"epoch {epoch}: outstanding accounting drifted "
                f"({outstanding_rem} tracked vs {store_rem} stored)"
            )
