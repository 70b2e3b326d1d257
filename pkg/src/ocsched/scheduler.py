"""Epoch-level and slot-level resource allocation.

Both algorithms share a three-stage pipeline per iteration:

1. node contention resolution: destination round-robin arbiters pick at
   most one winner per destination (slot-level first narrows each source's
   request set with a source arbiter);
2. wavelength decision: reuse an epoch lock when one endpoint already has
   one, reject on contradicting locks, otherwise consume the source's
   pseudo-random wavelength ROM, all subject to one free timeslot;
3. wavelength contention resolution: per-wavelength arbiters pick one
   winner per wavelength, then the timeslot allocator grants the lowest
   free slots shared by wavelength, source and destination.

Epoch-level grants lock both endpoints to the chosen wavelength for the
whole epoch and grant multi-slot blocks.  Slot-level starts with a coarse
phase of multi-slot grants, then fine iterations granting one timeslot per
source per iteration to fill fragments.  Failed and partial requests are
buffered and retried in later epochs; the first ``i_buf`` iterations of an
epoch serve the buffer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import _kernel
from .arbiter import RoundRobinArbiter
from .core import (
    Algorithm,
    Grant,
    Request,
    ResourceGrid,
    ValidatedConfig,
)

_STORE_FIELDS = ("src", "dst", "size", "rem", "origin", "generated", "retry", "maxslot")


def plan_buffer_iterations(
    buffer_size: int,
    n_wavelengths: int,
    buffer_coefficient: float,
    iterations: int,
    buffer_iteration_cap: float = 0.75,
) -> int:
    """Iterations devoted to buffered retries this epoch.

    Scales with the buffer backlog (up to ``n_wavelengths`` grants are
    produced per iteration) and is capped to leave iterations for new
    requests.
    """
    if buffer_size <= 0:
        return 0
    want = math.ceil(buffer_coefficient * buffer_size / n_wavelengths)
    cap = int(buffer_iteration_cap * iterations)
    return max(0, min(want, cap))


@dataclass
class EpochOutcome:
    """Ledger of one scheduled epoch.

    Every input request (visible buffer + new) lands in exactly one of:
    fully granted, invalidated (re-buffered), or buffered (partial,
    no-free-slot and untouched requests).
    """

    grants: List[Grant]
    invalidated: List[Request]
    buffered: List[Request]
    iterations_used: int
    buffer_iterations: int
    stats: Dict[str, int] = field(default_factory=dict)


class SchedulerState:
    """Persistent scheduler state across epochs (array-backed).

    Arbiter pointers, the wavelength ROM and the retry buffer survive from
    epoch to epoch, as hardware registers would.  The request store grows
    as traffic arrives; buffered requests are row indices into it.
    """

    def __init__(
        self,
        config: ValidatedConfig,
        rom_rng: Optional[np.random.Generator] = None,
        store_capacity: int = 4096,
    ):
        self.config = config
        n = config.n_nodes
        w = config.n_wavelengths
        t = config.slots_per_epoch
        self.n_nodes = n
        self.n_wavelengths = w
        self.slots_per_epoch = t
        self.algorithm = config.algorithm

        self.dest_pointers = np.zeros(n, dtype=np.int64)
        self.source_pointers = np.zeros(n, dtype=np.int64)
        self.wavelength_pointers = np.zeros(w, dtype=np.int64)
        rng = rom_rng if rom_rng is not None else np.random.default_rng(config.traffic.seed)
        self.rom = rng.integers(0, w, size=(n, t), dtype=np.int64)
        self.rom_cursor = np.zeros(n, dtype=np.int64)

        self._cap = store_capacity
        self._count = 0
        self._store = {
            "src": np.empty(store_capacity, dtype=np.int64),
            "dst": np.empty(store_capacity, dtype=np.int64),
            "size": np.empty(store_capacity, dtype=np.int64),
            "rem": np.empty(store_capacity, dtype=np.int64),
            "origin": np.empty(store_capacity, dtype=np.int64),
            "generated": np.empty(store_capacity, dtype=np.int64),
            "retry": np.zeros(store_capacity, dtype=np.int64),
            "maxslot": np.full(store_capacity, -1, dtype=np.int64),
        }
        self._status = np.zeros(store_capacity, dtype=np.int8)

        self._qcap = 256
        self._buf = np.empty((n, self._qcap), dtype=np.int64)
        self._buf_head = np.zeros(n, dtype=np.int64)
        self._buf_tail = np.zeros(n, dtype=np.int64)

        # scratch reused across epochs
        self._cell_src = np.full((w, t), -1, dtype=np.int32)
        self._cell_dst = np.full((w, t), -1, dtype=np.int32)
        self._lock_src = np.full(n, -1, dtype=np.int64)
        self._lock_dst = np.full(n, -1, dtype=np.int64)
        self._out_stats = np.zeros(16, dtype=np.int64)
        self._requests_by_row: Dict[int, Request] = {}

    # --- store management ---

    @property
    def request_count(self) -> int:
        return self._count

    @property
    def buffer_size(self) -> int:
        return int((self._buf_tail - self._buf_head).sum())

    def store_column(self, name: str) -> np.ndarray:
        return self._store[name][: self._count]

    def _grow_store(self, need: int) -> None:
        cap = self._cap
        while cap < need:
            cap *= 2
        for key in _STORE_FIELDS:
            old = self._store[key]
            new = (
                np.zeros(cap, dtype=np.int64)
                if key == "retry"
                else np.full(cap, -1, dtype=np.int64)
                if key == "maxslot"
                else np.empty(cap, dtype=np.int64)
            )
            new[: self._count] = old[: self._count]
            self._store[key] = new
        status = np.zeros(cap, dtype=np.int8)
        status[: self._count] = self._status[: self._count]
        self._status = status
        self._cap = cap

    def add_request_rows(
        self,
        src: np.ndarray,
        dst: np.ndarray,
        size: np.ndarray,
        origin: np.ndarray,
        generated: np.ndarray,
    ) -> np.ndarray:
        m = len(src)
        if self._count + m > self._cap:
            self._grow_store(self._count + m)
        lo, hi = self._count, self._count + m
        self._store["src"][lo:hi] = src
        self._store["dst"][lo:hi] = dst
        self._store["size"][lo:hi] = size
        self._store["rem"][lo:hi] = size
        self._store["origin"][lo:hi] = origin
        self._store["generated"][lo:hi] = generated
        self._store["retry"][lo:hi] = 0
        self._store["maxslot"][lo:hi] = -1
        self._status[lo:hi] = _kernel.IDLE
        self._count = hi
        return np.arange(lo, hi, dtype=np.int64)

    def _ensure_queue_capacity(self, incoming_per_source: np.ndarray) -> None:
        need = self._buf_tail + incoming_per_source
        if int(need.max(initial=0)) <= self._qcap:
            return
        # rebase each queue to offset 0, then grow if still short
        n = self.n_nodes
        lengths = self._buf_tail - self._buf_head
        want = int((lengths + incoming_per_source).max(initial=0))
        qcap = self._qcap
        while qcap < want:
            qcap *= 2
        new = np.empty((n, qcap), dtype=np.int64)
        for s in range(n):
            ln = lengths[s]
            new[s, :ln] = self._buf[s, self._buf_head[s] : self._buf_tail[s]]
        self._buf = new
        self._buf_head[:] = 0
        self._buf_tail[:] = lengths
        self._qcap = qcap

    def buffered_rows(self) -> List[int]:
        """Row ids currently in the retry buffer, per-source FIFO order."""
        rows: List[int] = []
        for s in range(self.n_nodes):
            rows.extend(
                int(r) for r in self._buf[s, self._buf_head[s] : self._buf_tail[s]]
            )
        return rows

    def _visible_rows(self, i_buf: int) -> List[int]:
        """The buffered rows an epoch with ``i_buf`` > 0 can actually reach."""
        if i_buf <= 0:
            return []
        depth = self.config.iterations + 8
        rows: List[int] = []
        for s in range(self.n_nodes):
            end = min(self._buf_tail[s], self._buf_head[s] + depth)
            rows.extend(int(r) for r in self._buf[s, self._buf_head[s] : end])
        return rows

    # --- epoch execution ---

    def run_epoch_arrays(
        self,
        new_rows: np.ndarray,
        i_buf: Optional[int] = None,
        log_grants: bool = False,
    ) -> dict:
        """Schedule one epoch over store rows; returns raw counters/views."""
        cfg = self.config
        n, w, t = self.n_nodes, self.n_wavelengths, self.slots_per_epoch
        if i_buf is None:
            i_buf = plan_buffer_iterations(
                self.buffer_size,
                w,
                cfg.scheduler.buffer_coefficient,
                cfg.iterations,
                cfg.scheduler.buffer_iteration_cap,
            )
        # per source, at most one buffered request is consumed per iteration,
        # so the epoch can never reach deeper than the iteration budget
        vis_depth = cfg.iterations + 8

        incoming = np.bincount(
            self._store["src"][new_rows], minlength=n
        ) if len(new_rows) else np.zeros(n, dtype=np.int64)
        self._ensure_queue_capacity(incoming.astype(np.int64))

        m_bound = int(min(self.buffer_size, n * vis_depth) + len(new_rows))
        comp_rows = np.empty(max(m_bound, 1), dtype=np.int64)
        comp_maxslot = np.empty(max(m_bound, 1), dtype=np.int64)
        if log_grants:
            gcap = n * t + 8
            g_req = np.empty(gcap, dtype=np.int64)
            g_wl = np.empty(gcap, dtype=np.int64)
            g_mask = np.empty(gcap, dtype=np.uint64)
        else:
            g_req = np.empty(1, dtype=np.int64)
            g_wl = np.empty(1, dtype=np.int64)
            g_mask = np.empty(1, dtype=np.uint64)

        alg = _kernel.ALG_EPOCH if self.algorithm is Algorithm.EPOCH_LEVEL else _kernel.ALG_SLOT
        comp_count, g_count = _kernel.run_epoch(
            alg, n, w, t,
            cfg.iterations, i_buf, cfg.coarse_iterations,
            cfg.scheduler.pointer_shift_threshold, vis_depth,
            cfg.wavelength_tries, log_grants,
            self._store["src"], self._store["dst"], self._store["rem"],
            self._store["retry"], self._status, self._store["maxslot"],
            self._buf, self._buf_head, self._buf_tail, new_rows,
            self.dest_pointers, self.source_pointers, self.wavelength_pointers,
            self.rom, self.rom_cursor,
            self._cell_src, self._cell_dst, self._lock_src, self._lock_dst,
            comp_rows, comp_maxslot, g_req, g_wl, g_mask,
            self._out_stats,
        )
        stats = self._out_stats
        return {
            "completed_rows": comp_rows[:comp_count].copy(),
            "completed_maxslot": comp_maxslot[:comp_count].copy(),
            "granted_slots": int(stats[_kernel.S_GRANTED_SLOTS]),
            "invalidated": int(stats[_kernel.S_INVALIDATED]),
            "partial": int(stats[_kernel.S_PARTIAL]),
            "no_free_slot": int(stats[_kernel.S_WDBUF]),
            "untouched_buffer": int(stats[_kernel.S_UNTOUCHED_BUF]),
            "untouched_new": int(stats[_kernel.S_UNTOUCHED_NODE]),
            "iterations_used": int(stats[_kernel.S_ITERATIONS]),
            "buffer_iterations": int(stats[_kernel.S_BUF_ITERATIONS]),
            "distinct_wavelengths": int(stats[_kernel.S_DISTINCT_WL]),
            "occupied_cells": int(stats[_kernel.S_OCCUPIED_CELLS]),
            "buffer_after": int(stats[_kernel.S_BUFFER_AFTER]),
            "input_buffer": int(stats[_kernel.S_INPUT_BUF]),
            "input_new": int(stats[_kernel.S_INPUT_NEW]),
            "completed": comp_count,
            "i_buf": i_buf,
            "grant_rows": g_req[:g_count].copy() if log_grants else None,
            "grant_wavelengths": g_wl[:g_count].copy() if log_grants else None,
            "grant_slot_masks": g_mask[:g_count].copy() if log_grants else None,
        }

    def grid_snapshot(self) -> ResourceGrid:
        """ResourceGrid view of the most recently scheduled epoch."""
        return ResourceGrid.from_cells(
            self._cell_src,
            self._cell_dst,
            self.n_nodes,
            lock_source=self._lock_src.astype(np.int32),
            lock_dest=self._lock_dst.astype(np.int32),
        )

    # --- object API ---

    def _request_for_row(self, row: int) -> Request:
        req = self._requests_by_row.get(row)
        if req is None:
            req = Request(
                source=int(self._store["src"][row]),
                destination=int(self._store["dst"][row]),
                slots_requested=int(self._store["size"][row]),
                origin_epoch=int(self._store["origin"][row]),
                generated_at_ns=int(self._store["generated"][row]),
                req_id=row,
            )
            self._requests_by_row[row] = req
        return req

    def _adopt(self, requests: Sequence[Request]) -> np.ndarray:
        m = len(requests)
        src = np.fromiter((r.source for r in requests), dtype=np.int64, count=m)
        dst = np.fromiter((r.destination for r in requests), dtype=np.int64, count=m)
        rem = np.fromiter((r.remaining_slots for r in requests), dtype=np.int64, count=m)
        origin = np.fromiter((r.origin_epoch for r in requests), dtype=np.int64, count=m)
        gen = np.fromiter((r.generated_at_ns for r in requests), dtype=np.int64, count=m)
        rows = self.add_request_rows(src, dst, rem, origin, gen)
        for row, req in zip(rows, requests):
            if req.req_id < 0:
                req.req_id = int(row)
            self._requests_by_row[int(row)] = req
        return rows

    def schedule_epoch(
        self, new_requests: Sequence[Request], epoch: int = 0
    ) -> Tuple[EpochOutcome, ResourceGrid]:
        """Schedule one epoch; grants execute in epoch ``epoch + 1``."""
        for req in new_requests:
            if not (0 <= req.source < self.n_nodes and 0 <= req.destination < self.n_nodes):
                raise ValueError(f"request endpoints out of range: {req}")
            if req.slots_requested > self.slots_per_epoch:
                raise ValueError(
                    f"request wants {req.slots_requested} slots, epoch has "
                    f"{self.slots_per_epoch}"
                )
        i_buf = plan_buffer_iterations(
            self.buffer_size,
            self.n_wavelengths,
            self.config.scheduler.buffer_coefficient,
            self.config.iterations,
            self.config.scheduler.buffer_iteration_cap,
        )
        visible_before = self._visible_rows(i_buf)
        rows = self._adopt(list(new_requests))
        result = self.run_epoch_arrays(rows, i_buf=i_buf, log_grants=True)

        grants: List[Grant] = []
        for row, wl, mask in zip(
            result["grant_rows"], result["grant_wavelengths"], result["grant_slot_masks"]
        ):
            slots = tuple(int(t) for t in range(self.slots_per_epoch) if (int(mask) >> t) & 1)
            grants.append(
                Grant(
                    source=int(self._store["src"][row]),
                    destination=int(self._store["dst"][row]),
                    wavelength=int(wl),
                    slots=slots,
                    epoch=epoch + 1,
                )
            )

        # the visible-slice snapshot plus the new rows form this epoch's
        # conservation ledger; statuses persist as each row's last outcome
        invalidated: List[Request] = []
        buffered: List[Request] = []
        ledger_rows = list(dict.fromkeys(visible_before + [int(r) for r in rows]))
        for row in ledger_rows:
            req = self._request_for_row(row)
            req.remaining_slots = int(self._store["rem"][row])
            req.retry_count = int(self._store["retry"][row])
            status = int(self._status[row])
            if status == _kernel.GRANTED:
                continue
            if status == _kernel.INVALID:
                invalidated.append(req)
            else:
                buffered.append(req)
        outcome = EpochOutcome(
            grants=grants,
            invalidated=invalidated,
            buffered=buffered,
            iterations_used=result["iterations_used"],
            buffer_iterations=result["buffer_iterations"],
            stats={
                k: v
                for k, v in result.items()
                if isinstance(v, int)
            },
        )
        return outcome, self.grid_snapshot()


def schedule_epoch(
    state: SchedulerState, new_requests: Sequence[Request], epoch: int = 0
) -> Tuple[EpochOutcome, ResourceGrid]:
    """Run one epoch of the configured algorithm over ``state``."""
    return state.schedule_epoch(new_requests, epoch=epoch)


# --- stage-level operations (the per-iteration pipeline, object form) ---


def source_selection(
    requests_by_source: Mapping[int, Iterable[int]],
    source_arbiters: Sequence[RoundRobinArbiter],
) -> Dict[int, int]:
    """Slot-level first stage: each source arbiter picks one destination.

    ``requests_by_source`` maps a source to the destinations of its pending
    requests (already-granted requests are cancelled upstream).
    """
    chosen: Dict[int, int] = {}
    for s, dests in requests_by_source.items():
        mask = 0
        for d in dests:
            mask |= 1 << d
        if mask == 0:
            continue
        grant = source_arbiters[s].arbitrate(mask)
        if grant is not None:
            chosen[s] = grant
    return chosen


def node_contention(
    candidates: Mapping[int, int],
    dest_arbiters: Sequence[RoundRobinArbiter],
) -> List[Tuple[int, int]]:
    """Destination arbitration: one winning (source, dest) per destination.

    ``candidates`` maps each source to its single candidate destination, so
    every source and every destination appears at most once in the result.
    """
    by_dest: Dict[int, int] = {}
    for s, d in candidates.items():
        by_dest[d] = by_dest.get(d, 0) | (1 << s)
    pairs: List[Tuple[int, int]] = []
    for d in sorted(by_dest):
        winner = dest_arbiters[d].arbitrate(by_dest[d])
        if winner is not None:
            pairs.append((winner, d))
    return pairs


def wavelength_decision(
    pairs: Sequence[Tuple[int, int]],
    grid: ResourceGrid,
    rom: np.ndarray,
    rom_cursor: np.ndarray,
    epoch_level: bool,
    rom_tries: int = 1,
) -> Tuple[List[Tuple[int, int, int]], List[Tuple[int, int]], List[Tuple[int, int]]]:
    """Pick a wavelength per contention-free pair.

    Returns (decisions, invalidated, unavailable): a pair whose endpoints
    hold contradicting epoch locks is invalidated; a lock wavelength is
    binding and the pair is unavailable (re-buffered) when it has no free
    timeslot.  Unlocked pairs consume up to ``rom_tries`` entries of the
    source's pseudo-random wavelength ROM, taking the first with a
    timeslot free for both endpoints.
    """
    decisions: List[Tuple[int, int, int]] = []
    invalidated: List[Tuple[int, int]] = []
    unavailable: List[Tuple[int, int]] = []
    t = rom.shape[1]
    for s, d in pairs:
        lam = -1
        if epoch_level:
            a = int(grid.lock_source[s])
            b = int(grid.lock_dest[d])
            if a >= 0 and b >= 0 and a != b:
                invalidated.append((s, d))
                continue
            if a >= 0:
                lam = a
            elif b >= 0:
                lam = b
        if lam >= 0:
            feasible = bool(grid.free_slots(lam, s, d))
        else:
            feasible = False
            for _ in range(rom_tries):
                lam = int(rom[s, rom_cursor[s]])
                rom_cursor[s] = (rom_cursor[s] + 1) % t
                if grid.free_slots(lam, s, d):
                    feasible = True
                    break
        if feasible:
            decisions.append((s, d, lam))
        else:
            unavailable.append((s, d))
    return decisions, invalidated, unavailable


def wavelength_contention(
    decisions: Sequence[Tuple[int, int, int]],
    remaining: Mapping[int, int],
    grid: ResourceGrid,
    wavelength_arbiters: Sequence[RoundRobinArbiter],
    fine: bool,
    epoch_level: bool,
) -> List[Tuple[int, int, int, Tuple[int, ...]]]:
    """Per-wavelength arbitration plus timeslot allocation.

    ``remaining`` maps source to its request's outstanding slot count.
    Coarse/epoch-level winners receive up to that many of the lowest free
    slots; fine winners exactly one.  Losers simply retry next iteration.
    """
    by_wl: Dict[int, int] = {}
    dest_of: Dict[int, int] = {}
    for s, d, lam in decisions:
        by_wl[lam] = by_wl.get(lam, 0) | (1 << s)
        dest_of[s] = d
    grants: List[Tuple[int, int, int, Tuple[int, ...]]] = []
    for lam in sorted(by_wl):
        winner = wavelength_arbiters[lam].arbitrate(by_wl[lam])
        if winner is None:
            continue
        d = dest_of[winner]
        free = grid.free_slots(lam, winner, d)
        k = 1 if fine else min(remaining[winner], len(free))
        slots = tuple(free[:k])
        grid.allocate(lam, slots, winner, d, lock=epoch_level)
        grants.append((winner, d, lam, slots))
    return grants
