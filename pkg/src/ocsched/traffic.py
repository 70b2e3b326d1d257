"""Synthetic per-epoch demand generation.

Each node generates ``input_load * requests_per_node`` requests per epoch
(the fractional part realized as a Bernoulli draw, so full load generates
exactly ``requests_per_node`` per node and utilizes every wavelength and
timeslot in expectation).  Arrival instants within the epoch follow the
conditional law of a Poisson process (independent uniform draws); a
request arriving in the interval just before an epoch's start is
presented to the scheduler at that epoch, so the draw runs one epoch
ahead of the schedule pipeline and epoch 0 sees arrivals stamped in
(-epoch_ns, 0].  Destinations are uniform (self-traffic excluded by
default) and sizes are drawn around the average request size according to
the configured spread.

Per node per epoch at most ``requests_per_node`` requests are released to
the scheduler; excess arrivals queue in a carryover buffer (oldest first)
and count against the following epoch's release budget.
"""

from __future__ import annotations

import csv
from typing import List, Optional

import numpy as np

from .core import Request, SizeDistribution, ValidatedConfig

_COLS = ("src", "dst", "size", "arrival", "origin")


def sample_size(
    distribution: SizeDistribution, s_avg: int, rng: np.random.Generator, count: int = 1
) -> np.ndarray:
    """Draw request sizes: uniform over s_avg +- half_width, mean s_avg."""
    hw = distribution.half_width
    if hw == 0:
        return np.full(count, s_avg, dtype=np.int64)
    return rng.integers(s_avg - hw, s_avg + hw + 1, size=count, dtype=np.int64)


class TrafficGenerator:
    """Deterministic seeded demand stream for one simulation run.

    ``epoch_arrays``/``generate_epoch`` must be called with consecutive
    epoch indices starting at 0 (the carryover queue is stateful).
    Identical seed and configuration reproduce an identical stream.
    """

    def __init__(self, config: ValidatedConfig, rng: Optional[np.random.Generator] = None):
        self.config = config
        self._rng = rng if rng is not None else np.random.default_rng(config.traffic.seed)
        self._next_epoch = 0
        empty = np.empty(0, dtype=np.int64)
        self._carry = {col: empty.copy() for col in _COLS}
        self.generated_slots = 0      # all arrivals so far, in slots
        self.released_slots = 0       # slots handed to the scheduler
        self.carry_slots = 0          # slots still held back

    @property
    def carryover_count(self) -> int:
        return len(self._carry["src"])

    def epoch_arrays(self, epoch: int):
        """Released requests for ``epoch`` as parallel int64 arrays.

        Returns (src, dst, size, arrival_ns, origin_epoch), ordered by
        source and, per source, oldest first (carryover ahead of new).
        """
        if epoch != self._next_epoch:
            raise ValueError(
                f"epochs must be generated consecutively (expected {self._next_epoch}, "
                f"got {epoch})"
            )
        self._next_epoch += 1

        cfg = self.config
        n = cfg.n_nodes
        r = cfg.traffic.requests_per_node
        epoch_ns = cfg.epoch_ns
        lam = cfg.traffic.input_load * r

        # draw order is part of the determinism contract:
        # counts, arrival offsets, destinations, sizes
        if lam > 0:
            base = int(lam)
            frac = lam - base
            counts = np.full(n, base, dtype=np.int64)
            if frac > 0:
                counts += self._rng.random(n) < frac
        else:
            counts = np.zeros(n, dtype=np.int64)
        total = int(counts.sum())
        offsets = self._rng.integers(0, epoch_ns, size=total, dtype=np.int64)
        if cfg.traffic.include_self:
            dests = self._rng.integers(0, n, size=total, dtype=np.int64)
        else:
            dests = self._rng.integers(0, n - 1, size=total, dtype=np.int64)
        sizes = sample_size(cfg.traffic.distribution, cfg.s_avg, self._rng, total)

        new_src = np.repeat(np.arange(n, dtype=np.int64), counts)
        if not cfg.traffic.include_self:
            dests = dests + (dests >= new_src)
        new_arrival = epoch * epoch_ns - offsets  # in ((epoch-1)*E, epoch*E]
        # per source, oldest first; stable so ties keep draw order
        order = np.lexsort((-offsets, new_src))
        new = {
            "src": new_src[order],
            "dst": dests[order],
            "size": sizes[order],
            "arrival": new_arrival[order],
            "origin": np.full(total, epoch, dtype=np.int64),
        }
        self.generated_slots += int(sizes.sum())

        # merge with carryover, release at most r per source (carry first)
        src_all = np.concatenate([self._carry["src"], new["src"]])
        merge = np.argsort(src_all, kind="stable")
        merged = {
            col: np.concatenate([self._carry[col], new[col]])[merge] for col in _COLS
        }
        per_node = np.bincount(merged["src"], minlength=n) if len(src_all) else np.zeros(
            n, dtype=np.int64
        )
        starts = np.zeros(n, dtype=np.int64)
        np.cumsum(per_node[:-1], out=starts[1:])
        pos_in_node = np.arange(len(src_all), dtype=np.int64) - np.repeat(starts, per_node)
        release = pos_in_node < r
        self._carry = {col: merged[col][~release] for col in _COLS}
        released = tuple(merged[col][release] for col in _COLS)
        self.released_slots += int(released[2].sum())
        self.carry_slots = self.generated_slots - self.released_slots
        return released

    def generate_epoch(self, epoch: int) -> List[Request]:
        """Released requests for ``epoch`` as Request objects."""
        src, dst, size, arrival, origin = self.epoch_arrays(epoch)
        return [
            Request(
                source=int(s),
                destination=int(d),
                slots_requested=int(sz),
                origin_epoch=int(o),
                generated_at_ns=int(a),
            )
            for s, d, sz, a, o in zip(src, dst, size, arrival, origin)
        ]

    def dump_trace(self, path: str, n_epochs: int) -> None:
        """Write one CSV row per released request (fresh generator only)."""
        if self._next_epoch != 0:
            raise ValueError("dump_trace requires an unused generator")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "source", "dest", "size", "arrival_ns"])
            for epoch in range(n_epochs):
                src, dst, size, arrival, _ = self.epoch_arrays(epoch)
                for s, d, sz, a in zip(src, dst, size, arrival):
                    writer.writerow([epoch, int(s), int(d), int(sz), int(a)])
