"""Domain types, configuration records and validation.

A sub-network is one passive star coupler connecting ``n_nodes`` endpoints.
Time is divided into fixed reconfiguration periods (*epochs*) of
``slots_per_epoch`` TDM timeslots, and every endpoint owns a transceiver
that can tune to any of ``n_wavelengths`` channels.  All times are integer
nanoseconds except the scheduler clock period, which is a rational number
of tenths of nanoseconds used only to derive the per-epoch iteration
budget.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np

SLOT_NS_DEFAULT = 20
BYTES_PER_SLOT = 250          # payload carried by one timeslot at 100 Gbps
REQUEST_RECORD_BITS = 19      # destination + slot size + epoch stamp
GRANT_RECORD_BITS = 19        # tx/rx wavelength + destination + valid bit
TUNING_NS = 0.5               # laser switching dead time charged per retune

# uint64 bitsets back the occupancy grid and arbitration masks
MAX_NODES = 64
MAX_SLOTS = 64


class ConfigError(ValueError):
    """Raised for any inconsistent or unsupported configuration."""


class Algorithm(Enum):
    EPOCH_LEVEL = "epoch"
    SLOT_LEVEL = "slot"

    @classmethod
    def parse(cls, text: str) -> "Algorithm":
        key = text.strip().lower()
        for alg in cls:
            if key in (alg.value, alg.name.lower(), alg.value + "-level", alg.value + "_level"):
                return alg
        raise ConfigError(f"unknown algorithm {text!r} (expected 'epoch' or 'slot')")


class SizeDistribution(Enum):
    """Request-size spread around the average size.

    ``FIXED`` always requests the average size; ``SPREAD3`` draws uniformly
    from three values (average -1 .. +1); ``SPREAD5`` from five
    (average -2 .. +2).
    """

    FIXED = "fixed"
    SPREAD3 = "spread3"
    SPREAD5 = "spread5"

    @property
    def half_width(self) -> int:
        return {"fixed": 0, "spread3": 1, "spread5": 2}[self.value]

    @property
    def size_levels(self) -> int:
        return 2 * self.half_width + 1

    @classmethod
    def parse(cls, text: str) -> "SizeDistribution":
        key = text.strip().lower()
        for dist in cls:
            if key == dist.value:
                return dist
        raise ConfigError(
            f"unknown size distribution {text!r} (expected fixed, spread3 or spread5)"
        )


@dataclass(frozen=True)
class NetworkConfig:
    """Static parameters of one star-coupler sub-network."""

    n_nodes: int = 64
    n_wavelengths: int = 64
    epoch_ns: int = 360
    slot_ns: int = SLOT_NS_DEFAULT
    line_rate_gbps: float = 100.0


@dataclass(frozen=True)
class SchedulerConfig:
    """Hardware scheduler parameters.

    ``boot_cycles`` defaults per algorithm (3 for epoch-level, 4 for
    slot-level) when left as None.  ``buffer_coefficient`` scales how many
    iterations per epoch are devoted to retrying buffered requests;
    ``buffer_iteration_cap`` bounds that share of the iteration budget.
    ``pointer_shift_threshold`` is the granted fraction at which the
    epoch-level buffer pointer advances to the next request window.
    """

    algorithm: Algorithm = Algorithm.SLOT_LEVEL
    clk_ns: float = 2.3
    boot_cycles: Optional[int] = None
    buffer_coefficient: float = 2.0
    pointer_shift_threshold: float = 0.5
    buffer_iteration_cap: float = 0.75
    # ROM entries the wavelength decision may consume while looking for a
    # wavelength with a free timeslot (None: one full ROM row, i.e. T)
    wavelength_tries: Optional[int] = None


@dataclass(frozen=True)
class TrafficConfig:
    requests_per_node: int = 3
    distribution: SizeDistribution = SizeDistribution.FIXED
    input_load: float = 1.0
    seed: int = 1
    n_epochs: int = 2000
    include_self: bool = False   # opt-in strict 1/N destination draw


@dataclass
class Request:
    """One node-to-node demand: deliver ``slots_requested`` timeslots.

    ``remaining_slots`` is the residue still to be granted after partial
    grants; ``retry_count`` counts re-bufferings after failed attempts.
    """

    source: int
    destination: int
    slots_requested: int
    origin_epoch: int
    generated_at_ns: int
    remaining_slots: int = -1
    retry_count: int = 0
    req_id: int = -1

    def __post_init__(self) -> None:
        if self.source == self.destination:
            raise ValueError("request source equals destination")
        if self.slots_requested < 1:
            raise ValueError("slots_requested must be >= 1")
        if self.remaining_slots < 0:
            self.remaining_slots = self.slots_requested
        if self.remaining_slots > self.slots_requested:
            raise ValueError("remaining_slots exceeds slots_requested")


@dataclass(frozen=True)
class Grant:
    """A (source, destination, wavelength, slots) allocation for one epoch.

    ``epoch`` is the epoch in which the grant executes in the data plane;
    ``completed_at_ns`` is stamped by the simulator once known.
    """

    source: int
    destination: int
    wavelength: int
    slots: tuple
    epoch: int
    completed_at_ns: Optional[int] = None

    def __post_init__(self) -> None:
        if len(self.slots) == 0:
            raise ValueError("a grant carries at least one timeslot")


class GridAuditError(AssertionError):
    """A resource-grid consistency invariant was violated."""


class ResourceGrid:
    """Per-epoch wavelength x timeslot occupancy with endpoint views.

    ``cell_source[w, t]`` / ``cell_dest[w, t]`` give the owning node pair of
    each cell (-1 when free).  ``source_wl`` / ``dest_wl`` are the projected
    per-endpoint views (wavelength in use per timeslot, -1 when idle).
    Under epoch-level scheduling ``lock_source`` / ``lock_dest`` pin each
    endpoint to a single wavelength for the whole epoch.
    """

    def __init__(self, n_nodes: int, n_wavelengths: int, slots_per_epoch: int):
        self.n_nodes = n_nodes
        self.n_wavelengths = n_wavelengths
        self.slots_per_epoch = slots_per_epoch
        shape = (n_wavelengths, slots_per_epoch)
        self.cell_source = np.full(shape, -1, dtype=np.int32)
        self.cell_dest = np.full(shape, -1, dtype=np.int32)
        self.source_wl = np.full((n_nodes, slots_per_epoch), -1, dtype=np.int32)
        self.dest_wl = np.full((n_nodes, slots_per_epoch), -1, dtype=np.int32)
        self.lock_source = np.full(n_nodes, -1, dtype=np.int32)
        self.lock_dest = np.full(n_nodes, -1, dtype=np.int32)

    @classmethod
    def from_cells(
        cls,
        cell_source: np.ndarray,
        cell_dest: np.ndarray,
        n_nodes: int,
        lock_source: Optional[np.ndarray] = None,
        lock_dest: Optional[np.ndarray] = None,
    ) -> "ResourceGrid":
        n_wl, t = cell_source.shape
        grid = cls(n_nodes, n_wl, t)
        grid.cell_source[:] = cell_source
        grid.cell_dest[:] = cell_dest
        if lock_source is not None:
            grid.lock_source[:] = lock_source
        if lock_dest is not None:
            grid.lock_dest[:] = lock_dest
        for w in range(n_wl):
            for t_idx in range(t):
                s = grid.cell_source[w, t_idx]
                if s >= 0:
                    grid.source_wl[s, t_idx] = w
                    grid.dest_wl[grid.cell_dest[w, t_idx], t_idx] = w
        return grid

    def occupancy(self, wavelength: int, timeslot: int):
        s = self.cell_source[wavelength, timeslot]
        if s < 0:
            return None
        return int(s), int(self.cell_dest[wavelength, timeslot])

    def free_slots(self, wavelength: int, source: int, dest: int) -> list:
        """Timeslots usable by (source, dest) on ``wavelength``, ascending."""
        free = (
            (self.cell_source[wavelength] < 0)
            & (self.source_wl[source] < 0)
            & (self.dest_wl[dest] < 0)
        )
        return [int(t) for t in np.nonzero(free)[0]]

    def allocate(self, wavelength: int, slots: Sequence[int], source: int, dest: int,
                 lock: bool = False) -> None:
        for t in slots:
            if self.cell_source[wavelength, t] >= 0:
                raise GridAuditError(f"cell ({wavelength},{t}) already owned")
            if self.source_wl[source, t] >= 0 or self.dest_wl[dest, t] >= 0:
                raise GridAuditError(f"endpoint busy at slot {t}")
            self.cell_source[wavelength, t] = source
            self.cell_dest[wavelength, t] = dest
            self.source_wl[source, t] = wavelength
            self.dest_wl[dest, t] = wavelength
        if lock:
            self.lock_source[source] = wavelength
            self.lock_dest[dest] = wavelength

    def used_wavelengths(self) -> int:
        return int(np.count_nonzero((self.cell_source >= 0).any(axis=1)))

    def occupied_cells(self) -> int:
        return int(np.count_nonzero(self.cell_source >= 0))

    def audit(self, epoch_level: bool = False) -> None:
        """Verify all structural invariants; raise GridAuditError otherwise."""
        src_set = self.cell_source >= 0
        dst_set = self.cell_dest >= 0
        if not np.array_equal(src_set, dst_set):
            raise GridAuditError("cell source/dest occupancy disagree")
        # projections must match the cells exactly
        expect_src = np.full_like(self.source_wl, -1)
        expect_dst = np.full_like(self.dest_wl, -1)
        for w in range(self.n_wavelengths):
            for t in range(self.slots_per_epoch):
                s = self.cell_source[w, t]
                if s < 0:
                    continue
                d = self.cell_dest[w, t]
                if expect_src[s, t] >= 0:
                    raise GridAuditError(f"source {s} transmits twice at slot {t}")
                if expect_dst[d, t] >= 0:
                    raise GridAuditError(f"destination {d} receives twice at slot {t}")
                expect_src[s, t] = w
                expect_dst[d, t] = w
        if not np.array_equal(expect_src, self.source_wl):
            raise GridAuditError("source view inconsistent with occupancy")
        if not np.array_equal(expect_dst, self.dest_wl):
            raise GridAuditError("dest view inconsistent with occupancy")
        if epoch_level:
            for node in range(self.n_nodes):
                tx = set(self.source_wl[node][self.source_wl[node] >= 0].tolist())
                rx = set(self.dest_wl[node][self.dest_wl[node] >= 0].tolist())
                if len(tx) > 1:
                    raise GridAuditError(f"node {node} transmits on {sorted(tx)} in one epoch")
                if len(rx) > 1:
                    raise GridAuditError(f"node {node} receives on {sorted(rx)} in one epoch")
                if tx and self.lock_source[node] not in tx:
                    raise GridAuditError(f"node {node} transmit lock disagrees with grid")
                if rx and self.lock_dest[node] not in rx:
                    raise GridAuditError(f"node {node} receive lock disagrees with grid")


def compute_iterations(epoch_ns: int, clk_ns: float, boot_cycles: int) -> int:
    """Iteration budget per epoch: floor(epoch / clk) minus boot cycles.

    ``clk_ns`` must be expressible in tenths of nanoseconds so the division
    is exact integer arithmetic.
    """
    if epoch_ns <= 0 or clk_ns <= 0:
        raise ConfigError("epoch_ns and clk_ns must be positive")
    tenths = round(clk_ns * 10)
    if tenths <= 0 or abs(clk_ns * 10 - tenths) > 1e-9:
        raise ConfigError(f"clk_ns={clk_ns} is not a multiple of 0.1 ns")
    iterations = (epoch_ns * 10) // tenths - boot_cycles
    if iterations < 1:
        raise ConfigError(
            f"iteration budget {iterations} < 1 for epoch={epoch_ns} ns, "
            f"clk={clk_ns} ns, boot={boot_cycles}"
        )
    return int(iterations)


@dataclass(frozen=True)
class ValidatedConfig:
    """Frozen, fully derived configuration for one simulation run."""

    network: NetworkConfig
    scheduler: SchedulerConfig
    traffic: TrafficConfig
    slots_per_epoch: int
    s_avg: int
    boot_cycles: int
    iterations: int
    coarse_iterations: int
    wavelength_tries: int

    @property
    def n_nodes(self) -> int:
        return self.network.n_nodes

    @property
    def n_wavelengths(self) -> int:
        return self.network.n_wavelengths

    @property
    def epoch_ns(self) -> int:
        return self.network.epoch_ns

    @property
    def algorithm(self) -> Algorithm:
        return self.scheduler.algorithm


def validate(
    network: NetworkConfig = NetworkConfig(),
    scheduler: SchedulerConfig = SchedulerConfig(),
    traffic: TrafficConfig = TrafficConfig(),
) -> ValidatedConfig:
    """Check all cross-field invariants and derive T, S_avg and I."""
    n = network.n_nodes
    if not 2 <= n <= MAX_NODES:
        raise ConfigError(f"n_nodes={n} outside supported range 2..{MAX_NODES}")
    if network.n_wavelengths != n:
        raise ConfigError(
            f"n_wavelengths={network.n_wavelengths} must equal n_nodes={n} "
            "(full network efficiency)"
        )
    if network.slot_ns < 1:
        raise ConfigError("slot_ns must be >= 1 ns")
    if network.epoch_ns % network.slot_ns != 0:
        raise ConfigError(
            f"epoch_ns={network.epoch_ns} is not a multiple of slot_ns={network.slot_ns}"
        )
    slots = network.epoch_ns // network.slot_ns
    if slots < 1:
        raise ConfigError("epoch must contain at least one timeslot")
    if slots > MAX_SLOTS:
        raise ConfigError(f"slots_per_epoch={slots} exceeds supported maximum {MAX_SLOTS}")
    if network.line_rate_gbps <= 0:
        raise ConfigError("line_rate_gbps must be positive")

    if not 0.0 <= scheduler.pointer_shift_threshold <= 1.0:
        raise ConfigError("pointer_shift_threshold must lie in [0, 1]")
    if not 0.0 < scheduler.buffer_iteration_cap <= 1.0:
        raise ConfigError("buffer_iteration_cap must lie in (0, 1]")
    if not 1.6 <= scheduler.buffer_coefficient <= 2.5:
        raise ConfigError(
            f"buffer_coefficient={scheduler.buffer_coefficient} outside [1.6, 2.5]"
        )
    boot = scheduler.boot_cycles
    if boot is None:
        boot = 3 if scheduler.algorithm is Algorithm.EPOCH_LEVEL else 4
    if boot < 0:
        raise ConfigError("boot_cycles must be >= 0")
    iterations = compute_iterations(network.epoch_ns, scheduler.clk_ns, boot)

    r = traffic.requests_per_node
    if r < 1:
        raise ConfigError("requests_per_node must be >= 1")
    if slots % r != 0:
        raise ConfigError(
            f"requests_per_node={r} must divide slots_per_epoch={slots} "
            "(integer average request size)"
        )
    s_avg = slots // r
    if s_avg < 1:
        raise ConfigError(f"average request size {slots}/{r} < 1")
    min_avg = 1 + traffic.distribution.half_width
    if s_avg < min_avg:
        raise ConfigError(
            f"{traffic.distribution.value} requires average request size >= {min_avg}, "
            f"got {s_avg} (smallest size value would drop below 1)"
        )
    if not 0.0 <= traffic.input_load <= 1.0:
        raise ConfigError(f"input_load={traffic.input_load} outside [0, 1]")
    if traffic.n_epochs < 1:
        raise ConfigError("n_epochs must be >= 1")
    if traffic.seed < 0:
        raise ConfigError("seed must be non-negative")

    tries = scheduler.wavelength_tries
    if tries is None:
        tries = 0
    if not 0 <= tries <= slots:
        raise ConfigError(f"wavelength_tries={tries} outside 0..{slots}")

    coarse = (slots + s_avg - 1) // s_avg
    return ValidatedConfig(
        network=network,
        scheduler=replace(scheduler, boot_cycles=boot),
        traffic=traffic,
        slots_per_epoch=slots,
        s_avg=s_avg,
        boot_cycles=boot,
        iterations=iterations,
        coarse_iterations=coarse,
        wavelength_tries=tries,
    )


# --- configuration file (INI sections mirroring the three records) ---

_NETWORK_FIELDS = {
    "n_nodes": int,
    "n_wavelengths": int,
    "epoch_ns": int,
    "slot_ns": int,
    "line_rate_gbps": float,
}
_SCHEDULER_FIELDS = {
    "algorithm": Algorithm.parse,
    "clk_ns": float,
    "boot_cycles": int,
    "buffer_coefficient": float,
    "pointer_shift_threshold": float,
    "buffer_iteration_cap": float,
    "wavelength_tries": int,
}
_TRAFFIC_FIELDS = {
    "requests_per_node": int,
    "distribution": SizeDistribution.parse,
    "input_load": float,
    "seed": int,
    "n_epochs": int,
    "include_self": lambda v: v.strip().lower() in ("1", "true", "yes", "on"),
}


def _read_section(parser, name, fields, cls):
    kwargs = {}
    if parser.has_section(name):
        for key, raw in parser.items(name):
            if key not in fields:
                raise ConfigError(f"unknown key {key!r} in section [{name}]")
            if raw.strip() == "":
                continue
            try:
                kwargs[key] = fields[key](raw)
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"bad value for {name}.{key}: {exc}") from exc
    return cls(**kwargs)


def load_config(path: str, overrides: Optional[dict] = None) -> ValidatedConfig:
    """Read an INI config file ([network], [scheduler], [traffic]) and validate.

    ``overrides`` maps dotted keys (e.g. ``"traffic.seed"``) to raw string
    values applied on top of the file.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    with open(path, "r", encoding="utf-8") as fh:
        parser.read_file(fh)
    if overrides:
        for dotted, value in overrides.items():
            if "." not in dotted:
                raise ConfigError(f"override {dotted!r} must look like section.key")
            section, key = dotted.split(".", 1)
            if not parser.has_section(section):
                parser.add_section(section)
            parser.set(section, key, str(value))
    network = _read_section(parser, "network", _NETWORK_FIELDS, NetworkConfig)
    scheduler = _read_section(parser, "scheduler", _SCHEDULER_FIELDS, SchedulerConfig)
    traffic = _read_section(parser, "traffic", _TRAFFIC_FIELDS, TrafficConfig)
    return validate(network, scheduler, traffic)


def default_config_text() -> str:
    """Annotated config file with every field at its documented default."""
    return """\
; Sub-network simulation configuration.  Any omitted key keeps its default.

[network]
n_nodes = 64            ; endpoints per star coupler (2..64)
n_wavelengths = 64      ; must equal n_nodes
epoch_ns = 360          ; reconfiguration period; multiple of slot_ns (120/360/600 typical)
slot_ns = 20            ; TDM timeslot length
line_rate_gbps = 100    ; per-wavelength line rate

[scheduler]
algorithm = slot        ; slot | epoch
clk_ns = 2.3            ; scheduler clock period, tenths of ns
boot_cycles =           ; pipeline fill cycles; default 3 (epoch) / 4 (slot)
buffer_coefficient = 2.0        ; retry-iteration scaling, valid 1.6..2.5
pointer_shift_threshold = 0.5   ; epoch-level buffer window advance fraction
buffer_iteration_cap = 0.75     ; max fraction of iterations spent on the buffer

[traffic]
requests_per_node = 3   ; demands generated per node per epoch (must divide T)
distribution = fixed    ; fixed | spread3 | spread5 (1/3/5 size levels)
input_load = 1.0        ; fraction of full demand (1.0 fills all N*T slots)
seed = 1                ; RNG seed; identical seed reproduces the run exactly
n_epochs = 2000         ; simulated epochs
include_self = false    ; allow self-addressed demands (strict uniform draw)
"""
