"""Techno-economic calculators: transceiver energy, network cost per Gbps,
and the scalability/capacity table of the star-coupler architecture.

All component counts, unit powers and unit costs are encoded as module
data; the calculators are pure functions over them.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Tuple

SLOT_NS = 20.0
TUNING_NS = 0.5
# tuning dead time charged per timeslot when deriving deliverable capacity
TUNING_EFFICIENCY = SLOT_NS / (SLOT_NS + TUNING_NS)

# unit power per component, milliwatts (passive parts carry none)
UNIT_POWER_MW: Dict[str, float] = {
    "SOA": 260.0,
    "Comb": 1000.0,
    "LD": 80.0,
    "AWG": 0.0,
    "MOD": 1460.0,
    "DS-DBR": 1000.0,
    "RX-SOA": 260.0,
    "RX-AWG": 0.0,
    "CO-RX": 2000.0,
    "PD": 630.0,
}


@dataclass(frozen=True)
class TransceiverOption:
    """One transmitter or receiver architecture as a component count map."""

    name: str
    components: Dict[str, int]

    def power_w(self) -> float:
        return sum(UNIT_POWER_MW[c] * k for c, k in self.components.items()) / 1000.0


TRANSCEIVER_OPTIONS: Dict[str, TransceiverOption] = {
    # transmitters: cascaded widely-tunable lasers / laser-diode array / comb
    "TX1": TransceiverOption("TX1", {"SOA": 2, "Comb": 0, "LD": 0, "AWG": 1,
                                     "MOD": 1, "DS-DBR": 2}),
    "TX2": TransceiverOption("TX2", {"SOA": 64, "Comb": 0, "LD": 64, "AWG": 1, "MOD": 1}),
    "TX3": TransceiverOption("TX3", {"SOA": 64, "Comb": 1, "LD": 0, "AWG": 2, "MOD": 1}),
    # receivers: SOA-gated filter bank / coherent with tunable local oscillators
    "RX1": TransceiverOption("RX1", {"RX-SOA": 64, "RX-AWG": 2, "PD": 1}),
    "RX2": TransceiverOption("RX2", {"DS-DBR": 2, "RX-SOA": 2, "CO-RX": 1}),
}

TX_NAMES = ("TX1", "TX2", "TX3")
RX_NAMES = ("RX1", "RX2")


def transceiver_power_w(tx: str, rx: str, line_rate_gbps: float = 100.0) -> Tuple[float, float]:
    """Total per-port power (W) and energy per bit (pJ/bit) of a TX/RX pair."""
    if tx not in TX_NAMES:
        raise ValueError(f"unknown transmitter option {tx!r} (expected one of {TX_NAMES})")
    if rx not in RX_NAMES:
        raise ValueError(f"unknown receiver option {rx!r} (expected one of {RX_NAMES})")
    watts = TRANSCEIVER_OPTIONS[tx].power_w() + TRANSCEIVER_OPTIONS[rx].power_w()
    pj_per_bit = watts / line_rate_gbps * 1000.0
    return watts, pj_per_bit


class Topology(Enum):
    FLAT = "flat"
    SPINE_LEAF = "spine-leaf"
    FAT_TREE = "fat-tree"
    OPTICAL_STAR = "optical-star"

    @classmethod
    def parse(cls, text: str) -> "Topology":
        key = text.strip().lower()
        for topo in cls:
            if key in (topo.value, topo.name.lower()):
                return topo
        raise ValueError(f"unknown topology {text!r}")


@dataclass(frozen=True)
class CostRow:
    component: str
    dollars_per_gbps: Tuple[float, float]   # (low, high)
    count_per_path: int


@dataclass(frozen=True)
class TopologyModel:
    """Per-path device counts and cost rows of one network topology."""

    name: Topology
    switches_per_path: int
    transceivers_per_path: int
    cost_rows: Tuple[CostRow, ...]


# electronic switch power: 225 W per 6.4 Tbps ASIC, i.e. per 100G of path
ELECTRONIC_SWITCH_W_PER_100G = 225.0 / 64.0
# electronic transceiver power per 100G port: multimode low end, singlemode high
ELECTRONIC_TRANSCEIVER_W_RANGE = (2.5, 7.0)

_TX_20M = CostRow("100GE transceiver (20 m)", (1.0, 3.0), 0)
_SW_T1 = CostRow("6.4 Tbps switch (tier 1)", (6.0, 10.0), 0)
_SW_T2 = CostRow("12.8 Tbps switch (tier 2)", (10.0, 10.0), 0)
_SW_T3 = CostRow("25.6 Tbps switch (tier 3)", (12.0, 12.0), 0)


def _row(base: CostRow, count: int) -> CostRow:
    return CostRow(base.component, base.dollars_per_gbps, count)


TOPOLOGIES: Dict[Topology, TopologyModel] = {
    Topology.FLAT: TopologyModel(
        Topology.FLAT,
        switches_per_path=1,
        transceivers_per_path=2,
        cost_rows=(_row(_TX_20M, 2), _row(_SW_T1, 1)),
    ),
    Topology.SPINE_LEAF: TopologyModel(
        Topology.SPINE_LEAF,
        switches_per_path=3,
        transceivers_per_path=4,
        cost_rows=(_row(_TX_20M, 2), _row(_SW_T1, 2), _row(_SW_T2, 1)),
    ),
    Topology.FAT_TREE: TopologyModel(
        Topology.FAT_TREE,
        switches_per_path=5,
        transceivers_per_path=6,
        cost_rows=(_row(_TX_20M, 4), _row(_SW_T1, 2), _row(_SW_T2, 2), _row(_SW_T3, 1)),
    ),
    Topology.OPTICAL_STAR: TopologyModel(
        Topology.OPTICAL_STAR,
        switches_per_path=0,
        transceivers_per_path=1,
        cost_rows=(
            CostRow("100GE coherent transceiver", (4.5, 7.5), 1),
            CostRow("star coupler", (0.04, 0.04), 1),
        ),
    ),
}


def network_cost_per_gbps(topology: Topology) -> Tuple[float, float]:
    """Per-path cost range in $/Gbps (interval sum over the cost rows)."""
    model = TOPOLOGIES[topology]
    lo = sum(r.dollars_per_gbps[0] * r.count_per_path for r in model.cost_rows)
    hi = sum(r.dollars_per_gbps[1] * r.count_per_path for r in model.cost_rows)
    return round(lo, 10), round(hi, 10)


def electronic_path_power_w(topology: Topology,
                            transceiver_w: float) -> float:
    """Per-100G-path power of an electronic topology at a transceiver power."""
    model = TOPOLOGIES[topology]
    if topology is Topology.OPTICAL_STAR:
        raise ValueError("use transceiver_power_w for the optical topology")
    return (
        model.transceivers_per_path * transceiver_w
        + model.switches_per_path * ELECTRONIC_SWITCH_W_PER_100G
    )


def network_power_range_w(topology: Topology) -> Tuple[float, float]:
    """Per-path power range across the electronic transceiver options."""
    lo, hi = ELECTRONIC_TRANSCEIVER_W_RANGE
    return (
        electronic_path_power_w(topology, lo),
        electronic_path_power_w(topology, hi),
    )


@dataclass(frozen=True)
class ScalabilityRow:
    transceivers_per_node: int
    total_nodes: int
    requests_per_node_per_epoch: int
    racks: int
    sub_stars: int
    cables: int
    channels: int
    capacity_tbps: float


def scalability_row(
    x: int, n_nodes: int = 64, line_rate_gbps: float = 100.0
) -> ScalabilityRow:
    """Network scale at ``x`` transceivers per node (equals the rack count).

    Every rack pair shares a dedicated sub-star, so x^2 couplers carry
    n_nodes * x^2 wavelength channels; deliverable capacity is de-rated by
    the per-timeslot tuning overhead.
    """
    if x < 1:
        raise ValueError("x must be >= 1")
    capacity_gbps = line_rate_gbps * n_nodes * x * x * TUNING_EFFICIENCY
    return ScalabilityRow(
        transceivers_per_node=x,
        total_nodes=n_nodes * x,
        requests_per_node_per_epoch=6 * x,
        racks=x,
        sub_stars=x * x,
        cables=n_nodes * x * x * 4,
        channels=n_nodes * x * x,
        capacity_tbps=capacity_gbps / 1000.0,
    )


def scalability_table(xs=(4, 8, 16, 32, 64), n_nodes: int = 64,
                      line_rate_gbps: float = 100.0) -> List[ScalabilityRow]:
    return [scalability_row(x, n_nodes, line_rate_gbps) for x in xs]
