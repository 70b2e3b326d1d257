from __future__ import annotations

import pytest

from ocsched import models


class TestTransceiverPower:
    def test_lowest_power_pair(self):
        watts, pj = models.transceiver_power_w("TX1", "RX2")
        assert watts == pytest.approx(8.5)
        assert pj == pytest.approx(85.0)

    def test_highest_power_pair(self):
        watts, _ = models.transceiver_power_w("TX2", "RX1")
        assert watts == pytest.approx(40.49)

    def test_all_option_powers(self):
        # per-option sums over the component table
        assert models.TRANSCEIVER_OPTIONS["TX1"].power_w() == pytest.approx(3.98)
        assert models.TRANSCEIVER_OPTIONS["TX2"].power_w() == pytest.approx(23.22)
        assert models.TRANSCEIVER_OPTIONS["TX3"].power_w() == pytest.approx(19.10)
        assert models.TRANSCEIVER_OPTIONS["RX1"].power_w() == pytest.approx(17.27)
        assert models.TRANSCEIVER_OPTIONS["RX2"].power_w() == pytest.approx(4.52)

    def test_unknown_options_rejected(self):
        with pytest.raises(ValueError):
            models.transceiver_power_w("TX9", "RX1")
        with pytest.raises(ValueError):
            models.transceiver_power_w("TX1", "TX2")

    def test_zero_component_option(self):
        empty = models.TransceiverOption("none", {})
        assert empty.power_w() == 0.0


class TestNetworkCost:
    def test_flat(self):
        assert models.network_cost_per_gbps(models.Topology.FLAT) == (8.0, 16.0)

    def test_spine_leaf(self):
        assert models.network_cost_per_gbps(models.Topology.SPINE_LEAF) == (24.0, 36.0)

    def test_fat_tree(self):
        assert models.network_cost_per_gbps(models.Topology.FAT_TREE) == (48.0, 64.0)

    def test_optical_star(self):
        assert models.network_cost_per_gbps(models.Topology.OPTICAL_STAR) == (4.54, 7.54)

    def test_per_path_device_counts(self):
        assert models.TOPOLOGIES[models.Topology.FLAT].switches_per_path == 1
        assert models.TOPOLOGIES[models.Topology.FLAT].transceivers_per_path == 2
        assert models.TOPOLOGIES[models.Topology.SPINE_LEAF].switches_per_path == 3
        assert models.TOPOLOGIES[models.Topology.SPINE_LEAF].transceivers_per_path == 4
        assert models.TOPOLOGIES[models.Topology.FAT_TREE].switches_per_path == 5
        assert models.TOPOLOGIES[models.Topology.FAT_TREE].transceivers_per_path == 6


class TestNetworkPower:
    def test_flat_path_power_at_high_end(self):
        watts = models.electronic_path_power_w(models.Topology.FLAT, 7.0)
        assert watts == pytest.approx(17.52, abs=0.01)

    def test_optical_beats_worst_case_flat(self):
        flat_hi = models.network_power_range_w(models.Topology.FLAT)[1]
        optical, _ = models.transceiver_power_w("TX1", "RX2")
        assert optical < flat_hi / 2


class TestScalability:
    GOLDEN = {
        4: (256, 24, 4, 16, 4096, 1024, 100),
        8: (512, 48, 8, 64, 16384, 4096, 400),
        16: (1024, 96, 16, 256, 65536, 16384, 1598),
        32: (2048, 192, 32, 1024, 262144, 65536, 6394),
        64: (4096, 384, 64, 4096, 1048576, 262144, 25575),
    }

    @pytest.mark.parametrize("x", sorted(GOLDEN))
    def test_golden_rows(self, x):
        nodes, req, racks, stars, cables, channels, capacity = self.GOLDEN[x]
        row = models.scalability_row(x)
        assert row.total_nodes == nodes
        assert row.requests_per_node_per_epoch == req
        assert row.racks == racks
        assert row.sub_stars == stars
        assert row.cables == cables
        assert row.channels == channels
        assert abs(row.capacity_tbps - capacity) / capacity < 0.005

    def test_degenerate_single_rack(self):
        row = models.scalability_row(1)
        assert row.sub_stars == 1
        assert row.channels == 64

    def test_monotone_in_x(self):
        rows = models.scalability_table(range(1, 65))
        caps = [r.capacity_tbps for r in rows]
        chans = [r.channels for r in rows]
        assert all(a < b for a, b in zip(caps, caps[1:]))
        assert all(a < b for a, b in zip(chans, chans[1:]))

    def test_x_must_be_positive(self):
        with pytest.raises(ValueError):
            models.scalability_row(0)
