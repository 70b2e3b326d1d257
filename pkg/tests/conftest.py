from __future__ import annotations

import numpy as np
import pytest

from ocsched import (
    Algorithm,
    NetworkConfig,
    SchedulerConfig,
    SizeDistribution,
    TrafficConfig,
    validate,
)


def make_config(
    n_nodes=64,
    epoch_ns=360,
    algorithm=Algorithm.SLOT_LEVEL,
    requests_per_node=3,
    distribution=SizeDistribution.FIXED,
    input_load=1.0,
    seed=1,
    n_epochs=200,
    slot_ns=20,
    **scheduler_kwargs,
):
    return validate(
        NetworkConfig(n_nodes=n_nodes, n_wavelengths=n_nodes, epoch_ns=epoch_ns,
                      slot_ns=slot_ns),
        SchedulerConfig(algorithm=algorithm, **scheduler_kwargs),
        TrafficConfig(requests_per_node=requests_per_node, distribution=distribution,
                      input_load=input_load, seed=seed, n_epochs=n_epochs),
    )


@pytest.fixture
def small_slot_config():
    return make_config(n_nodes=8, epoch_ns=120, requests_per_node=3, n_epochs=50)


@pytest.fixture
def small_epoch_config():
    return make_config(n_nodes=8, epoch_ns=120, algorithm=Algorithm.EPOCH_LEVEL,
                       requests_per_node=3, n_epochs=50)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240731)
