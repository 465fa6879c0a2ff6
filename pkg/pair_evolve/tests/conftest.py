#!/usr/bin/python3

# Shared fixtures. Anything marked slow (acceptance-scale runs) only runs
# with --runslow.

import numpy as np
import pytest

from pair_evolve.utils.dataUtil import Dataset, PairSample
from pair_evolve.utils.modelUtil import ModelConfig

def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="Run slow tests.")

def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance test (needs --runslow)")

def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return

    skipSlow = pytest.mark.skip(reason="Needs --runslow.")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skipSlow)

# The smallest network the model accepts: 16x16 input, 4 channels.
@pytest.fixture
def tinyConfig():
    return ModelConfig(inputSize=16, convChannels=4, fcBranch=8, fc2=8, fc3=4).validate()

# [count] random pairs for [config], labels alternating 1, 0, 1, ...
def makeDataset(config, count, seed=0):
    rng = np.random.default_rng(seed)
    samples = []

    for i in range(count):
        scan1 = rng.random(config.inputShape()).astype(np.float32)
        scan2 = rng.random(config.inputShape()).astype(np.float32)
        samples.append(PairSample(scan1, scan2, 1 - i % 2))
    return Dataset(samples, "random")

@pytest.fixture
def tinyDataset(tinyConfig):
    return makeDataset(tinyConfig, 6)
