#!/usr/bin/python3

import filecmp, os

import numpy as np
import pytest

from pair_evolve.utils.dataUtil import loadManifest, LABEL_PROGRESSION
from pair_evolve.utils.errorUtil import ConfigError
from pair_evolve.utils.syntheticUtil import SyntheticTaskConfig, generatePairs, genSynthetic

def testBalance(tmp_path):
    manifest = genSynthetic(SyntheticTaskConfig(nPairs=20, imageSize=32, seed=7), str(tmp_path))
    lines = open(manifest, encoding="utf-8").read().split("\n")

    assert lines[0] == "scan1,scan2,label"
    labels = [ line.split(",")[2] for line in lines[1:] if line ]
    assert len(labels) == 20
    assert labels.count("1") == 10 and labels.count("0") == 10

    dataset = loadManifest(manifest, imageSize=32)
    assert dataset.labelCounts() == [ 10, 10 ]

def testDeterministic(tmp_path):
    config = SyntheticTaskConfig(nPairs=6, imageSize=24, seed=11)
    genSynthetic(config, str(tmp_path / "a"))
    genSynthetic(config, str(tmp_path / "b"))

    names = sorted(os.listdir(tmp_path / "a"))
    assert names == sorted(os.listdir(tmp_path / "b"))
    assert len(names) == 13
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", names, shallow=False)
    assert mismatch == [] and errors == []

def testSeedChangesTask():
    first = generatePairs(SyntheticTaskConfig(nPairs=4, imageSize=16, seed=1))
    second = generatePairs(SyntheticTaskConfig(nPairs=4, imageSize=16, seed=2))
    assert any(a[0].tobytes() != b[0].tobytes() for a, b in zip(first, second))

def testProgressionGetsBrighter():
    pairs = generatePairs(SyntheticTaskConfig(nPairs=100, imageSize=64, seed=3))
    progression = [ (scan1, scan2) for scan1, scan2, label in pairs if label == LABEL_PROGRESSION ]

    brighter = sum(1 for scan1, scan2 in progression if scan2.mean() > scan1.mean())
    assert brighter >= 0.95 * len(progression)

def testBrightMassRule():
    pairs = generatePairs(SyntheticTaskConfig(nPairs=100, imageSize=64, seed=4))

    def brightMass(scan):
        return float(np.sum(scan.astype(np.float64)))

    correct = sum(1 for scan1, scan2, label in pairs
                  if (1 if brightMass(scan2) - brightMass(scan1) > 0 else 0) == label)
    assert correct >= 90

def testPixels():
    scan1, scan2, _ = generatePairs(SyntheticTaskConfig(nPairs=2, imageSize=20, seed=0))[0]
    assert scan1.shape == scan2.shape == (20, 20)
    assert scan1.dtype == np.uint8

@pytest.mark.parametrize("pairs", [ 1, 3, 0 ])
def testOddPairCounts(pairs):
    with pytest.raises(ConfigError, match="even"):
        SyntheticTaskConfig(nPairs=pairs).validate()

def testOtherValidation():
    for config in [ SyntheticTaskConfig(imageSize=1), SyntheticTaskConfig(radiusRange=(0.0, 2.0)),
                    SyntheticTaskConfig(radiusGrowth=0.5), SyntheticTaskConfig(noiseStd=-1.0) ]:
        with pytest.raises(ConfigError):
            config.validate()
