#!/usr/bin/python3

from dataclasses import replace

import numpy as np
import pytest

from pair_evolve.utils.errorUtil import ConfigError, ShapeError
from pair_evolve.utils.modelUtil import ModelConfig, layerLayout, layerSize, layerOffsets, genomeLen, \
        locateParameter, glorotBound, buildModel, fromGenome, toGenome, forward, predict, argmaxClass

def randomPair(config, seed):
    rng = np.random.default_rng(seed)
    return (rng.random(config.inputShape()).astype(np.float32), rng.random(config.inputShape()).astype(np.float32))

def testDefaultGenomeLength():
    config = ModelConfig()
    assert genomeLen(config) == 483266
    assert genomeLen(config) == 2 * (320 + 3 * 9248 + 131328) + 131328 + 32896 + 258

def testLayerSizes():
    sizes = { spec.name: layerSize(spec) for spec in layerLayout(ModelConfig()) }

    assert sizes["branch1.conv1"] == 320
    assert sizes["branch1.conv2"] == sizes["branch2.conv4"] == 9248
    assert sizes["branch1.fc1"] == sizes["branch2.fc1"] == 131328
    assert sizes["fc2"] == 131328
    assert sizes["fc3"] == 32896
    assert sizes["out"] == 258

def testLayoutOrder():
    names = [ spec.name for spec in layerLayout(ModelConfig()) ]
    assert names == [ "branch1.conv1", "branch1.conv2", "branch1.conv3", "branch1.conv4", "branch1.fc1",
                      "branch2.conv1", "branch2.conv2", "branch2.conv3", "branch2.conv4", "branch2.fc1",
                      "fc2", "fc3", "out" ]

def testSharedBranches():
    config = ModelConfig(shareBranchWeights=True)
    assert genomeLen(config) == 483266 - (320 + 3 * 9248 + 131328)
    assert not any(spec.name.startswith("branch2") for spec in layerLayout(config))

def testFeatureSizes():
    config = ModelConfig()
    assert config.featureSizes() == [ 64, 32, 16, 8, 4 ]
    assert config.flattenLength() == 512

def testConfigValidation():
    for bad in [ ModelConfig(kernel=5), ModelConfig(outputs=3), ModelConfig(inputSize=8),
                 ModelConfig(convChannels=0), ModelConfig(pad=-1) ]:
        with pytest.raises(ConfigError):
            bad.validate()

    with pytest.raises(ConfigError):
        ModelConfig.fromDict({ "inputSize": 64, "depth": 3 })
    assert ModelConfig.fromDict(ModelConfig(inputSize=32).toDict()) == ModelConfig(inputSize=32)

def testLocateParameter():
    config = ModelConfig()

    assert locateParameter(config, 0) == ("branch1.conv1", "weight", (0, 0, 0, 0))
    assert locateParameter(config, 288) == ("branch1.conv1", "bias", (0,))
    assert locateParameter(config, 320) == ("branch1.conv2", "weight", (0, 0, 0, 0))
    assert locateParameter(config, genomeLen(config) - 1) == ("out", "bias", (1,))

    with pytest.raises(ShapeError):
        locateParameter(config, genomeLen(config))

def testGlorotInit():
    config = ModelConfig()
    model = buildModel(config, 1)

    assert glorotBound(9, 288) == pytest.approx(0.14213, abs=1e-5)

    for spec, start, biasStart, end in layerOffsets(config):
        weights = model.genome[start:biasStart]
        bound = glorotBound(spec.fanIn, spec.fanOut)

        assert np.all(np.abs(weights.astype(np.float64)) < bound), spec.name
        assert np.all(model.genome[biasStart:end] == 0), spec.name
        assert weights.std() > bound / 4, spec.name
        if weights.size >= 1000:
            assert abs(weights.astype(np.float64).mean()) < bound / 10, spec.name

def testBuildIsDeterministic(tinyConfig):
    first = toGenome(buildModel(tinyConfig, 11))
    second = toGenome(buildModel(tinyConfig, 11))

    assert first.dtype == np.float32
    assert first.tobytes() == second.tobytes()
    assert first.tobytes() != toGenome(buildModel(tinyConfig, 12)).tobytes()

def testGenomeRoundTrip(tinyConfig):
    genome = np.random.default_rng(0).standard_normal(genomeLen(tinyConfig)).astype(np.float32)
    model = fromGenome(tinyConfig, genome)

    assert toGenome(model).tobytes() == genome.tobytes()

    # The model keeps its own read-only copy.
    genome[0] += 1.0
    assert toGenome(model)[0] != genome[0]
    with pytest.raises(ValueError):
        model.genome[0] = 0.0

def testGenomeLengthMismatch(tinyConfig):
    with pytest.raises(ShapeError):
        fromGenome(tinyConfig, np.zeros(genomeLen(tinyConfig) - 1, dtype=np.float32))

def testZeroGenome():
    config = ModelConfig()
    model = fromGenome(config, np.zeros(genomeLen(config), dtype=np.float32))
    scan1, scan2 = randomPair(config, 3)

    logits = forward(model, scan1, scan2)
    assert logits.shape == (2,)
    assert list(logits) == [ 0.0, 0.0 ]
    assert predict(model, scan1, scan2) == 0

def testArgmax():
    assert argmaxClass([ 1.0, -1.0 ]) == 0
    assert argmaxClass([ -0.1, 0.2 ]) == 1
    assert argmaxClass([ 0.0, 0.0 ]) == 0

def testForwardIsDeterministic(tinyConfig):
    model = buildModel(tinyConfig, 4)
    scan1, scan2 = randomPair(tinyConfig, 4)

    first = forward(model, scan1, scan2)
    assert first.tobytes() == forward(model, scan1.copy(), scan2.copy()).tobytes()
    np.testing.assert_allclose(forward(model, scan1, scan2, fast=True), first, rtol=1e-4, atol=1e-5)

def testForwardRejectsWrongShape(tinyConfig):
    model = buildModel(tinyConfig, 4)
    scan1, _ = randomPair(tinyConfig, 4)

    with pytest.raises(ShapeError):
        forward(model, scan1, np.zeros((1, 8, 8), dtype=np.float32))

def testBranchesAreOrdered():
    config = ModelConfig(inputSize=16, convChannels=8, fcBranch=16, fc2=16, fc3=8)
    model = buildModel(config, 21)
    scan1, scan2 = randomPair(config, 21)

    assert not np.array_equal(forward(model, scan1, scan2), forward(model, scan2, scan1))

def testSharedBranchesUseOneWeightSet():
    config = ModelConfig(inputSize=16, convChannels=4, fcBranch=8, fc2=8, fc3=4, shareBranchWeights=True)
    model = buildModel(config, 2)
    assert model.branch1 is not None
    assert model.branch2[1][0] is model.branch1[1][0]

def testOutputBiasShiftKeepsPrediction(tinyConfig):
    genome = toGenome(buildModel(tinyConfig, 8))
    _, _, biasStart, end = layerOffsets(tinyConfig)[-1]

    shifted = genome.copy()
    shifted[biasStart:end] += np.float32(0.5)

    model = fromGenome(tinyConfig, genome)
    shiftedModel = fromGenome(tinyConfig, shifted)
    for seed in range(5):
        scan1, scan2 = randomPair(tinyConfig, seed)
        assert predict(model, scan1, scan2) == predict(shiftedModel, scan1, scan2)

def testSmallerInput():
    config = replace(ModelConfig(), inputSize=32)
    assert config.validate().featureSizes() == [ 32, 16, 8, 4, 2 ]
    assert genomeLen(config) < genomeLen(ModelConfig())
