#!/usr/bin/python3

# The two-branch pair classifier.
#
#   scan 1 -> [conv s2 p1 -> ReLU] x4 -> flatten -> dense -> SELU = FC1-1
#   scan 2 -> [conv s2 p1 -> ReLU] x4 -> flatten -> dense -> SELU = FC1-2
#   concat(FC1-1, FC1-2) -> dense -> SELU -> dense -> SELU -> dense = 2 logits
#
# All parameters live in one flat float32 genome; the layer weights a model
# exposes are read-only views into it. Genome layout, layer by layer:
#   branch1 conv1..convN, branch1 dense, branch2 (unless shared), fc2, fc3, out
# and within a layer the weights (row-major) come before the biases.

import math
from collections import namedtuple
from dataclasses import dataclass, asdict, fields

import numpy as np

from pair_evolve.utils.errorUtil import ConfigError, ShapeError
from pair_evolve.utils.rngUtil import Xoshiro256
import pair_evolve.utils.tensorUtil as tensorUtil

@dataclass
class ModelConfig:
    inputSize: int = 64
    inputChannels: int = 1
    convLayers: int = 4
    convChannels: int = 32
    kernel: int = 3
    stride: int = 2
    pad: int = 1
    fcBranch: int = 256
    fc2: int = 256
    fc3: int = 128
    outputs: int = 2
    shareBranchWeights: bool = False

    def validate(self):
        if self.kernel != tensorUtil.KERNEL_SIZE:
            raise ConfigError("Only %dx%d kernels are supported (got %d)."
                    % (tensorUtil.KERNEL_SIZE, tensorUtil.KERNEL_SIZE, self.kernel))
        if self.outputs != 2:
            raise ConfigError("The classifier has exactly 2 outputs, progression and regression (got %d)." % self.outputs)
        if self.inputSize < 16:
            raise ConfigError("Input size must be at least 16 pixels (got %d)." % self.inputSize)

        for name in [ "inputChannels", "convLayers", "convChannels", "stride", "fcBranch", "fc2", "fc3" ]:
            if getattr(self, name) < 1:
                raise ConfigError("%s must be at least 1 (got %d)." % (name, getattr(self, name)))
        if self.pad < 0:
            raise ConfigError("pad must be >= 0 (got %d)." % self.pad)

        if self.featureSizes()[-1] < 1:
            raise ConfigError("An input of %d pixels is too small for %d convolutions." % (self.inputSize, self.convLayers))
        return self

    # Spatial size of the input, then after each convolution.
    def featureSizes(self):
        sizes = [ self.inputSize ]
        for _ in range(self.convLayers):
            sizes.append(tensorUtil.convOutputSize(sizes[-1], self.stride, self.pad))
        return sizes

    def flattenLength(self):
        return self.convChannels * self.featureSizes()[-1] ** 2

    def inputShape(self):
        return (self.inputChannels, self.inputSize, self.inputSize)

    def toDict(self):
        return asdict(self)

    @classmethod
    def fromDict(cls, values):
        known = { field.name for field in fields(cls) }
        unknown = set(values) - known
        if unknown:
            raise ConfigError("Unknown model setting(s): %s" % ", ".join(sorted(unknown)))
        return cls(**values)

# One parameterized layer. Biases are always (weightShape[0],).
LayerSpec = namedtuple("LayerSpec", [ "name", "weightShape", "fanIn", "fanOut" ])

def branchNames(config):
    return [ "branch1" ] if config.shareBranchWeights else [ "branch1", "branch2" ]

# Layers in canonical genome order.
def layerLayout(config):
    layers = []

    for branch in branchNames(config):
        inChannels = config.inputChannels
        for i in range(config.convLayers):
            area = config.kernel * config.kernel
            layers.append(LayerSpec("%s.conv%d" % (branch, i + 1),
                    (config.convChannels, inChannels, config.kernel, config.kernel),
                    area * inChannels, area * config.convChannels))
            inChannels = config.convChannels

        flat = config.flattenLength()
        layers.append(LayerSpec("%s.fc1" % branch, (config.fcBranch, flat), flat, config.fcBranch))

    layers.append(LayerSpec("fc2", (config.fc2, 2 * config.fcBranch), 2 * config.fcBranch, config.fc2))
    layers.append(LayerSpec("fc3", (config.fc3, config.fc2), config.fc2, config.fc3))
    layers.append(LayerSpec("out", (config.outputs, config.fc3), config.fc3, config.outputs))
    return layers

def layerSize(spec):
    return int(np.prod(spec.weightShape)) + spec.weightShape[0]

def genomeLen(config):
    return sum(layerSize(spec) for spec in layerLayout(config))

# (spec, weight offset, bias offset, end offset) for every layer.
def layerOffsets(config):
    result = []
    offset = 0

    for spec in layerLayout(config):
        biasStart = offset + int(np.prod(spec.weightShape))
        end = biasStart + spec.weightShape[0]
        result.append((spec, offset, biasStart, end))
        offset = end
    return result

# Which parameter genome[index] is: (layer name, "weight" or "bias", index within it).
def locateParameter(config, index):
    for spec, start, biasStart, end in layerOffsets(config):
        if start <= index < biasStart:
            return (spec.name, "weight", np.unravel_index(index - start, spec.weightShape))
        if biasStart <= index < end:
            return (spec.name, "bias", (index - biasStart,))
    raise ShapeError("Genome index %d is out of range." % index)

def glorotBound(fanIn, fanOut):
    return math.sqrt(6.0 / (fanIn + fanOut))

class PairModel:
    def __init__(self, config, genome):
        self.config = config
        self.genome = genome
        self.layers = {}

        for spec, start, biasStart, end in layerOffsets(config):
            weights = genome[start:biasStart].reshape(spec.weightShape)
            bias = genome[biasStart:end]
            if len(spec.weightShape) == 4:
                self.layers[spec.name] = tensorUtil.ConvWeights(weights, bias)
            else:
                self.layers[spec.name] = (weights, bias)

        branch2 = "branch1" if config.shareBranchWeights else "branch2"
        self.branch1 = self._branch("branch1")
        self.branch2 = self._branch(branch2)
        self.head = [ self.layers["fc2"], self.layers["fc3"], self.layers["out"] ]

    def _branch(self, name):
        convs = [ self.layers["%s.conv%d" % (name, i + 1)] for i in range(self.config.convLayers) ]
        return (convs, self.layers["%s.fc1" % name])

# Model over a private, read-only copy of [genome].
def fromGenome(config, genome):
    config.validate()
    genome = np.array(genome, dtype=np.float32, copy=True).reshape(-1)

    expected = genomeLen(config)
    if genome.shape[0] != expected:
        raise ShapeError("Genome has %d values; this model needs %d." % (genome.shape[0], expected))

    genome.flags.writeable = False
    return PairModel(config, genome)

def toGenome(model):
    return model.genome.copy()

# Glorot-uniform weights, zero biases. Weights are drawn in genome order
# from the xoshiro stream of [seed].
def buildModel(config, seed):
    config.validate()
    rng = Xoshiro256(seed)
    genome = np.zeros(genomeLen(config), dtype=np.float32)

    for spec, start, biasStart, _ in layerOffsets(config):
        bound = glorotBound(spec.fanIn, spec.fanOut)
        uniforms = rng.uniformOpen(biasStart - start)
        weights = ((2.0 * uniforms - 1.0) * bound).astype(np.float32)

        # float32 rounding may land on the bound itself.
        onBound = np.abs(weights.astype(np.float64)) >= bound
        weights[onBound] = np.nextafter(weights[onBound], np.float32(0.0))

        genome[start:biasStart] = weights

    return fromGenome(config, genome)

def _branchForward(branch, scan, config, fast):
    convs, (weights, bias) = branch
    t = scan

    for conv in convs:
        t = tensorUtil.relu(tensorUtil.conv2dForward(t, conv, config.stride, config.pad, fast))

    return tensorUtil.selu(tensorUtil.denseForward(tensorUtil.flatten(t), weights, bias, fast))

# Raw output logits (no activation) for the pair (scan1, scan2).
def forward(model, scan1, scan2, fast=False):
    config = model.config
    expected = config.inputShape()

    for name, scan in (("scan1", scan1), ("scan2", scan2)):
        if tuple(scan.shape) != expected:
            raise ShapeError("%s has shape %s; the model expects %s." % (name, str(tuple(scan.shape)), str(expected)))

    fc11 = _branchForward(model.branch1, scan1, config, fast)
    fc12 = _branchForward(model.branch2, scan2, config, fast)
    hidden = np.concatenate([ fc11, fc12 ])

    fc2, fc3, out = model.head
    hidden = tensorUtil.selu(tensorUtil.denseForward(hidden, fc2[0], fc2[1], fast))
    hidden = tensorUtil.selu(tensorUtil.denseForward(hidden, fc3[0], fc3[1], fast))
    return tensorUtil.denseForward(hidden, out[0], out[1], fast)

# Larger logit wins; an exact tie goes to class 0.
def argmaxClass(logits):
    return 1 if logits[1] > logits[0] else 0

def predict(model, scan1, scan2, fast=False):
    return argmaxClass(forward(model, scan1, scan2, fast))
