#!/usr/bin/python3

# Forward-pass kernels for the pair classifier. No gradients anywhere.
#
# A tensor is a C-contiguous float32 ndarray shaped (channels, height, width),
# so its flat data is channel-major, then row-major.
#
# The reference kernels accumulate in float32 in a fixed order
# (out-channel -> in-channel -> kernel row -> kernel col for convolutions,
# ascending input index for dense layers). numba's default (non-fastmath)
# compilation keeps that order, which makes results bitwise reproducible.

from dataclasses import dataclass

import numpy as np
from numba import njit

from pair_evolve.utils.errorUtil import ShapeError

KERNEL_SIZE = 3

# Standard self-normalizing constants.
SELU_LAMBDA = np.float32(1.05070098)
SELU_ALPHA = np.float32(1.67326324)

@dataclass(frozen=True)
class ConvWeights:
    kernel: np.ndarray # (outChannels, inChannels, 3, 3)
    bias: np.ndarray   # (outChannels,)

    def __post_init__(self):
        object.__setattr__(self, "kernel", np.ascontiguousarray(self.kernel, dtype=np.float32))
        object.__setattr__(self, "bias", np.ascontiguousarray(self.bias, dtype=np.float32))

        if self.kernel.ndim != 4 or self.kernel.shape[2:] != (KERNEL_SIZE, KERNEL_SIZE):
            raise ShapeError("Convolution kernels must be %dx%d; got shape %s."
                    % (KERNEL_SIZE, KERNEL_SIZE, str(self.kernel.shape)))
        if self.bias.shape != (self.kernel.shape[0],):
            raise ShapeError("Convolution bias has shape %s, expected (%d,)."
                    % (str(self.bias.shape), self.kernel.shape[0]))

    @property
    def outChannels(self):
        return self.kernel.shape[0]

    @property
    def inChannels(self):
        return self.kernel.shape[1]

# Wrap [data] as a tensor, optionally checking/applying [shape].
def makeTensor(data, shape=None):
    result = np.ascontiguousarray(data, dtype=np.float32)

    if shape is not None:
        shape = tuple(shape)
        if result.size != int(np.prod(shape)):
            raise ShapeError("Cannot view %d values as a tensor of shape %s." % (result.size, str(shape)))
        result = result.reshape(shape)

    if result.ndim != 3:
        raise ShapeError("Tensors are (channels, height, width); got %d dimension(s)." % result.ndim)

    return result

# Output length along one spatial axis.
def convOutputSize(size, stride, pad):
    return (size + 2 * pad - KERNEL_SIZE) // stride + 1

@njit(nogil=True, cache=True)
def _conv2dReference(inp, kernel, bias, stride, pad, out):
    inC, H, W = inp.shape
    outC, outH, outW = out.shape

    for oc in range(outC):
        for oy in range(outH):
            for ox in range(outW):
                acc = np.float32(0.0)
                for ic in range(inC):
                    for ky in range(3):
                        y = oy * stride - pad + ky
                        if y < 0 or y >= H:
                            continue
                        for kx in range(3):
                            x = ox * stride - pad + kx
                            if x < 0 or x >= W:
                                continue
                            acc += kernel[oc, ic, ky, kx] * inp[ic, y, x]
                out[oc, oy, ox] = bias[oc] + acc

# im2col + one matrix product. Faster; summation order is left to BLAS.
def _conv2dFast(inp, kernel, bias, stride, pad, outH, outW):
    padded = np.pad(inp, ((0, 0), (pad, pad), (pad, pad)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, (KERNEL_SIZE, KERNEL_SIZE), axis=(1, 2))
    windows = windows[:, ::stride, ::stride][:, :outH, :outW]

    # (inC, outH, outW, 3, 3) -> (inC*9, outH*outW)
    cols = windows.transpose(0, 3, 4, 1, 2).reshape(inp.shape[0] * KERNEL_SIZE * KERNEL_SIZE, outH * outW)
    result = kernel.reshape(kernel.shape[0], -1) @ cols + bias[:, None]

    return np.ascontiguousarray(result.reshape(kernel.shape[0], outH, outW), dtype=np.float32)

# Zero-padded 3x3 convolution of [inp] by [w].
def conv2dForward(inp, w, stride, pad, fast=False):
    if stride < 1:
        raise ShapeError("Convolution stride must be >= 1 (got %d)." % stride)
    if pad < 0:
        raise ShapeError("Convolution padding must be >= 0 (got %d)." % pad)
    if inp.ndim != 3 or inp.shape[0] != w.inChannels:
        raise ShapeError("Input has shape %s but the kernels expect %d input channel(s)."
                % (str(inp.shape), w.inChannels))

    inp = np.ascontiguousarray(inp, dtype=np.float32)
    kernel = np.ascontiguousarray(w.kernel, dtype=np.float32)
    bias = np.ascontiguousarray(w.bias, dtype=np.float32)

    _, H, W = inp.shape
    outH = convOutputSize(H, stride, pad)
    outW = convOutputSize(W, stride, pad)

    if H + 2 * pad < KERNEL_SIZE or W + 2 * pad < KERNEL_SIZE or outH < 1 or outW < 1:
        raise ShapeError("Degenerate convolution: input %dx%d with pad %d and stride %d leaves no output."
                % (H, W, pad, stride))

    if fast:
        return _conv2dFast(inp, kernel, bias, stride, pad, outH, outW)

    out = np.empty((w.outChannels, outH, outW), dtype=np.float32)
    _conv2dReference(inp, kernel, bias, stride, pad, out)
    return out

@njit(nogil=True, cache=True)
def _denseReference(x, weights, bias, out):
    for i in range(weights.shape[0]):
        acc = np.float32(0.0)
        for j in range(weights.shape[1]):
            acc += weights[i, j] * x[j]
        out[i] = bias[i] + acc

# out = bias + weights . x, for weights shaped (out, in).
def denseForward(x, weights, bias, fast=False):
    if x.ndim != 1 or weights.ndim != 2 or weights.shape[1] != x.shape[0]:
        raise ShapeError("Dense layer expects %s inputs; got a vector of shape %s."
                % (str(weights.shape[1:]), str(x.shape)))
    if bias.shape != (weights.shape[0],):
        raise ShapeError("Dense bias has shape %s, expected (%d,)." % (str(bias.shape), weights.shape[0]))

    x = np.ascontiguousarray(x, dtype=np.float32)
    weights = np.ascontiguousarray(weights, dtype=np.float32)
    bias = np.ascontiguousarray(bias, dtype=np.float32)

    if fast:
        return (weights @ x + bias).astype(np.float32)

    out = np.empty(weights.shape[0], dtype=np.float32)
    _denseReference(x, weights, bias, out)
    return out

def relu(t):
    return np.maximum(t, np.float32(0.0))

def selu(x):
    x = np.asarray(x, dtype=np.float32)
    negative = (SELU_LAMBDA * SELU_ALPHA) * np.expm1(np.minimum(x, np.float32(0.0)))
    return np.where(x > 0, SELU_LAMBDA * x, negative).astype(np.float32)

def flatten(t):
    return np.ascontiguousarray(t, dtype=np.float32).reshape(-1)

def reshape(vector, shape):
    return makeTensor(vector, shape)
