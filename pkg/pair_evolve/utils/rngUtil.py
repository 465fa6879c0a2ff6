#!/usr/bin/python3

# Deterministic random streams.
#  - splitmix64 for seed expansion and per-child seed derivation.
#  - xoshiro256** 1.0 (Blackman & Vigna) for bulk draws, seeded from
#    four consecutive splitmix64 outputs, as its authors recommend.
#  - Box-Muller on consecutive uniform pairs for Gaussian noise.
# Everything here is a pure function of the seed, so streams are identical
# across runs, machines and thread counts.

import math

import numpy as np
from numba import njit

from pair_evolve.utils.errorUtil import ShapeError

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

TWO_POW_MINUS_53 = 1.0 / 9007199254740992.0
TWO_PI = 2.0 * math.pi

# The splitmix64 finalizer: add the golden-ratio increment, then two
# xor-shift-multiply rounds and a final xor-shift.
def splitmix64Mix(x):
    z = (x + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)

class SplitMix64:
    def __init__(self, seed):
        self.state = seed & MASK64

    def next(self):
        result = splitmix64Mix(self.state)
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return result

# Seed of child [childIndex] in generation [generation].
def deriveChildSeed(masterSeed, generation, childIndex):
    inner = splitmix64Mix((generation * GOLDEN_GAMMA + childIndex) & MASK64)
    return splitmix64Mix((masterSeed & MASK64) ^ inner)

def seedPopulation(masterSeed, generation, population):
    return [ deriveChildSeed(masterSeed, generation, i) for i in range(population) ]

# xoshiro256** state (4 x uint64) from a 64-bit seed.
def expandSeed(seed):
    mixer = SplitMix64(seed)
    return np.array([ mixer.next() for _ in range(4) ], dtype=np.uint64)

@njit(nogil=True, cache=True)
def _rotl(x, k):
    return (x << k) | (x >> (np.uint64(64) - k))

# Advance [s] in place and return the next 64-bit output.
@njit(nogil=True, cache=True)
def xoshiroNext(s):
    result = _rotl(s[1] * np.uint64(5), np.uint64(7)) * np.uint64(9)
    t = s[1] << np.uint64(17)

    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]

    s[2] ^= t
    s[3] = _rotl(s[3], np.uint64(45))

    return result

# Both Box-Muller outputs for uniforms u1 in (0, 1] and u2 in [0, 1).
@njit(nogil=True, cache=True)
def boxMuller(u1, u2):
    r = math.sqrt(-2.0 * math.log(u1))
    theta = TWO_PI * u2
    return r * math.cos(theta), r * math.sin(theta)

@njit(nogil=True, cache=True)
def _fillGaussian(s, out):
    n = out.shape[0]
    i = 0

    while i < n:
        u1 = 1.0 - np.float64(xoshiroNext(s) >> np.uint64(11)) * TWO_POW_MINUS_53
        u2 = np.float64(xoshiroNext(s) >> np.uint64(11)) * TWO_POW_MINUS_53
        z1, z2 = boxMuller(u1, u2)

        out[i] = z1
        if i + 1 < n:
            out[i + 1] = z2
        i += 2

# Uniforms strictly inside (0, 1).
@njit(nogil=True, cache=True)
def _fillUniformOpen(s, out):
    for i in range(out.shape[0]):
        out[i] = (np.float64(xoshiroNext(s) >> np.uint64(11)) + 0.5) * TWO_POW_MINUS_53

# A seeded xoshiro256** stream. Holds mutable state; not for sharing
# between threads.
class Xoshiro256:
    def __init__(self, seed):
        self.s = expandSeed(seed)

    def nextUint64(self):
        return int(xoshiroNext(self.s))

    # Uniform double in [0, 1).
    def nextDouble(self):
        return (self.nextUint64() >> 11) * TWO_POW_MINUS_53

    # Uniform integer in [low, high], inclusive.
    def nextInt(self, low, high):
        return low + int(self.nextDouble() * (high - low + 1))

    def uniform(self, low, high):
        return low + (high - low) * self.nextDouble()

    def uniformOpen(self, count):
        out = np.empty(count, dtype=np.float64)
        _fillUniformOpen(self.s, out)
        return out

    def gaussian(self, count):
        out = np.empty(count, dtype=np.float32)
        _fillGaussian(self.s, out)
        return out

    # Fisher-Yates, in place.
    def shuffle(self, items):
        for i in range(len(items) - 1, 0, -1):
            j = self.nextInt(0, i)
            items[i], items[j] = items[j], items[i]
        return items

# [length] standard-normal float32 values from the stream of [seed].
def sampleNoise(seed, length):
    if length < 1:
        raise ShapeError("Noise length must be at least 1 (got %d)." % length)

    return Xoshiro256(seed).gaussian(length)
