#!/usr/bin/python3

# Synthetic lesion-change pairs.
#
# scan 1 is a dark background with a few bright, soft-edged discs plus Gaussian
# pixel noise. For progression, scan 2 has the same discs grown by
# radiusGrowth and extraBlobs new ones; for regression, the discs shrink by the
# same factor and extraBlobs of them disappear. Everything is drawn from one
# xoshiro256** stream, so a config always produces byte-identical files.

import csv, os
from dataclasses import dataclass

import numpy as np

from pair_evolve.utils.errorUtil import ConfigError
from pair_evolve.utils.dataUtil import LABEL_PROGRESSION, LABEL_REGRESSION, MANIFEST_HEADER
from pair_evolve.utils.pgmUtil import writePgm
from pair_evolve.utils.rngUtil import Xoshiro256

MAXVAL = 255

@dataclass
class SyntheticTaskConfig:
    nPairs: int = 20
    imageSize: int = 64
    blobCountRange: tuple = (1, 4)
    radiusRange: tuple = (3.0, 7.0)
    extraBlobs: int = 2
    radiusGrowth: float = 1.4
    noiseStd: float = 0.05
    seed: int = 0
    background: float = 0.1
    brightness: float = 0.8

    def validate(self):
        if self.nPairs < 2 or self.nPairs % 2 != 0:
            raise ConfigError("The number of pairs must be even and at least 2 so classes balance (got %d)." % self.nPairs)
        if self.imageSize < 2:
            raise ConfigError("Synthetic images must be at least 2 pixels wide (got %d)." % self.imageSize)

        low, high = self.blobCountRange
        if low < 0 or high < low:
            raise ConfigError("Bad blob count range (%d, %d)." % (low, high))

        low, high = self.radiusRange
        if low <= 0 or high < low:
            raise ConfigError("Bad radius range (%g, %g)." % (low, high))

        if self.extraBlobs < 0:
            raise ConfigError("extraBlobs must be >= 0 (got %d)." % self.extraBlobs)
        if self.radiusGrowth < 1.0:
            raise ConfigError("radiusGrowth must be >= 1 (got %g)." % self.radiusGrowth)
        if self.noiseStd < 0:
            raise ConfigError("noiseStd must be >= 0 (got %g)." % self.noiseStd)
        return self

# A disc is (centerX, centerY, radius) in pixel units.
def _drawBlob(rng, cfg):
    radius = rng.uniform(*cfg.radiusRange)
    margin = min(radius, cfg.imageSize / 2.0)
    return (rng.uniform(margin, cfg.imageSize - margin), rng.uniform(margin, cfg.imageSize - margin), radius)

# Quantized (imageSize, imageSize) image of [blobs] with noise from [rng].
def renderScan(blobs, cfg, rng):
    size = cfg.imageSize
    centers = np.arange(size, dtype=np.float64) + 0.5
    yy, xx = np.meshgrid(centers, centers, indexing="ij")
    coverage = np.zeros((size, size), dtype=np.float64)

    # Discs fade out over one pixel at their edge.
    for cx, cy, radius in blobs:
        dist = np.sqrt((xx - cx) ** 2 + (yy - cy) ** 2)
        coverage = np.maximum(coverage, np.clip(radius + 0.5 - dist, 0.0, 1.0))

    image = cfg.background + (cfg.brightness - cfg.background) * coverage
    noise = rng.gaussian(size * size).astype(np.float64).reshape(size, size)
    image = np.clip(image + cfg.noiseStd * noise, 0.0, 1.0)

    return np.rint(image * MAXVAL).astype(np.uint8)

# [(scan1 pixels, scan2 pixels, label)] for the whole task.
def generatePairs(cfg):
    cfg.validate()
    rng = Xoshiro256(cfg.seed)

    labels = [ LABEL_PROGRESSION ] * (cfg.nPairs // 2) + [ LABEL_REGRESSION ] * (cfg.nPairs // 2)
    rng.shuffle(labels)

    pairs = []
    for label in labels:
        count = rng.nextInt(*cfg.blobCountRange)
        blobs = [ _drawBlob(rng, cfg) for _ in range(count) ]

        if label == LABEL_PROGRESSION:
            later = [ (cx, cy, r * cfg.radiusGrowth) for cx, cy, r in blobs ]
            later.extend(_drawBlob(rng, cfg) for _ in range(cfg.extraBlobs))
        else:
            kept = blobs[:max(0, len(blobs) - cfg.extraBlobs)]
            later = [ (cx, cy, r / cfg.radiusGrowth) for cx, cy, r in kept ]

        scan1 = renderScan(blobs, cfg, rng)
        scan2 = renderScan(later, cfg, rng)
        pairs.append((scan1, scan2, label))

    return pairs

# Write the task as PGM files plus [name].csv in [outDir]; returns the manifest path.
def genSynthetic(cfg, outDir, name="train"):
    pairs = generatePairs(cfg)
    os.makedirs(outDir, exist_ok=True)
    manifestPath = os.path.join(outDir, "%s.csv" % name)

    with open(manifestPath, "w", newline="", encoding="utf-8") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)

        for index, (scan1, scan2, label) in enumerate(pairs):
            names = [ "%s_%04d_scan%d.pgm" % (name, index, which) for which in (1, 2) ]
            writePgm(os.path.join(outDir, names[0]), scan1, MAXVAL)
            writePgm(os.path.join(outDir, names[1]), scan2, MAXVAL)
            writer.writerow([ names[0], names[1], label ])

    return manifestPath
