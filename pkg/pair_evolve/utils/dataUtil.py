#!/usr/bin/python3

# Pair datasets: manifest loading and image preprocessing.
#
# A manifest is a UTF-8 CSV with the header scan1,scan2,label. Image paths are
# relative to the manifest's directory and label is 1 for progression, 0 for
# regression. Samples keep manifest row order.

import csv, os
from dataclasses import dataclass

import numpy as np

from pair_evolve.utils.errorUtil import DataError, ManifestError, PgmFormatError, ShapeError
from pair_evolve.utils.pgmUtil import loadPgm
import pair_evolve.utils.tensorUtil as tensorUtil

LABEL_REGRESSION = 0
LABEL_PROGRESSION = 1
CLASS_NAMES = ( "regression", "progression" )

MANIFEST_HEADER = [ "scan1", "scan2", "label" ]

@dataclass(frozen=True)
class PairSample:
    scan1: np.ndarray
    scan2: np.ndarray
    label: int

@dataclass
class Dataset:
    samples: list
    name: str = ""

    def __post_init__(self):
        if len(self.samples) == 0:
            raise DataError("Dataset %s is empty." % (self.name or "(unnamed)"))

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def labels(self):
        return [ sample.label for sample in self.samples ]

    # Number of samples with each label, indexed by label.
    def labelCounts(self):
        counts = [ 0, 0 ]
        for sample in self.samples:
            counts[sample.label] += 1
        return counts

# Source coordinates (low index, high index, fraction) for resampling an axis
# of [inSize] samples to [outSize], with pixel centers at (i + 0.5) * scale - 0.5.
def _axisWeights(inSize, outSize):
    scale = inSize / outSize
    src = (np.arange(outSize, dtype=np.float64) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, inSize - 1)

    low = np.floor(src).astype(np.int64)
    high = np.minimum(low + 1, inSize - 1)
    return low, high, src - low

def resizeBilinear(values, targetSize):
    values = np.asarray(values, dtype=np.float64)
    y0, y1, fy = _axisWeights(values.shape[0], targetSize)
    x0, x1, fx = _axisWeights(values.shape[1], targetSize)

    top = values[y0][:, x0] * (1.0 - fx) + values[y0][:, x1] * fx
    bottom = values[y1][:, x0] * (1.0 - fx) + values[y1][:, x1] * fx
    return top * (1.0 - fy)[:, None] + bottom * fy[:, None]

# Resize a PgmImage to [targetSize] square and scale into [0, 1].
# Returns a (1, targetSize, targetSize) tensor.
def preprocess(image, targetSize):
    if image.width < 2 or image.height < 2:
        raise ShapeError("Images must be at least 2x2 pixels (got %dx%d)." % (image.width, image.height))
    if targetSize < 1:
        raise ShapeError("Target size must be at least 1 (got %d)." % targetSize)

    resized = resizeBilinear(image.pixels, targetSize) / image.maxval
    return tensorUtil.makeTensor(np.clip(resized, 0.0, 1.0), (1, targetSize, targetSize))

def _loadScan(path, imageSize, context):
    if not os.path.isfile(path):
        raise DataError("%s: missing image file %s." % (context, path))

    try:
        return preprocess(loadPgm(path), imageSize)
    except PgmFormatError as ex:
        raise PgmFormatError("%s: %s" % (context, str(ex))) from ex
    except ShapeError as ex:
        raise ShapeError("%s: %s: %s" % (context, path, str(ex))) from ex
    except OSError as ex:
        raise DataError("%s: unable to read %s: %s" % (context, path, str(ex))) from ex

def parseLabel(text, rowNumber):
    text = text.strip()
    if not text in { "0", "1" }:
        raise ManifestError("Row %d: bad label %r; labels must be 0 (regression) or 1 (progression)." % (rowNumber, text))
    return int(text)

# Load every pair named by the manifest at [path]. Rows are numbered from 1,
# not counting the header.
def loadManifest(path, imageSize=64, inputChannels=1):
    if inputChannels != 1:
        raise ShapeError("PGM images are single-channel; the model expects %d channel(s)." % inputChannels)
    if not os.path.isfile(path):
        raise DataError("Manifest %s does not exist." % path)

    baseDir = os.path.dirname(os.path.abspath(path))
    samples = []

    try:
        with open(path, "r", newline="", encoding="utf-8") as file:
            reader = csv.reader(file)
            header = next(reader, None)

            if header is None or [ part.strip() for part in header ] != MANIFEST_HEADER:
                raise ManifestError("Manifest %s must start with the header %s." % (path, ",".join(MANIFEST_HEADER)))

            for rowNumber, row in enumerate(reader, start=1):
                if len(row) == 0 or (len(row) == 1 and row[0].strip() == ""):
                    continue
                if len(row) != 3:
                    raise ManifestError("Row %d: expected 3 fields (scan1,scan2,label), got %d." % (rowNumber, len(row)))

                label = parseLabel(row[2], rowNumber)
                scan1 = _loadScan(os.path.join(baseDir, row[0].strip()), imageSize, "Row %d" % rowNumber)
                scan2 = _loadScan(os.path.join(baseDir, row[1].strip()), imageSize, "Row %d" % rowNumber)
                samples.append(PairSample(scan1, scan2, label))
    except (UnicodeDecodeError, csv.Error) as ex:
        raise ManifestError("Unable to parse manifest %s: %s" % (path, str(ex))) from ex

    if len(samples) == 0:
        raise ManifestError("Manifest %s lists no pairs: empty dataset." % path)

    return Dataset(samples, os.path.splitext(os.path.basename(path))[0])

# Load the image pair (scan1Path, scan2Path) for inference.
def loadPair(scan1Path, scan2Path, imageSize=64):
    return (_loadScan(scan1Path, imageSize, "scan1"), _loadScan(scan2Path, imageSize, "scan2"))
