#!/usr/bin/python3

# Checkpoints and metrics.
#
# Checkpoint layout (all integers little-endian):
#   "DNEC" | u32 version (1) | u64 generation | u64 master seed
#   | u32 config length | config JSON (UTF-8) | u64 genome length
#   | genome as float32 little-endian
# The config JSON is {"model": {...}, "evolution": {...}, "perfectStreak": n}
# with sorted keys. perfectStreak is the number of generations the parent has
# been perfect in a row, so early stopping resumes where it left off.
#
# Metrics are a CSV with one row per generation.

import csv, json, os, struct, tempfile
from dataclasses import dataclass
from itertools import accumulate

import numpy as np

from pair_evolve.utils.errorUtil import PersistError, ConfigError
from pair_evolve.utils.evolveUtil import EvolutionConfig, GenerationStats
from pair_evolve.utils.modelUtil import ModelConfig, genomeLen

MAGIC = b"DNEC"
VERSION = 1
HEADER = struct.Struct("<4sIQQI")
GENOME_LEN = struct.Struct("<Q")

METRICS_HEADER = [ "generation", "best_child", "mean_child", "worst_child",
                   "parent_fitness", "test_accuracy", "wall_ms" ]

# Every real-valued metrics column (mean_child, test_accuracy, wall_ms).
REAL_FORMAT = "%.6f"

# generation counts completed generations: training resumes at this index.
@dataclass(eq=False)
class Checkpoint:
    generation: int
    modelConfig: ModelConfig
    evoConfig: EvolutionConfig
    genome: np.ndarray
    perfectStreak: int = 0

    @property
    def masterSeed(self):
        return self.evoConfig.masterSeed

def configJson(modelConfig, evoConfig, perfectStreak=0):
    return json.dumps({ "model": modelConfig.toDict(), "evolution": evoConfig.toDict(), "perfectStreak": perfectStreak },
            sort_keys=True, separators=(",", ":"))

def encodeCheckpoint(checkpoint):
    genome = np.asarray(checkpoint.genome, dtype=np.float32)
    expected = genomeLen(checkpoint.modelConfig)
    if genome.shape[0] != expected:
        raise PersistError("Genome has %d values but the model config needs %d." % (genome.shape[0], expected))

    config = configJson(checkpoint.modelConfig, checkpoint.evoConfig, checkpoint.perfectStreak).encode("utf-8")
    return b"".join([
        HEADER.pack(MAGIC, VERSION, checkpoint.generation, checkpoint.masterSeed, len(config)),
        config,
        GENOME_LEN.pack(genome.shape[0]),
        genome.astype("<f4").tobytes()
    ])

def decodeCheckpoint(data):
    if len(data) < HEADER.size:
        raise PersistError("Truncated checkpoint: %d bytes is shorter than the header." % len(data))

    magic, version, generation, masterSeed, configLength = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise PersistError("Bad magic %r: not a checkpoint file." % magic)
    if version != VERSION:
        raise PersistError("Checkpoint version %d is not supported (expected %d)." % (version, VERSION))

    pos = HEADER.size
    if len(data) < pos + configLength + GENOME_LEN.size:
        raise PersistError("Truncated checkpoint: the config section is incomplete.")

    try:
        config = json.loads(data[pos:pos + configLength].decode("utf-8"))
        modelConfig = ModelConfig.fromDict(config["model"]).validate()
        evoConfig = EvolutionConfig.fromDict(config["evolution"]).validate()
        perfectStreak = config.get("perfectStreak", 0)
    except (UnicodeDecodeError, ValueError, KeyError, TypeError, ConfigError) as ex:
        raise PersistError("Unreadable checkpoint config: %s" % str(ex)) from ex

    if type(perfectStreak) != int or perfectStreak < 0:
        raise PersistError("Bad perfectStreak %r in the checkpoint config." % perfectStreak)
    if evoConfig.masterSeed != masterSeed:
        raise PersistError("Checkpoint seed %d disagrees with its config (%d)." % (masterSeed, evoConfig.masterSeed))

    pos += configLength
    (length,) = GENOME_LEN.unpack_from(data, pos)
    pos += GENOME_LEN.size

    expected = genomeLen(modelConfig)
    if length != expected:
        raise PersistError("Length mismatch: checkpoint genome has %d values, its config needs %d." % (length, expected))

    remaining = len(data) - pos
    if remaining < 4 * length:
        raise PersistError("Truncated checkpoint: genome has %d of %d bytes." % (remaining, 4 * length))
    if remaining > 4 * length:
        raise PersistError("Length mismatch: %d unexpected trailing bytes." % (remaining - 4 * length))

    genome = np.frombuffer(data, dtype="<f4", count=length, offset=pos).astype(np.float32)
    return Checkpoint(generation, modelConfig, evoConfig, genome, perfectStreak)

# Write [checkpoint] to [path] through a temporary file and a rename, so a
# crash never leaves a half-written checkpoint behind.
def saveCheckpoint(path, checkpoint):
    data = encodeCheckpoint(checkpoint)
    directory = os.path.dirname(os.path.abspath(path))

    try:
        os.makedirs(directory, exist_ok=True)
        fd, tempPath = tempfile.mkstemp(prefix=".checkpoint-", dir=directory)
        try:
            with os.fdopen(fd, "wb") as file:
                file.write(data)
                file.flush()
                os.fsync(file.fileno())
            os.replace(tempPath, path)
        except BaseException:
            if os.path.exists(tempPath):
                os.remove(tempPath)
            raise
    except OSError as ex:
        raise PersistError("Unable to write checkpoint %s: %s" % (path, str(ex))) from ex

def loadCheckpoint(path):
    try:
        with open(path, "rb") as file:
            data = file.read()
    except OSError as ex:
        raise PersistError("Unable to read checkpoint %s: %s" % (path, str(ex))) from ex

    try:
        return decodeCheckpoint(data)
    except PersistError as ex:
        raise PersistError("%s: %s" % (path, str(ex))) from ex

def _formatReal(value):
    return "" if value is None else REAL_FORMAT % value

def _parseOptional(text):
    return None if text == "" else float(text)

def statsToRow(stats):
    return [ str(stats.generation), str(stats.bestChild), _formatReal(stats.meanChild), str(stats.worstChild),
             str(stats.parentFitness), _formatReal(stats.testAccuracy), _formatReal(stats.wallMs) ]

def rowToStats(row):
    return GenerationStats(
        generation = int(row[0]),
        bestChild = int(row[1]),
        meanChild = float(row[2]),
        worstChild = int(row[3]),
        parentFitness = int(row[4]),
        testAccuracy = _parseOptional(row[5]),
        wallMs = float(row[6])
    )

def readMetrics(path):
    try:
        with open(path, "r", newline="", encoding="utf-8") as file:
            rows = list(csv.reader(file))
    except OSError as ex:
        raise PersistError("Unable to read metrics %s: %s" % (path, str(ex))) from ex

    if len(rows) == 0:
        return []
    if rows[0] != METRICS_HEADER:
        raise PersistError("%s is not a metrics file (unexpected header)." % path)

    try:
        return [ rowToStats(row) for row in rows[1:] if len(row) > 0 ]
    except (ValueError, IndexError) as ex:
        raise PersistError("Malformed metrics row in %s: %s" % (path, str(ex))) from ex

# Non-decreasing series: element i is max(values[0..i]).
def runningMax(values):
    return list(accumulate(values, max))

# Append-only metrics CSV. The header is written once, when the file is new.
# With [resumeFrom], rows for generations >= resumeFrom are dropped first so a
# resumed run doesn't repeat generations.
class MetricsSink:
    def __init__(self, path, resumeFrom=None):
        self.path = path
        self.lastGeneration = None

        try:
            if resumeFrom is not None and os.path.exists(path):
                kept = [ stats for stats in readMetrics(path) if stats.generation < resumeFrom ]
                self._rewrite(kept)

            existing = readMetrics(path) if os.path.exists(path) else []
            if len(existing) > 0:
                self.lastGeneration = existing[-1].generation

            self.file = open(path, "a", newline="", encoding="utf-8")
            self.writer = csv.writer(self.file, lineterminator="\n")
            if self.file.tell() == 0:
                self.writer.writerow(METRICS_HEADER)
                self.file.flush()
        except OSError as ex:
            raise PersistError("Unable to open metrics %s: %s" % (self.path, str(ex))) from ex

    def _rewrite(self, rows):
        with open(self.path, "w", newline="", encoding="utf-8") as file:
            writer = csv.writer(file, lineterminator="\n")
            writer.writerow(METRICS_HEADER)
            for stats in rows:
                writer.writerow(statsToRow(stats))

    def appendMetrics(self, stats):
        if self.lastGeneration is not None and stats.generation <= self.lastGeneration:
            raise PersistError("Metrics rows must have increasing generations (%d after %d)."
                    % (stats.generation, self.lastGeneration))

        try:
            self.writer.writerow(statsToRow(stats))
            self.file.flush()
        except OSError as ex:
            raise PersistError("Unable to write metrics %s: %s" % (self.path, str(ex))) from ex
        self.lastGeneration = stats.generation

    def close(self):
        self.file.close()

    def __enter__(self):
        return self

    def __exit__(self, *args):
        self.close()
