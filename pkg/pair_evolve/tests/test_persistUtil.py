#!/usr/bin/python3

import os, struct
from dataclasses import replace

import numpy as np
import pytest

from pair_evolve.utils.errorUtil import PersistError
from pair_evolve.utils.evolveUtil import EvolutionConfig, GenerationStats
from pair_evolve.utils.modelUtil import ModelConfig, genomeLen
from pair_evolve.utils.persistUtil import Checkpoint, encodeCheckpoint, decodeCheckpoint, saveCheckpoint, \
        loadCheckpoint, MetricsSink, readMetrics, runningMax, HEADER, METRICS_HEADER

def makeCheckpoint(config, generation=12, seed=2 ** 63 + 5):
    genome = np.random.default_rng(0).standard_normal(genomeLen(config)).astype(np.float32)
    return Checkpoint(generation, config, EvolutionConfig(masterSeed=seed, population=8), genome)

def assertSameCheckpoint(a, b):
    assert a.generation == b.generation
    assert a.masterSeed == b.masterSeed
    assert a.modelConfig == b.modelConfig
    assert a.evoConfig == b.evoConfig
    assert a.genome.tobytes() == b.genome.tobytes()
    assert a.perfectStreak == b.perfectStreak

def testRoundTrip(tmp_path, tinyConfig):
    checkpoint = makeCheckpoint(tinyConfig)
    path = str(tmp_path / "run" / "checkpoint.bin")

    saveCheckpoint(path, checkpoint)
    assertSameCheckpoint(loadCheckpoint(path), checkpoint)
    assert os.listdir(tmp_path / "run") == [ "checkpoint.bin" ]

def testHeaderLayout(tinyConfig):
    data = encodeCheckpoint(makeCheckpoint(tinyConfig, generation=3, seed=9))
    magic, version, generation, seed, configLength = HEADER.unpack_from(data, 0)

    assert (magic, version, generation, seed) == (b"DNEC", 1, 3, 9)
    assert data[HEADER.size:HEADER.size + 1] == b"{"
    (length,) = struct.unpack_from("<Q", data, HEADER.size + configLength)
    assert length == genomeLen(tinyConfig)
    assert len(data) == HEADER.size + configLength + 8 + 4 * length

def testPerfectStreakRoundTrip(tinyConfig):
    checkpoint = replace(makeCheckpoint(tinyConfig), perfectStreak=17)
    assert decodeCheckpoint(encodeCheckpoint(checkpoint)).perfectStreak == 17
    assert decodeCheckpoint(encodeCheckpoint(makeCheckpoint(tinyConfig))).perfectStreak == 0

def testBadPerfectStreak(tinyConfig):
    for streak, bad in [ (17, b"-1"), (1000, b"true"), (420, b"\"x\"") ]:
        data = encodeCheckpoint(replace(makeCheckpoint(tinyConfig), perfectStreak=streak))
        data = data.replace(b"\"perfectStreak\":%d" % streak, b"\"perfectStreak\":" + bad)
        with pytest.raises(PersistError):
            decodeCheckpoint(data)

def testDefaultModelRoundTrip():
    checkpoint = makeCheckpoint(ModelConfig())
    assertSameCheckpoint(decodeCheckpoint(encodeCheckpoint(checkpoint)), checkpoint)

def testBadMagic(tinyConfig):
    data = bytearray(encodeCheckpoint(makeCheckpoint(tinyConfig)))
    data[0:4] = b"XXXX"
    with pytest.raises(PersistError, match="magic"):
        decodeCheckpoint(bytes(data))

def testBadVersion(tinyConfig):
    data = bytearray(encodeCheckpoint(makeCheckpoint(tinyConfig)))
    data[4:8] = struct.pack("<I", 2)
    with pytest.raises(PersistError, match="version"):
        decodeCheckpoint(bytes(data))

def testLengthMismatch(tinyConfig):
    data = bytearray(encodeCheckpoint(makeCheckpoint(tinyConfig)))
    configLength = HEADER.unpack_from(data, 0)[4]
    offset = HEADER.size + configLength
    data[offset:offset + 8] = struct.pack("<Q", genomeLen(tinyConfig) + 1)

    with pytest.raises(PersistError, match="Length mismatch"):
        decodeCheckpoint(bytes(data))

def testTrailingBytes(tinyConfig):
    with pytest.raises(PersistError, match="Length mismatch"):
        decodeCheckpoint(encodeCheckpoint(makeCheckpoint(tinyConfig)) + b"\0\0\0\0")

def testTruncated(tinyConfig):
    data = encodeCheckpoint(makeCheckpoint(tinyConfig))
    for size in [ 0, 10, HEADER.size + 5, len(data) - 1 ]:
        with pytest.raises(PersistError, match="Truncated"):
            decodeCheckpoint(data[:size])

def testWrongGenomeOnSave(tmp_path, tinyConfig):
    checkpoint = makeCheckpoint(tinyConfig)
    checkpoint.genome = checkpoint.genome[:-1]
    with pytest.raises(PersistError):
        saveCheckpoint(str(tmp_path / "c.bin"), checkpoint)
    assert not os.path.exists(tmp_path / "c.bin")

def testMissingCheckpoint(tmp_path):
    with pytest.raises(PersistError):
        loadCheckpoint(str(tmp_path / "none.bin"))

def stats(generation, testAccuracy=None):
    return GenerationStats(generation, 9, 6.5, 2, 8, testAccuracy, 12.25)

def testMetricsFile(tmp_path):
    path = str(tmp_path / "metrics.csv")
    with MetricsSink(path) as sink:
        sink.appendMetrics(stats(0))

    lines = open(path, encoding="utf-8").read().split("\n")
    assert lines[0] == ",".join(METRICS_HEADER)
    assert lines[1] == "0,9,6.500000,2,8,,12.250000"

    with MetricsSink(path) as sink:
        sink.appendMetrics(stats(1, 0.75))

    rows = readMetrics(path)
    assert [ row.generation for row in rows ] == [ 0, 1 ]
    assert rows[0].testAccuracy is None
    assert rows[1].testAccuracy == 0.75
    assert (rows[1].bestChild, rows[1].meanChild, rows[1].worstChild, rows[1].parentFitness) == (9, 6.5, 2, 8)
    assert open(path, encoding="utf-8").read().count("generation") == 1

def testMetricsOrder(tmp_path):
    with MetricsSink(str(tmp_path / "metrics.csv")) as sink:
        sink.appendMetrics(stats(4))
        with pytest.raises(PersistError):
            sink.appendMetrics(stats(4))

def testMetricsResume(tmp_path):
    path = str(tmp_path / "metrics.csv")
    with MetricsSink(path) as sink:
        for generation in range(5):
            sink.appendMetrics(stats(generation))

    with MetricsSink(path, resumeFrom=3) as sink:
        sink.appendMetrics(stats(3))

    assert [ row.generation for row in readMetrics(path) ] == [ 0, 1, 2, 3 ]

def testNotAMetricsFile(tmp_path):
    path = tmp_path / "other.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(PersistError):
        readMetrics(str(path))

def testRunningMax():
    assert runningMax([ 3, 1, 4, 1, 5, 2 ]) == [ 3, 3, 4, 4, 5, 5 ]
    assert runningMax([]) == []
