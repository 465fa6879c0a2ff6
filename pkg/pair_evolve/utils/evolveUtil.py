#!/usr/bin/python3

# Evolution-strategy training of the pair classifier.
#
# Each generation:
#  1. every child i gets a seed derived from (master seed, generation, i);
#  2. child i is parent + sigma * noise(seed i), scored by how many training
#     pairs it classifies correctly;
#  3. the scores are shaped into weights (mean-centred, or centred ranks);
#  4. the parent moves by alpha / (population * sigma) * sum_i weight_i * noise_i,
#     regenerating each noise vector from its seed.
# Children are scored on worker threads; everything that combines their
# results runs on one thread in child-index order, so the outcome doesn't
# depend on the number of threads.

import threading, time
from dataclasses import dataclass, asdict, fields
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from pair_evolve.utils.errorUtil import ConfigError, DataError, ShapeError
from pair_evolve.utils.printUtil import cprint
from pair_evolve.utils.rngUtil import sampleNoise, seedPopulation
import pair_evolve.utils.modelUtil as modelUtil

CENTERED_FITNESS = "centered_fitness"
CENTERED_RANK = "centered_rank"
SHAPING_MODES = ( CENTERED_FITNESS, CENTERED_RANK )

@dataclass
class EvolutionConfig:
    population: int = 40
    sigma: float = 0.05
    alpha: float = 0.2
    generations: int = 50000
    masterSeed: int = 0
    fitnessShaping: str = CENTERED_FITNESS
    evalTestEvery: int = 50
    patience: int = 200

    def validate(self):
        if self.population < 2:
            raise ConfigError("population must be at least 2 (got %d)." % self.population)
        if not self.sigma > 0:
            raise ConfigError("sigma must be positive (got %s)." % str(self.sigma))
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive (got %s)." % str(self.alpha))
        if self.generations < 0:
            raise ConfigError("generations must be >= 0 (got %d)." % self.generations)
        if self.masterSeed < 0 or self.masterSeed >= 2 ** 64:
            raise ConfigError("The seed must be an unsigned 64-bit integer (got %d)." % self.masterSeed)
        if not self.fitnessShaping in SHAPING_MODES:
            raise ConfigError("Unknown fitness shaping %r; expected one of %s." % (self.fitnessShaping, ", ".join(SHAPING_MODES)))
        if self.evalTestEvery < 0:
            raise ConfigError("evalTestEvery must be >= 0 (got %d)." % self.evalTestEvery)
        if self.patience < 0:
            raise ConfigError("patience must be >= 0 (got %d)." % self.patience)
        return self

    def toDict(self):
        return asdict(self)

    @classmethod
    def fromDict(cls, values):
        known = { field.name for field in fields(cls) }
        unknown = set(values) - known
        if unknown:
            raise ConfigError("Unknown evolution setting(s): %s" % ", ".join(sorted(unknown)))
        return cls(**values)

@dataclass
class GenerationStats:
    generation: int
    bestChild: int
    meanChild: float
    worstChild: int
    parentFitness: int
    testAccuracy: Optional[float] = None # max over the parent and all children
    wallMs: float = 0.0
    parentTestAccuracy: Optional[float] = None

# Number of pairs in [dataset] that [model] classifies correctly.
def countCorrect(model, dataset, fast=False):
    correct = 0
    for sample in dataset:
        if modelUtil.predict(model, sample.scan1, sample.scan2, fast) == sample.label:
            correct += 1
    return correct

def evaluateFitness(genome, config, dataset, fast=False):
    return countCorrect(modelUtil.fromGenome(config, genome), dataset, fast)

# 2x2 counts indexed [label][predicted class].
def confusionMatrix(model, dataset, fast=False):
    confusion = [ [ 0, 0 ], [ 0, 0 ] ]
    for sample in dataset:
        confusion[sample.label][modelUtil.predict(model, sample.scan1, sample.scan2, fast)] += 1
    return confusion

# Turn raw fitness counts into update weights.
def shapeFitness(fitnesses, mode=CENTERED_FITNESS):
    values = np.asarray(fitnesses, dtype=np.float64)
    if values.shape[0] < 2:
        raise ShapeError("Fitness shaping needs at least 2 children (got %d)." % values.shape[0])

    if mode == CENTERED_FITNESS:
        std = values.std()
        if std == 0:
            return np.zeros_like(values)
        return (values - values.mean()) / std
    elif mode == CENTERED_RANK:
        ranks = rankdata(values, method="average") - 1.0
        return ranks / (values.shape[0] - 1) - 0.5

    raise ConfigError("Unknown fitness shaping %r." % mode)

# parent + alpha / (n * sigma) * sum_i weights[i] * noise(childSeeds[i]),
# accumulated in float32 in ascending child order.
def recombine(parent, childSeeds, weights, sigma, alpha, noiseFn=sampleNoise):
    parent = np.asarray(parent, dtype=np.float32)
    weights = np.asarray(weights, dtype=np.float64)

    if len(childSeeds) != weights.shape[0]:
        raise ShapeError("Got %d child seeds but %d weights." % (len(childSeeds), weights.shape[0]))

    if not np.any(weights != 0):
        return parent.copy()

    step = np.float32(alpha / (len(childSeeds) * sigma))
    total = np.zeros(parent.shape[0], dtype=np.float32)

    for seed, weight in zip(childSeeds, weights):
        if weight == 0:
            continue
        total += np.float32(weight) * noiseFn(seed, parent.shape[0])

    return parent + step * total

class EvolveUtil:
    maxJobs = 1
    silent = False
    fastKernels = False
    logEvery = 100

    def __init__(self):
        self.jobLock = threading.Lock()

    # Number of threads used to score children.
    def setMaxJobs(self, maxJobs):
        self.maxJobs = max(1, maxJobs)

    def setSilent(self, silent):
        self.silent = silent

    # Use the im2col convolution. Changes results in the last bits.
    def setFastKernels(self, fastKernels):
        self.fastKernels = fastKernels

    # Print a summary line every [logEvery] generations (0: never).
    def setLogEvery(self, logEvery):
        self.logEvery = logEvery

    # Run task(0) ... task(count - 1) on up to maxJobs threads. Results come
    # back in index order. If tasks fail, the lowest-index failure is raised.
    def runIndexed(self, count, task):
        results = [ None ] * count

        if self.maxJobs <= 1 or count <= 1:
            for index in range(count):
                results[index] = task(index)
            return results

        failures = []
        nextIndex = [ 0 ]

        def work():
            while True:
                self.jobLock.acquire()
                index = nextIndex[0]
                nextIndex[0] += 1
                stop = index >= count or len(failures) > 0
                self.jobLock.release()

                if stop:
                    return

                try:
                    results[index] = task(index)
                except Exception as ex:
                    self.jobLock.acquire()
                    failures.append((index, ex))
                    self.jobLock.release()
                    return

        threads = [ threading.Thread(target=work) for _ in range(min(self.maxJobs, count)) ]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()

        if len(failures) > 0:
            _, ex = min(failures, key=lambda failure: failure[0])
            raise ex
        return results

    # One generation from [parent]. Returns (new parent genome, GenerationStats).
    def runGeneration(self, parent, modelConfig, evoConfig, trainSet, generation, testSet=None):
        startTime = time.perf_counter()
        parent = np.asarray(parent, dtype=np.float32)
        seeds = seedPopulation(evoConfig.masterSeed, generation, evoConfig.population)
        sigma = np.float32(evoConfig.sigma)

        evalTest = testSet is not None and evoConfig.evalTestEvery > 0 \
                and generation % evoConfig.evalTestEvery == 0

        def scoreChild(index):
            child = parent + sigma * sampleNoise(seeds[index], parent.shape[0])
            model = modelUtil.fromGenome(modelConfig, child)
            fitness = countCorrect(model, trainSet, self.fastKernels)
            testCorrect = countCorrect(model, testSet, self.fastKernels) if evalTest else None
            return (fitness, testCorrect)

        scores = self.runIndexed(evoConfig.population, scoreChild)
        fitnesses = [ fitness for fitness, _ in scores ]

        weights = shapeFitness(fitnesses, evoConfig.fitnessShaping)
        newParent = recombine(parent, seeds, weights, evoConfig.sigma, evoConfig.alpha)

        parentModel = modelUtil.fromGenome(modelConfig, newParent)
        parentFitness = countCorrect(parentModel, trainSet, self.fastKernels)

        testAccuracy = None
        parentTestAccuracy = None
        if evalTest:
            parentTest = countCorrect(parentModel, testSet, self.fastKernels)
            bestTest = max([ parentTest ] + [ testCorrect for _, testCorrect in scores ])
            testAccuracy = bestTest / len(testSet)
            parentTestAccuracy = parentTest / len(testSet)

        stats = GenerationStats(
            generation = generation,
            bestChild = max(fitnesses),
            meanChild = float(np.mean(fitnesses)),
            worstChild = min(fitnesses),
            parentFitness = parentFitness,
            testAccuracy = testAccuracy,
            wallMs = (time.perf_counter() - startTime) * 1000.0,
            parentTestAccuracy = parentTestAccuracy
        )
        return (newParent, stats)

    def logProgress(self, stats, trainSize):
        if self.silent or self.logEvery <= 0 or (stats.generation + 1) % self.logEvery != 0:
            return

        cprint("generation %d: " % stats.generation, "YELLOW")
        cprint("parent %d/%d, children best %d mean %.2f worst %d"
                % (stats.parentFitness, trainSize, stats.bestChild, stats.meanChild, stats.worstChild))
        if stats.testAccuracy is not None:
            cprint(", test %.3f" % stats.testAccuracy, "BLUE")
        cprint(" (%.0f ms)\n" % stats.wallMs)

    def stopEarly(self, perfectStreak, patience):
        return patience > 0 and perfectStreak >= patience

    # Evolve from [genome] (a fresh Glorot model when None) starting at generation
    # [startGeneration] until evoConfig.generations, or until the parent has been
    # perfect on the training set for evoConfig.patience generations in a row.
    # [perfectStreak] is that count carried over from a checkpoint.
    # Each GenerationStats goes to metricsSink.appendMetrics; checkpointWriter is
    # called with (completed generations, genome, perfect streak) every
    # [checkpointEvery] generations and once more on exit.
    # Returns (genome, list of stats).
    def train(self, modelConfig, evoConfig, trainSet, testSet=None, genome=None, startGeneration=0,
            metricsSink=None, checkpointWriter=None, checkpointEvery=500, perfectStreak=0):
        modelConfig.validate()
        evoConfig.validate()

        for dataset in [ trainSet ] + ([ testSet ] if testSet is not None else []):
            if len(dataset) == 0:
                raise DataError("Cannot train on an empty dataset.")
            if any(not label in (0, 1) for label in dataset.labels()):
                raise DataError("Class labels must be 0 or 1.")

        if genome is None:
            genome = modelUtil.toGenome(modelUtil.buildModel(modelConfig, evoConfig.masterSeed))
        elif len(genome) != modelUtil.genomeLen(modelConfig):
            raise ShapeError("Genome has %d values; the model needs %d." % (len(genome), modelUtil.genomeLen(modelConfig)))

        history = []
        generation = startGeneration

        while generation < evoConfig.generations and not self.stopEarly(perfectStreak, evoConfig.patience):
            genome, stats = self.runGeneration(genome, modelConfig, evoConfig, trainSet, generation, testSet)
            generation += 1
            history.append(stats)
            perfectStreak = perfectStreak + 1 if stats.parentFitness == len(trainSet) else 0

            if metricsSink is not None:
                metricsSink.appendMetrics(stats)
            self.logProgress(stats, len(trainSet))

            if checkpointWriter is not None and checkpointEvery > 0 and generation % checkpointEvery == 0:
                checkpointWriter(generation, genome, perfectStreak)

        if self.stopEarly(perfectStreak, evoConfig.patience) and not self.silent:
            cprint("Stopping early: ", "GREEN")
            cprint("the parent has been perfect for %d generations.\n" % perfectStreak)

        if checkpointWriter is not None:
            checkpointWriter(generation, genome, perfectStreak)

        return (genome, history)
