#!/usr/bin/python3
import sys, os, json
from dataclasses import replace

from pair_evolve.utils.printUtil import cprint, printField
from pair_evolve.utils.argsUtil import parseArgs, fillArgsFromEnv, fillArgsFromMap
from pair_evolve.utils.errorUtil import ErrorUtil, EvolveError, ConfigError, DataError, PersistError, EXIT_OK, EXIT_IO
from pair_evolve.utils.evolveUtil import EvolveUtil, EvolutionConfig, CENTERED_FITNESS, CENTERED_RANK, confusionMatrix
from pair_evolve.utils.modelUtil import ModelConfig, fromGenome, forward, argmaxClass
from pair_evolve.utils.dataUtil import loadManifest, loadPair, CLASS_NAMES
from pair_evolve.utils.persistUtil import Checkpoint, saveCheckpoint, loadCheckpoint, MetricsSink, readMetrics, runningMax
from pair_evolve.utils.rngUtil import SplitMix64
from pair_evolve.utils.syntheticUtil import SyntheticTaskConfig, genSynthetic
from pair_evolve import version

ENV_FLAGS = "PEVOLVE_FLAGS"

ARGUMENT_MAPPINGS = \
{
    'h': 'help',
    'j': 'threads',
    's': 'silent',
    'o': 'out',
    'c': 'checkpoint'
}

# These are flags, so don't associate values with them...
JUST_FLAGS = \
{
    'help', 'version', 'silent', 'share-branches', 'fast-kernels'
}

SHAPING_FLAGS = \
{
    'fitness': CENTERED_FITNESS,
    'rank': CENTERED_RANK
}

# Flags that would change the trajectory of a resumed run.
TRAJECTORY_FLAGS = \
{
    'population', 'sigma', 'alpha', 'seed', 'shaping', 'image-size', 'share-branches'
}

def printHelp():
    cprint("Help: \n", "YELLOW")
    cprint(" Summary: ", "YELLOW")
    print("Train a two-branch image-pair classifier (scan 1 + scan 2 -> progression/regression) by neuroevolution.")
    cprint(" Usage: pevolve command [options]\n", "YELLOW")
    print("  where command is one of:")
    commands = [
        ("    train", "\t\t\t Evolve a classifier. Needs --train; writes metrics.csv and checkpoints to --out."),
        ("    eval", "\t\t\t Print accuracy and the confusion matrix of --checkpoint on --manifest."),
        ("    infer scan1 scan2", "\t\t Classify one image pair with --checkpoint."),
        ("    gen-synthetic", "\t\t Write synthetic train.csv and test.csv tasks (and their images) to --out."),
        ("    report", "\t\t\t Summarise a metrics file given by --metrics."),
    ]
    for name, text in commands:
        cprint(name, "PURPLE")
        print(text)
    print("  and options include:")
    options = [
        ("    -h, --help", "\t\t\t Print this message."),
        ("    --version", "\t\t\t Print version and licensing information."),
        ("    --config file", "\t\t Read options from a JSON object whose keys are option names."),
        ("    --train, --test file", "\t Training and testing manifests (CSV: scan1,scan2,label)."),
        ("    -o, --out dir", "\t\t Output directory (default: run for train, synth for gen-synthetic)."),
        ("    -c, --checkpoint file", "\t Checkpoint to write (train) or read (eval, infer)."),
        ("    --resume file", "\t\t Continue training from a checkpoint."),
        ("    --population n", "\t\t Children per generation (default 40)."),
        ("    --sigma x", "\t\t\t Mutation scale (default 0.05)."),
        ("    --alpha x", "\t\t\t Step size (default 0.2)."),
        ("    --generations n", "\t\t Generations to run in total (default 50000)."),
        ("    --seed n", "\t\t\t Master seed (default 0)."),
        ("    -j, --threads n", "\t\t Worker threads (default: all cores). Never changes results."),
        ("    --image-size n", "\t\t Input resolution in pixels (default 64)."),
        ("    --share-branches", "\t\t Use the same weights for both branches."),
        ("    --shaping fitness|rank", "\t Fitness shaping (default fitness)."),
        ("    --patience n", "\t\t Stop after n perfect generations in a row (default 200, 0: never)."),
        ("    --checkpoint-every n", "\t Checkpoint interval in generations (default 500)."),
        ("    --log-every n", "\t\t Summary line interval (default 100, 0: never)."),
        ("    --eval-test-every n", "\t Test-set interval (default 50, 0: never)."),
        ("    --fast-kernels", "\t\t Use the faster im2col convolution (not bitwise reproducible)."),
        ("    --pairs, --size n", "\t\t Synthetic pairs per set (even) and image size."),
        ("    -s, --silent", "\t\t Only print errors and results."),
    ]
    for name, text in options:
        cprint(name, "GREEN")
        print(text)
    cprint("Note: ", "PURPLE")
    print("Options can also be given through the %s environment variable. " % ENV_FLAGS +
          "Options on the command line take precedence.")

# Typed option readers. Bad values are configuration errors.
def getInt(args, key, default, minimum=None):
    if not key in args:
        return default

    try:
        value = int(args[key])
    except (TypeError, ValueError):
        raise ConfigError("--%s must be an integer (got %r)." % (key, args[key]))

    if minimum is not None and value < minimum:
        raise ConfigError("--%s must be at least %d (got %d)." % (key, minimum, value))
    return value

def getFloat(args, key, default):
    if not key in args:
        return default

    try:
        return float(args[key])
    except (TypeError, ValueError):
        raise ConfigError("--%s must be a number (got %r)." % (key, args[key]))

def getPath(args, key, default=None, required=False):
    value = args.get(key, default)
    if value is True or (required and value is None):
        raise ConfigError("--%s needs a path." % key)
    return value

def getShaping(args):
    name = args.get('shaping', 'fitness')
    if not name in SHAPING_FLAGS:
        raise ConfigError("--shaping must be fitness or rank (got %r)." % name)
    return SHAPING_FLAGS[name]

def modelConfigFromArgs(args):
    return ModelConfig(
        inputSize = getInt(args, 'image-size', 64),
        shareBranchWeights = 'share-branches' in args
    ).validate()

def evoConfigFromArgs(args):
    return EvolutionConfig(
        population = getInt(args, 'population', 40),
        sigma = getFloat(args, 'sigma', 0.05),
        alpha = getFloat(args, 'alpha', 0.2),
        generations = getInt(args, 'generations', 50000),
        masterSeed = getInt(args, 'seed', 0),
        fitnessShaping = getShaping(args),
        evalTestEvery = getInt(args, 'eval-test-every', 50),
        patience = getInt(args, 'patience', 200)
    ).validate()

# Settings that may change when resuming: everything that only decides how
# long the run goes on or how often the test set is scored.
def resumedEvoConfig(evoConfig, args):
    return replace(evoConfig,
        generations = getInt(args, 'generations', evoConfig.generations),
        evalTestEvery = getInt(args, 'eval-test-every', evoConfig.evalTestEvery),
        patience = getInt(args, 'patience', evoConfig.patience)
    ).validate()

def cmdTrain(args, errorUtil):
    trainPath = getPath(args, 'train', required=True)
    testPath = getPath(args, 'test')
    outDir = getPath(args, 'out', 'run')
    checkpointPath = getPath(args, 'checkpoint', os.path.join(outDir, "checkpoint.bin"))
    resumePath = getPath(args, 'resume')
    threads = getInt(args, 'threads', os.cpu_count() or 1, minimum=1)
    checkpointEvery = getInt(args, 'checkpoint-every', 500, minimum=0)

    genome = None
    startGeneration = 0
    perfectStreak = 0

    if resumePath is not None:
        checkpoint = loadCheckpoint(resumePath)
        modelConfig = checkpoint.modelConfig
        evoConfig = resumedEvoConfig(checkpoint.evoConfig, args)
        genome = checkpoint.genome
        startGeneration = checkpoint.generation
        perfectStreak = checkpoint.perfectStreak

        ignored = sorted(TRAJECTORY_FLAGS.intersection(args))
        if ignored:
            errorUtil.logWarning("Resuming uses the checkpoint's settings; ignoring --%s." % ", --".join(ignored))
    else:
        modelConfig = modelConfigFromArgs(args)
        evoConfig = evoConfigFromArgs(args)

    # Validate every path before spending time on training.
    for path in [ trainPath, testPath ]:
        if path is not None and not os.path.isfile(path):
            raise DataError("Manifest %s does not exist." % path)

    trainSet = loadManifest(trainPath, modelConfig.inputSize, modelConfig.inputChannels)
    testSet = loadManifest(testPath, modelConfig.inputSize, modelConfig.inputChannels) if testPath else None

    try:
        os.makedirs(outDir, exist_ok=True)
    except OSError as ex:
        raise PersistError("Unable to create output directory %s: %s" % (outDir, str(ex))) from ex

    evolveUtil = EvolveUtil()
    evolveUtil.setMaxJobs(threads)
    evolveUtil.setSilent('silent' in args)
    evolveUtil.setFastKernels('fast-kernels' in args)
    evolveUtil.setLogEvery(getInt(args, 'log-every', 100, minimum=0))

    def writeCheckpoint(generation, genome, perfectStreak):
        saveCheckpoint(checkpointPath, Checkpoint(generation, modelConfig, evoConfig, genome, perfectStreak))

    with MetricsSink(os.path.join(outDir, "metrics.csv"), resumeFrom=startGeneration) as sink:
        genome, history = evolveUtil.train(modelConfig, evoConfig, trainSet, testSet,
                genome=genome, startGeneration=startGeneration,
                metricsSink=sink, checkpointWriter=writeCheckpoint, checkpointEvery=checkpointEvery,
                perfectStreak=perfectStreak)

    if len(history) > 0:
        last = history[-1]
        printField("Finished:", "generation %d, parent fitness %d/%d." % (last.generation + 1, last.parentFitness, len(trainSet)), "GREEN")
    else:
        printField("Finished:", "no generations to run.", "GREEN")
    printField("Checkpoint:", checkpointPath, "GREEN")
    return EXIT_OK

def _datasetPath(args):
    for key in [ 'manifest', 'test', 'train' ]:
        if key in args:
            return getPath(args, key)
    if len(args['default']) > 1:
        return args['default'][1]
    raise ConfigError("eval needs a manifest (--manifest file).")

def cmdEval(args, errorUtil):
    checkpoint = loadCheckpoint(getPath(args, 'checkpoint', required=True))
    config = checkpoint.modelConfig
    dataset = loadManifest(_datasetPath(args), config.inputSize, config.inputChannels)

    model = fromGenome(config, checkpoint.genome)
    confusion = confusionMatrix(model, dataset, 'fast-kernels' in args)
    correct = confusion[0][0] + confusion[1][1]

    printField("accuracy", "%.3f" % (correct / len(dataset)))
    for label, name in enumerate(CLASS_NAMES):
        printField("%s (%d):" % (name, label), "%d/%d correct" % (confusion[label][label], sum(confusion[label])))
    printField("confusion", "(rows: label, columns: predicted)")
    print("[[%d,%d],[%d,%d]]" % (confusion[0][0], confusion[0][1], confusion[1][0], confusion[1][1]))
    return EXIT_OK

def cmdInfer(args, errorUtil):
    checkpoint = loadCheckpoint(getPath(args, 'checkpoint', required=True))
    config = checkpoint.modelConfig

    scans = args['default'][1:]
    if 'scan1' in args and 'scan2' in args:
        scans = [ args['scan1'], args['scan2'] ]
    if len(scans) != 2:
        raise ConfigError("infer needs exactly two images: scan 1 and scan 2.")

    scan1, scan2 = loadPair(scans[0], scans[1], config.inputSize)
    logits = forward(fromGenome(config, checkpoint.genome), scan1, scan2, 'fast-kernels' in args)

    print(CLASS_NAMES[argmaxClass(logits)])
    printField("logits", "%.6f %.6f" % (logits[0], logits[1]))
    return EXIT_OK

def cmdGenSynthetic(args, errorUtil):
    outDir = getPath(args, 'out', 'synth')
    pairs = getInt(args, 'pairs', 20)
    seeds = SplitMix64(getInt(args, 'seed', 0, minimum=0))

    base = SyntheticTaskConfig(
        nPairs = pairs,
        imageSize = getInt(args, 'size', getInt(args, 'image-size', 64)),
        extraBlobs = getInt(args, 'extra-blobs', 2),
        radiusGrowth = getFloat(args, 'growth', 1.4),
        noiseStd = getFloat(args, 'noise', 0.05)
    ).validate()

    trainConfig = replace(base, seed=seeds.next())
    testConfig = replace(base, nPairs=getInt(args, 'test-pairs', pairs), seed=seeds.next()).validate()

    try:
        for name, config in [ ("train", trainConfig), ("test", testConfig) ]:
            printField("Wrote", genSynthetic(config, outDir, name), "GREEN")
    except OSError as ex:
        raise PersistError("Unable to write the synthetic task to %s: %s" % (outDir, str(ex))) from ex
    return EXIT_OK

def _firstGeneration(rows, test):
    for stats in rows:
        if test(stats):
            return str(stats.generation)
    return "never"

def cmdReport(args, errorUtil):
    path = getPath(args, 'metrics') or (args['default'][1] if len(args['default']) > 1 else None)
    if path is None:
        raise ConfigError("report needs a metrics file (--metrics file).")

    rows = readMetrics(path)
    if len(rows) == 0:
        raise DataError("%s has no generations." % path)

    parentMax = runningMax([ stats.parentFitness for stats in rows ])
    bestChild = max(stats.bestChild for stats in rows)

    printField("generations", "%d (%d to %d)" % (len(rows), rows[0].generation, rows[-1].generation))
    printField("parent fitness", "final %d, best %d" % (rows[-1].parentFitness, parentMax[-1]))
    printField("parent best reached at generation", rows[parentMax.index(parentMax[-1])].generation)
    printField("best child fitness", "%d, first at generation %s" % (bestChild,
            _firstGeneration(rows, lambda stats: stats.bestChild == bestChild)))
    printField("children converged (worst == best == %d) at generation" % bestChild,
            _firstGeneration(rows, lambda stats: stats.worstChild == bestChild))

    tested = [ stats for stats in rows if stats.testAccuracy is not None ]
    if len(tested) > 0:
        best = max(tested, key=lambda stats: stats.testAccuracy)
        printField("best test accuracy", "%.3f at generation %d" % (best.testAccuracy, best.generation))
    return EXIT_OK

COMMANDS = \
{
    'train': cmdTrain,
    'eval': cmdEval,
    'infer': cmdInfer,
    'gen-synthetic': cmdGenSynthetic,
    'report': cmdReport
}

def loadConfigFile(path):
    try:
        with open(path, "r", encoding="utf-8") as file:
            values = json.load(file)
    except OSError as ex:
        raise ConfigError("Unable to read config file %s: %s" % (path, str(ex))) from ex
    except ValueError as ex:
        raise ConfigError("Config file %s is not valid JSON: %s" % (path, str(ex))) from ex

    if not isinstance(values, dict):
        raise ConfigError("Config file %s must hold a JSON object." % path)
    return values

# On commandline run...
def main(args=sys.argv):
    args = parseArgs(args, ARGUMENT_MAPPINGS, strictlyFlags=JUST_FLAGS)

    # Fill args from the environment, like make's MAKEFLAGS. Given args take precedence.
    args = fillArgsFromEnv(args, ENV_FLAGS, ARGUMENT_MAPPINGS, JUST_FLAGS)

    errorUtil = ErrorUtil()
    errorUtil.setSilent('silent' in args)

    if 'help' in args:
        printHelp()
        return EXIT_OK
    elif 'version' in args:
        version.printVersion()
        return EXIT_OK

    try:
        if 'config' in args:
            args = fillArgsFromMap(args, loadConfigFile(getPath(args, 'config')))

        if len(args['default']) == 0 or not args['default'][0] in COMMANDS:
            given = args['default'][0] if len(args['default']) > 0 else "nothing"
            raise ConfigError("Expected one of %s as the command, got %s. See --help."
                    % (", ".join(sorted(COMMANDS)), given))

        return COMMANDS[args['default'][0]](args, errorUtil)
    except EvolveError as ex:
        errorUtil.reportError(str(ex), ex.exitCode)
    except OSError as ex:
        errorUtil.reportError("I/O error: %s" % str(ex), EXIT_IO)

if __name__ == "__main__":
    sys.exit(main())
