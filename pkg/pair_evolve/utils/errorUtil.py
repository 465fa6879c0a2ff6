#!/usr/bin/python3

import sys

from pair_evolve.utils.printUtil import cprint

# Exit codes used by the command-line interface.
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_IO = 4

# Base class for everything the library raises on purpose.
# [exitCode] is what the command line exits with when this
# reaches the top.
class EvolveError(Exception):
    exitCode = 1

class ConfigError(EvolveError):
    exitCode = EXIT_CONFIG

class DataError(EvolveError):
    exitCode = EXIT_DATA

# Tensor/genome dimensions that don't line up.
class ShapeError(DataError):
    pass

class PgmFormatError(DataError):
    pass

class ManifestError(DataError):
    pass

# Checkpoint and metrics faults.
class PersistError(EvolveError):
    exitCode = EXIT_IO

class ErrorUtil:
    silent = False

    # Report [message] (even when silent) and exit with [exitCode].
    def reportError(self, message, exitCode=1):
        cprint(str(message) + "\n", "RED", file=sys.stderr)
        cprint("Stopping.\n", file=sys.stderr)
        sys.exit(exitCode)

    def logWarning(self, message):
        if not self.silent:
            cprint(str("Warning: ") + str(message) + "\n", "YELLOW", file=sys.stderr)

    def setSilent(self, silent):
        self.silent = silent
