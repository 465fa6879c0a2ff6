#!/usr/bin/python3

__all__ = ["argsUtil", "dataUtil", "errorUtil", "evolveUtil", "modelUtil", "persistUtil",
           "pgmUtil", "printUtil", "rngUtil", "syntheticUtil", "tensorUtil"]
