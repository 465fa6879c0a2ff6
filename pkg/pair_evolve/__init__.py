#!/usr/bin/python3

__all__ = [ "cli", "version", "utils" ]
