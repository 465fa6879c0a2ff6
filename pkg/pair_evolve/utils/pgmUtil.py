#!/usr/bin/python3

# Binary PGM ("P5") reading and writing.
# See: http://netpbm.sourceforge.net/doc/pgm.html
# Samples are one byte when maxval < 256, otherwise two bytes, most
# significant first. ASCII PGM ("P2") isn't supported.

import re
from collections import namedtuple

import numpy as np

from pair_evolve.utils.errorUtil import PgmFormatError

MAX_MAXVAL = 65535
SPACE_CHARS = b" \t\r\n\v\f"
TOKEN_EXP = re.compile(rb"[0-9]+")

# pixels: (height, width) array, in file order.
PgmImage = namedtuple("PgmImage", [ "width", "height", "maxval", "pixels" ])

# Read the next decimal header field of [data] from [pos], skipping
# whitespace and comments. Returns (value, position after it).
def _readHeaderInt(data, pos, fieldName):
    while pos < len(data):
        if data[pos] in SPACE_CHARS:
            pos += 1
        elif data[pos:pos + 1] == b"#":
            newline = data.find(b"\n", pos)
            pos = len(data) if newline < 0 else newline + 1
        else:
            break

    match = TOKEN_EXP.match(data, pos)
    if pos >= len(data):
        raise PgmFormatError("Truncated PGM file: header ends before %s." % fieldName)
    if match is None:
        raise PgmFormatError("Malformed PGM header: expected %s at byte %d." % (fieldName, pos))

    return int(match.group(0)), match.end()

def parsePgm(data):
    if data[:2] != b"P5":
        raise PgmFormatError("Bad magic number %r: only binary PGM (P5) is supported." % data[:2])

    pos = 2
    width, pos = _readHeaderInt(data, pos, "width")
    height, pos = _readHeaderInt(data, pos, "height")
    maxval, pos = _readHeaderInt(data, pos, "maxval")

    if maxval < 1 or maxval > MAX_MAXVAL:
        raise PgmFormatError("PGM maxval %d is out of range [1, %d]." % (maxval, MAX_MAXVAL))
    if width < 1 or height < 1:
        raise PgmFormatError("PGM dimensions %dx%d are empty." % (width, height))
    if pos >= len(data) or not data[pos] in SPACE_CHARS:
        raise PgmFormatError("Truncated PGM file: no raster after the header.")
    pos += 1 # Exactly one whitespace character precedes the raster.

    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    expected = width * height * dtype.itemsize
    raster = data[pos:pos + expected]

    if len(raster) < expected:
        raise PgmFormatError("Truncated PGM file: raster has %d of %d bytes." % (len(raster), expected))

    pixels = np.frombuffer(raster, dtype=dtype).reshape(height, width).astype(np.uint16)
    return PgmImage(width, height, maxval, pixels)

def loadPgm(path):
    with open(path, "rb") as file:
        data = file.read()

    try:
        return parsePgm(data)
    except PgmFormatError as ex:
        raise PgmFormatError("%s: %s" % (path, str(ex))) from ex

# Write [pixels] ((height, width) integers in [0, maxval]) as binary PGM.
def writePgm(path, pixels, maxval=255):
    pixels = np.asarray(pixels)

    if maxval < 1 or maxval > MAX_MAXVAL:
        raise PgmFormatError("PGM maxval %d is out of range [1, %d]." % (maxval, MAX_MAXVAL))
    if pixels.ndim != 2:
        raise PgmFormatError("PGM images are 2D; got shape %s." % str(pixels.shape))
    if pixels.size > 0 and (pixels.min() < 0 or pixels.max() > maxval):
        raise PgmFormatError("Pixel values must lie in [0, %d]." % maxval)

    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    height, width = pixels.shape

    with open(path, "wb") as file:
        file.write(b"P5\n%d %d\n%d\n" % (width, height, maxval))
        file.write(pixels.astype(dtype).tobytes())
