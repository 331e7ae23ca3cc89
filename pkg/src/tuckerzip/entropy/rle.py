"""Zero-run extraction for leading-bit columns.

A column is written as the number of zeros before each 1, followed by one
terminal symbol giving the length of the final zero run. ``00101`` becomes
``[2, 1, 0]``.
"""

import numpy as np

from .bitio import DecodeError


def rle_extract(bits):
    bits = np.asarray(bits, dtype=bool)
    ones = np.flatnonzero(bits)
    if ones.size == 0:
        return [int(bits.size)]
    runs = np.diff(ones, prepend=-1) - 1
    return runs.tolist() + [int(bits.size - ones[-1] - 1)]


def rle_restore(symbols, length):
    symbols = np.asarray(symbols, dtype=np.int64)
    if symbols.size == 0:
        raise DecodeError("run-length stream has no terminal symbol")
    if np.any(symbols < 0):
        raise DecodeError("negative run length")
    ones = np.cumsum(symbols[:-1] + 1) - 1
    used = (int(ones[-1]) + 1 if ones.size else 0) + int(symbols[-1])
    if used != length:
        raise DecodeError(f"run lengths cover {used} bits, expected {length}")
    bits = np.zeros(length, dtype=bool)
    bits[ones] = True
    return bits
