"""MSB-first raw bit packing and LEB128 varints."""

import numpy as np


class DecodeError(ValueError):
    """Raised when an encoded stream is truncated or inconsistent."""


class BitWriter:
    def __init__(self):
        self._buf = bytearray()
        self._acc = 0
        self._nacc = 0

    def write(self, bit):
        self._acc = (self._acc << 1) | (bit & 1)
        self._nacc += 1
        if self._nacc == 8:
            self._buf.append(self._acc)
            self._acc = 0
            self._nacc = 0

    def write_bits(self, value, nbits):
        for shift in range(nbits - 1, -1, -1):
            self.write((value >> shift) & 1)

    def __len__(self):
        return 8 * len(self._buf) + self._nacc

    def getvalue(self):
        out = bytes(self._buf)
        if self._nacc:
            out += bytes([self._acc << (8 - self._nacc)])
        return out


class BitReader:
    """Reads bits MSB-first. ``strict=False`` yields zeros past the end."""

    def __init__(self, data, strict=True):
        self._data = data
        self._nbits = 8 * len(data)
        self.position = 0
        self.strict = strict

    def read(self):
        pos = self.position
        self.position += 1
        if pos >= self._nbits:
            if self.strict:
                raise DecodeError("read past the end of the bit stream")
            return 0
        return (self._data[pos >> 3] >> (7 - (pos & 7))) & 1

    def read_bits(self, nbits):
        value = 0
        for _ in range(nbits):
            value = (value << 1) | self.read()
        return value

    @property
    def overrun(self):
        return max(self.position - self._nbits, 0)


def pack_bits(bits):
    """Pack a bool/0-1 array MSB-first into bytes."""
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def unpack_bits(data, count):
    if 8 * len(data) < count:
        raise DecodeError(f"need {count} raw bits, only {8 * len(data)} available")
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=count).astype(bool)


def write_varint(out, value):
    if value < 0:
        raise ValueError("varints are unsigned")
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


def read_varint(data, pos):
    value = 0
    shift = 0
    while True:
        if pos >= len(data):
            raise DecodeError("truncated varint")
        byte = data[pos]
        pos += 1
        value |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return value, pos
        shift += 7
        if shift > 70:
            raise DecodeError("varint too long")
