"""Byte layout of compressed files and conversion of raw input buffers.

All integers are little-endian. A file is a fixed header, the mode sizes,
ranks and orders, then length-prefixed sections: the core first and one
section per factor in mode order.
"""

import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .entropy import DecodeError

MAGIC = b"TUKZ"
VERSION = 1

DTYPES = {
    "int8": 1, "int16": 2, "int32": 3, "int64": 4,
    "uint8": 5, "uint16": 6, "uint32": 7, "uint64": 8,
    "float32": 9, "float64": 10,
}
DTYPE_NAMES = {v: k for k, v in DTYPES.items()}

FLAG_ZERO = 1
FLAG_SPLIT = 2
FLAG_SIMPLE_WEIGHTS = 4
FLAG_FLOAT32 = 8

_FIXED = struct.Struct("<4sBBBBBBhIdddddd")
_SECTION = struct.Struct("<Q")


class ContainerError(DecodeError):
    """Raised for malformed compressed files."""


@dataclass
class Header:
    dtype: str
    mode_sizes: tuple
    ranks: tuple
    compression_order: tuple
    storage_order: tuple
    vectorization: int = 0
    coder: int = 1
    scale_exponent: int = 0
    block_size: int = 4096
    rtmss: float = 0.5
    target_sse: float = 0.0
    norm_sq: float = 0.0
    truncation_sse: float = 0.0
    core_sse: float = 0.0
    estimate_sse: float = 0.0
    zero: bool = False
    split: bool = True
    simple_weights: bool = False
    float32: bool = False
    version: int = VERSION

    @property
    def order(self):
        return len(self.mode_sizes)

    @property
    def element_count(self):
        return int(np.prod(self.mode_sizes, dtype=np.int64))

    @property
    def original_bytes(self):
        return self.element_count * np.dtype(self.dtype).itemsize

    @property
    def flags(self):
        return (FLAG_ZERO * self.zero | FLAG_SPLIT * self.split
                | FLAG_SIMPLE_WEIGHTS * self.simple_weights | FLAG_FLOAT32 * self.float32)

    def to_bytes(self):
        d = self.order
        out = bytearray(_FIXED.pack(
            MAGIC, self.version, self.flags, DTYPES[self.dtype], d, self.coder,
            self.vectorization, self.scale_exponent, self.block_size, self.rtmss,
            self.target_sse, self.norm_sq, self.truncation_sse, self.core_sse,
            self.estimate_sse))
        out += struct.pack(f"<{d}Q", *self.mode_sizes)
        out += struct.pack(f"<{d}I", *self.ranks)
        out += bytes(self.compression_order) + bytes(self.storage_order)
        return bytes(out)

    @classmethod
    def from_bytes(cls, buf):
        if len(buf) < 4 or bytes(buf[:4]) != MAGIC:
            raise ContainerError("header: not a compressed tensor file (bad magic)")
        if len(buf) < _FIXED.size:
            raise ContainerError("header: file is truncated")
        (_, version, flags, dtype_id, d, coder, method, k, block_size, rtmss, target,
         norm, trunc, core, est) = _FIXED.unpack_from(buf)
        if version != VERSION:
            raise ContainerError(f"header: unsupported format version {version}")
        if dtype_id not in DTYPE_NAMES:
            raise ContainerError(f"header: unknown data type id {dtype_id}")
        if d == 0:
            raise ContainerError("header: tensor order is zero")
        need = _FIXED.size + 12 * d + 2 * d
        if len(buf) < need:
            raise ContainerError("header: mode table is truncated")
        pos = _FIXED.size
        sizes = struct.unpack_from(f"<{d}Q", buf, pos)
        pos += 8 * d
        ranks = struct.unpack_from(f"<{d}I", buf, pos)
        pos += 4 * d
        corder = tuple(buf[pos:pos + d])
        sorder = tuple(buf[pos + d:pos + 2 * d])
        for name, perm in (("compression order", corder), ("storage order", sorder)):
            if sorted(perm) != list(range(d)):
                raise ContainerError(f"header: {name} is not a permutation")
        if any(r < 1 or r > n for r, n in zip(ranks, sizes)):
            raise ContainerError("header: ranks inconsistent with mode sizes")
        h = cls(DTYPE_NAMES[dtype_id], tuple(sizes), tuple(ranks), corder, sorder, method, coder,
                k, block_size, rtmss, target, norm, trunc, core, est,
                bool(flags & FLAG_ZERO), bool(flags & FLAG_SPLIT),
                bool(flags & FLAG_SIMPLE_WEIGHTS), bool(flags & FLAG_FLOAT32), version)
        return h, need


@dataclass
class Container:
    header: Header
    core: bytes = b""
    factors: list = field(default_factory=list)


def write_container(header, core, factors):
    out = bytearray(header.to_bytes())
    for section in [core, *factors]:
        out += _SECTION.pack(len(section))
        out += section
    return bytes(out)


def read_container(buf):
    buf = bytes(buf)
    header, pos = Header.from_bytes(buf)
    names = ["core"] + [f"factor {i}" for i in range(header.order)]
    sections = []
    for name in names:
        if len(buf) - pos < _SECTION.size:
            raise ContainerError(f"{name} section is missing (file truncated)")
        (n,) = _SECTION.unpack_from(buf, pos)
        pos += _SECTION.size
        if len(buf) - pos < n:
            raise ContainerError(f"{name} section is truncated")
        sections.append(buf[pos:pos + n])
        pos += n
    if pos != len(buf):
        raise ContainerError("unexpected bytes after the last factor section")
    return Container(header, sections[0], sections[1:])


def check_dtype(dtype):
    name = np.dtype(dtype).name
    if name not in DTYPES:
        raise ValueError(f"unsupported data type {name}; expected one of {sorted(DTYPES)}")
    return name


def read_raw(raw, dtype, shape, skip_bytes=0):
    """View a raw little-endian buffer as an array of its source type."""
    name = check_dtype(dtype)
    shape = tuple(int(n) for n in shape)
    if not shape or any(n < 1 for n in shape):
        raise ValueError(f"invalid shape {shape}")
    if skip_bytes < 0:
        raise ValueError("skip_bytes must be nonnegative")
    item = np.dtype(name).newbyteorder("<")
    count = int(np.prod(shape, dtype=np.int64))
    expected = skip_bytes + count * item.itemsize
    if len(raw) != expected:
        raise ValueError(
            f"buffer holds {len(raw)} bytes, expected {expected} "
            f"({skip_bytes} skipped + {count} x {name})")
    values = np.frombuffer(raw, dtype=item, count=count, offset=skip_bytes).reshape(shape)
    return values.astype(name)


def ingest(raw, dtype, shape, skip_bytes=0, precision="float64"):
    """Interpret a raw buffer as a tensor of the internal float type."""
    return to_internal(read_raw(raw, dtype, shape, skip_bytes), precision)


def to_internal(values, precision="float64"):
    values = np.asarray(values)
    name = check_dtype(values.dtype)
    if name in ("int64", "uint64") and values.size:
        big = np.max(np.abs(values.astype(np.float64)))
        if big > 2.0 ** 53:
            warnings.warn(f"{name} values up to {big:.3g} exceed 2**53 and lose precision "
                          "when converted to float", RuntimeWarning, stacklevel=3)
    return np.ascontiguousarray(values, dtype=np.float32 if precision == "float32" else np.float64)


def emit(values, dtype):
    """Cast decompressed values to ``dtype``; integers are rounded and clamped."""
    name = check_dtype(dtype)
    values = np.asarray(values, dtype=np.float64)
    if name.startswith(("int", "uint")):
        info = np.iinfo(name)
        rounded = np.clip(np.rint(values), float(info.min), float(info.max))
        out = np.empty(values.shape, dtype=name)
        # clip against float limits can still reach 2**63 / 2**64 after rounding
        big = rounded >= float(info.max)
        out[~big] = rounded[~big].astype(name)
        out[big] = info.max
        return out
    return values.astype(name)


def to_bytes(values):
    return np.ascontiguousarray(values).astype(values.dtype.newbyteorder("<"), copy=False).tobytes()
