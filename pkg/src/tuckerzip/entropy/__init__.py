"""Lossless back-ends: run lengths, arithmetic coding, rANS and raw bits.

Entropy-coded payloads are framed as a 1-byte coder id, a 4-byte symbol
count and a 4-byte payload length (little-endian), followed by the coder
bytes, so either backend can be decoded from the frame alone.
"""

import struct

from .arithmetic import ac_decode, ac_encode
from .bitio import (BitReader, BitWriter, DecodeError, pack_bits, read_varint,
                    unpack_bits, write_varint)
from .rans import rans_decode, rans_encode
from .rle import rle_extract, rle_restore

CODERS = {"ac": 1, "rans": 2}
CODER_NAMES = {v: k for k, v in CODERS.items()}
_ENCODERS = {1: ac_encode, 2: rans_encode}
_DECODERS = {1: ac_decode, 2: rans_decode}
_FRAME = struct.Struct("<BII")
FRAME_SIZE = _FRAME.size


def coder_id(coder) -> int:
    if isinstance(coder, str):
        try:
            return CODERS[coder]
        except KeyError:
            raise ValueError(f"unknown entropy coder {coder!r}; expected one of {sorted(CODERS)}") from None
    if coder not in _ENCODERS:
        raise ValueError(f"unknown entropy coder id {coder}")
    return int(coder)


def pack_stream(symbols, coder="ac") -> bytes:
    """Entropy-code ``symbols`` and prepend the frame."""
    cid = coder_id(coder)
    symbols = list(symbols)
    data = _ENCODERS[cid](symbols)
    return _FRAME.pack(cid, len(symbols), len(data)) + data


def unpack_stream(buf, pos=0):
    """Decode one framed stream starting at ``pos``; returns (symbols, next_pos)."""
    if len(buf) - pos < FRAME_SIZE:
        raise DecodeError("truncated entropy frame")
    cid, count, nbytes = _FRAME.unpack_from(buf, pos)
    pos += FRAME_SIZE
    if cid not in _DECODERS:
        raise DecodeError(f"unknown entropy coder id {cid}")
    if len(buf) - pos < nbytes:
        raise DecodeError("entropy payload shorter than its frame")
    data = bytes(buf[pos:pos + nbytes])
    return _DECODERS[cid](data, count), pos + nbytes


__all__ = [
    "BitReader", "BitWriter", "CODERS", "CODER_NAMES", "DecodeError", "FRAME_SIZE",
    "ac_decode", "ac_encode", "coder_id", "pack_bits", "pack_stream", "rans_decode",
    "rans_encode", "read_varint", "rle_extract", "rle_restore", "unpack_bits",
    "unpack_stream", "write_varint",
]
