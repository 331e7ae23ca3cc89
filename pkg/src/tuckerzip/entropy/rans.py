"""Byte-wise range ANS with a semi-static frequency table.

The table is serialized in front of the payload: one byte with the scale
(log2 of the frequency total), the number of distinct symbols, the symbols
as ascending deltas and finally each frequency minus one, all as varints.
The scale defaults to 12 bits; it is raised when the alphabet does not fit
and lowered when a coarser table is estimated to give a smaller output.
"""

import math
from collections import Counter

from .bitio import DecodeError, read_varint, write_varint

RANS_L = 1 << 23
DEFAULT_SCALE = 12
MIN_SCALE = 8
MAX_SCALE = 20


def normalize_frequencies(counts: dict, scale: int) -> dict:
    """Scale ``counts`` to integers summing to ``2**scale``, each at least 1."""
    total = 1 << scale
    if len(counts) > total:
        raise ValueError(f"{len(counts)} symbols do not fit a 2^{scale} table")
    n = sum(counts.values())
    freqs = {s: max(1, (c * total) // n) for s, c in counts.items()}
    diff = total - sum(freqs.values())
    if diff:
        # hand out (or take back) the remainder, largest counts first
        order = sorted(counts, key=lambda s: (-counts[s], s))
        i = 0
        while diff > 0:
            freqs[order[i % len(order)]] += 1
            diff -= 1
            i += 1
        while diff < 0:
            progressed = False
            for s in order:
                if freqs[s] > 1:
                    freqs[s] -= 1
                    diff += 1
                    progressed = True
                    if diff == 0:
                        break
            if not progressed:
                raise AssertionError("cannot shrink frequency table")
    return freqs


def _table_bytes(freqs: dict, scale: int) -> bytes:
    out = bytearray([scale])
    symbols = sorted(freqs)
    write_varint(out, len(symbols))
    prev = 0
    for s in symbols:
        write_varint(out, s - prev)
        prev = s
    for s in symbols:
        write_varint(out, freqs[s] - 1)
    return bytes(out)


def _estimated_bits(counts: dict, freqs: dict, scale: int) -> float:
    return sum(c * (scale - math.log2(freqs[s])) for s, c in counts.items())


def choose_scale(counts: dict) -> int:
    """Pick the table scale giving the smallest estimated table plus payload."""
    need = max(MIN_SCALE, math.ceil(math.log2(max(len(counts), 1))) + 1)
    if need > MAX_SCALE:
        raise ValueError("alphabet too large for the rANS table")
    best, best_cost = None, None
    for scale in range(need, max(need, DEFAULT_SCALE) + 1):
        freqs = normalize_frequencies(counts, scale)
        cost = _estimated_bits(counts, freqs, scale) + 8 * len(_table_bytes(freqs, scale))
        if best_cost is None or cost < best_cost:
            best, best_cost = scale, cost
    return best


def rans_encode(symbols, scale=None) -> bytes:
    symbols = list(symbols)
    if not symbols:
        return b""
    counts = Counter(symbols)
    if min(counts) < 0:
        raise ValueError("rANS symbols must be nonnegative")
    if scale is None:
        scale = choose_scale(counts)
    freqs = normalize_frequencies(counts, scale)
    cum = {}
    acc = 0
    for s in sorted(freqs):
        cum[s] = acc
        acc += freqs[s]

    out = bytearray()
    x = RANS_L
    bound = (RANS_L >> scale) << 8
    for s in reversed(symbols):
        f = freqs[s]
        x_max = bound * f
        while x >= x_max:
            out.append(x & 0xFF)
            x >>= 8
        q, r = divmod(x, f)
        x = (q << scale) + r + cum[s]
    out += x.to_bytes(4, "little")
    out.reverse()
    return _table_bytes(freqs, scale) + bytes(out)


def rans_decode(data, count):
    if count == 0:
        return []
    data = bytes(data)
    if not data:
        raise DecodeError("empty rANS payload")
    scale = data[0]
    if not 1 <= scale <= MAX_SCALE:
        raise DecodeError(f"bad rANS table scale {scale}")
    nsym, pos = read_varint(data, 1)
    if nsym == 0 or nsym > (1 << scale):
        raise DecodeError("bad rANS alphabet size")
    symbols = []
    prev = 0
    for _ in range(nsym):
        delta, pos = read_varint(data, pos)
        prev += delta
        symbols.append(prev)
    freqs = []
    for _ in range(nsym):
        f, pos = read_varint(data, pos)
        freqs.append(f + 1)
    total = 1 << scale
    if sum(freqs) != total:
        raise DecodeError("rANS frequency table does not sum to its scale")
    cums = []
    acc = 0
    for f in freqs:
        cums.append(acc)
        acc += f
    slot_symbol = [0] * total
    for i, f in enumerate(freqs):
        c = cums[i]
        slot_symbol[c:c + f] = [i] * f

    if len(data) - pos < 4:
        raise DecodeError("rANS payload shorter than its state")
    x = int.from_bytes(data[pos:pos + 4], "big")
    pos += 4
    mask = total - 1
    n = len(data)
    out = []
    for _ in range(count):
        slot = x & mask
        i = slot_symbol[slot]
        x = freqs[i] * (x >> scale) + slot - cums[i]
        while x < RANS_L:
            if pos >= n:
                raise DecodeError("rANS payload ended early")
            x = (x << 8) | data[pos]
            pos += 1
        out.append(symbols[i])
    if x != RANS_L or pos != n:
        raise DecodeError("rANS payload failed its final state check")
    return out
