"""Quantization and bit-plane coding of the Tucker core.

Coefficients are scaled by ``2**k`` so the largest magnitude fills 64 bits,
rounded, and then sent plane by plane from bit 63 down. On each plane a
coefficient that has not yet seen a 1 contributes a "leading" bit; these are
zero-run-length coded and entropy coded per block. Bits of already
significant coefficients ("trailing") and the sign of every coefficient that
just became significant are stored raw, interleaved in coefficient order.

Encoding stops on the first plane whose full encoding would bring the
tracked SSE to the target. That plane is cut short inside every block, with
blocks advancing in lockstep, so the result does not depend on how blocks
are spread over workers. With split truncation the category that was cheaper
on the previous plane (SSE reduction per payload bit) is exhausted first,
unless the other order or a plain coefficient-order cut codes smaller.

SSE bookkeeping runs in units of ``(integer * 2**-64)**2`` so every squared
residual lies in [0, 1].
"""

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import entropy
from .entropy import DecodeError, pack_bits, read_varint, unpack_bits, write_varint
from .errormodel import SSETracker, backward_sum_sse, exact_sum_of_squares
from .vectorize import VectorizationSpec, devectorize, vectorize

NO_PLANE = 0xFF
MIN_BLOCK_SIZE = 4096
BLOCK_COUNT_HINT = 32
LEADING, TRAILING = 0, 1
_U32 = struct.Struct("<I")
_STOP = struct.Struct("<QQ")
_ONE = np.uint64(1)
_UNIT = 2.0 ** -64


def default_block_size(n):
    return max(MIN_BLOCK_SIZE, -(-int(n) // BLOCK_COUNT_HINT))


def scale_exponent(max_abs):
    """``k`` with ``2**63 <= 2**k * max_abs < 2**64``."""
    _, e = math.frexp(max_abs)
    return 64 - e


def to_units(sse, k):
    return math.ldexp(sse, 2 * k - 128)


def from_units(units, k):
    return math.ldexp(units, 128 - 2 * k)


def quantize_vector(values):
    """Return ``(magnitudes uint64, negative bool, k, zero_flag)``."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot quantize non-finite values")
    negative = np.signbit(v) & (v != 0)
    a = np.abs(v)
    top = float(a.max()) if a.size else 0.0
    if top == 0.0:
        return np.zeros(v.size, dtype=np.uint64), np.zeros(v.size, dtype=bool), 0, True
    k = scale_exponent(top)
    mags = np.rint(np.ldexp(a, k)).astype(np.uint64)
    return mags, negative & (mags != 0), k, False


def residuals_at(mags, plane):
    """Absolute residual of every coefficient when planes ``>= plane`` are known."""
    if plane >= 64:
        return mags.copy()
    if plane == 0:
        return np.zeros_like(mags)
    p = np.uint64(plane)
    low = mags & ((_ONE << p) - _ONE)
    half = _ONE << np.uint64(plane - 1)
    sig = (mags >> p) != 0
    diff = np.where(low >= half, low - half, half - low)
    return np.where(sig, diff, mags)


def _sq_units(r):
    x = r.astype(np.float64) * _UNIT
    return x * x


def expected_correction_gain(p):
    """Ratio of uncorrected to corrected expected squared error for ``p`` unknown bits."""
    if p < 0:
        raise ValueError("plane index must be nonnegative")
    if p == 0:
        return 1.0
    # uniform error on [0, 2**p): mean square 4**p / 3 versus 4**p / 12 once centred
    return (4.0 ** p / 3) / (4.0 ** p / 12)


@dataclass(frozen=True)
class Breakpoint:
    last_plane: int
    stops: np.ndarray  # (nblocks, 2): processed count per category on last_plane

    @property
    def empty(self):
        return self.last_plane == NO_PLANE


@dataclass
class PlaneStream:
    """Bit-plane coded coefficient vector."""

    size: int
    block_size: int
    coder: int
    breakpoint: Breakpoint
    payloads: list  # payloads[plane_index][block] for planes 63, 62, ... last_plane
    achieved_units: float = 0.0
    trace: list = field(default_factory=list)

    @property
    def nblocks(self):
        return max(1, -(-self.size // self.block_size))

    @property
    def payload_bytes(self):
        return sum(len(b) for plane in self.payloads for b in plane)

    def to_bytes(self):
        out = bytearray([self.breakpoint.last_plane])
        out += _U32.pack(self.nblocks)
        for lead, trail in self.breakpoint.stops:
            out += _STOP.pack(int(lead), int(trail))
        for plane in self.payloads:
            for block in plane:
                out += _U32.pack(len(block))
                out += block
        return bytes(out)

    @classmethod
    def from_bytes(cls, buf, size, block_size, coder):
        buf = memoryview(buf)
        try:
            last = buf[0]
            (nblocks,) = _U32.unpack_from(buf, 1)
        except (IndexError, struct.error):
            raise DecodeError("core breakpoint record is truncated") from None
        expected = max(1, -(-size // block_size))
        if nblocks != expected:
            raise DecodeError(f"breakpoint lists {nblocks} blocks, expected {expected}")
        pos = 5
        if len(buf) < pos + _STOP.size * nblocks:
            raise DecodeError("core breakpoint stops are truncated")
        stops = np.array([_STOP.unpack_from(buf, pos + _STOP.size * b) for b in range(nblocks)],
                         dtype=np.int64).reshape(nblocks, 2)
        pos += _STOP.size * nblocks
        if last != NO_PLANE and last > 63:
            raise DecodeError(f"bad last plane {last}")
        nplanes = 0 if last == NO_PLANE else 64 - last
        payloads = []
        for i in range(nplanes):
            plane = []
            for b in range(nblocks):
                if len(buf) < pos + 4:
                    raise DecodeError(f"plane {63 - i} block {b}: missing payload length")
                (n,) = _U32.unpack_from(buf, pos)
                pos += 4
                if len(buf) < pos + n:
                    raise DecodeError(f"plane {63 - i} block {b}: payload truncated")
                plane.append(bytes(buf[pos:pos + n]))
                pos += n
            payloads.append(plane)
        if pos != len(buf):
            raise DecodeError("trailing bytes after the last core plane")
        return cls(size, block_size, coder, Breakpoint(last, stops), payloads)


def _block_ranges(n, block_size):
    nblocks = max(1, -(-n // block_size))
    return [(b * block_size, min(n, (b + 1) * block_size)) for b in range(nblocks)]


def _encode_block(bits, sig_before, signs, lead_stop, trail_stop, coder):
    """One plane of one block: entropy-coded leading run lengths, then raw bits."""
    leading = ~sig_before
    lead_rank = np.cumsum(leading) - 1
    trail_rank = np.cumsum(sig_before) - 1
    lead_in = leading & (lead_rank < lead_stop)
    trail_in = sig_before & (trail_rank < trail_stop)
    runs = entropy.rle_extract(bits[lead_in])
    coded = _ENCODERS[coder](runs)
    newly = lead_in & bits
    raw_mask = trail_in | newly
    raw = np.where(trail_in, bits, signs)[raw_mask]
    out = bytearray()
    write_varint(out, len(runs))
    write_varint(out, len(coded))
    out += coded
    out += pack_bits(raw)
    stats = (len(coded) * 8 + int(newly.sum()), int(trail_in.sum()))
    return bytes(out), stats


_ENCODERS = {1: entropy.ac_encode, 2: entropy.rans_encode}
_DECODERS = {1: entropy.ac_decode, 2: entropy.rans_decode}


def _lockstep(mask, ranges):
    """Indices of ``mask`` ordered by (rank inside its block, block)."""
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return idx
    starts = np.array([a for a, _ in ranges])
    block = np.searchsorted(starts, idx, side="right") - 1
    counts = np.bincount(block, minlength=len(ranges))
    first = np.concatenate(([0], np.cumsum(counts)[:-1]))
    rank = np.arange(idx.size) - first[block]
    return idx[np.lexsort((block, rank))]


def _map(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [fn(*it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda it: fn(*it), items))


def encode_planes(mags, negative, target_units, coder="ac", block_size=None,
                  split=True, workers=1, trace=False):
    """Bit-plane encode ``mags`` until the tracked SSE reaches ``target_units``."""
    mags = np.ascontiguousarray(mags, dtype=np.uint64)
    negative = np.asarray(negative, dtype=bool)
    cid = entropy.coder_id(coder)
    n = mags.size
    block_size = int(block_size or default_block_size(n))
    if block_size < 1:
        raise ValueError("block size must be positive")
    if target_units < 0:
        raise ValueError("target SSE must be nonnegative")
    ranges = _block_ranges(n, block_size)
    nblocks = len(ranges)
    full = np.array([[0, 0]] * nblocks, dtype=np.int64)

    tracker = SSETracker(backward_sum_sse(mags.astype(np.float64) * _UNIT), n)
    payloads = []
    history = []
    eff = None  # (leading, trailing) SSE reduction per payload bit on the previous plane
    last = NO_PLANE
    stops = full
    for p in range(63, -1, -1):
        if tracker.sse <= target_units:
            break
        if tracker.needs_recalibration():
            tracker.reset(math.ldexp(exact_sum_of_squares(residuals_at(mags, p + 1)), -128))
        sig_before = (mags >> np.uint64(p + 1)) != 0 if p < 63 else np.zeros(n, dtype=bool)
        bits = ((mags >> np.uint64(p)) & _ONE).astype(bool)
        reduction = _sq_units(residuals_at(mags, p + 1)) - _sq_units(residuals_at(mags, p))
        block_red = [float(reduction[a:b].sum()) for a, b in ranges]
        plane_red = math.fsum(block_red)

        lead_total = np.array([int((~sig_before[a:b]).sum()) for a, b in ranges])
        trail_total = np.array([int(sig_before[a:b].sum()) for a, b in ranges])
        counts = np.stack([lead_total, trail_total], axis=1)
        if tracker.sse - plane_red > target_units:
            candidates = [(counts, None)]
        else:
            candidates = _final_candidates(reduction, sig_before, ranges, tracker.sse,
                                           target_units, split, eff)
        best = None
        for stops_c, achieved_c in candidates:
            items = [(bits[a:b], sig_before[a:b], negative[a:b], stops_c[i, 0], stops_c[i, 1],
                      cid) for i, (a, b) in enumerate(ranges)]
            enc = _map(_encode_block, items, workers)
            size = sum(len(e[0]) for e in enc)
            if best is None or size < best[0]:
                best = (size, stops_c, achieved_c, enc)
        _, stops, achieved, encoded = best
        payloads.append([e[0] for e in encoded])
        last = p
        lead_bits = sum(e[1][0] for e in encoded)
        trail_bits = sum(e[1][1] for e in encoded)
        lead_red = float(reduction[~sig_before].sum())
        trail_red = float(reduction[sig_before].sum())
        eff = (lead_red / lead_bits if lead_bits else 0.0,
               trail_red / trail_bits if trail_bits else 0.0)
        if achieved is None:
            tracker.subtract(plane_red, n)
            if trace:
                history.append((p, tracker.sse, tracker.margin))
        else:
            tracker.subtract(tracker.sse - achieved, n)
            if trace:
                history.append((p, tracker.sse, tracker.margin))
            break
    if last == NO_PLANE:
        stops = full
    stream = PlaneStream(n, block_size, cid, Breakpoint(last, np.asarray(stops, dtype=np.int64)),
                         payloads, trace=history)
    stream.achieved_units = tracker.sse
    return stream


def _final_candidates(reduction, sig_before, ranges, sse, target, split, eff):
    """Stop sets to try on the last plane, preferred first.

    Split truncation orders the categories by their efficiency on the previous
    plane. Both category orders and the plain coefficient-order cut fit the
    split format, so all three are offered and the encoder keeps the smallest.
    """
    if not split:
        return [_final_stops(reduction, sig_before, ranges, sse, target, None)]
    lead_first = eff is None or eff[LEADING] >= eff[TRAILING]
    out = []
    for order in (lead_first, not lead_first, None):
        stops, achieved = _final_stops(reduction, sig_before, ranges, sse, target, order)
        if not any(np.array_equal(stops, s) for s, _ in out):
            out.append((stops, achieved))
    return out


def _final_stops(reduction, sig_before, ranges, sse, target, lead_first):
    """Per-block stop counts on the last plane and the tracked SSE reached there.

    ``lead_first`` True or False exhausts one category before the other;
    None cuts in plain coefficient order.
    """
    if lead_first is None:
        seq = _lockstep(np.ones(reduction.size, dtype=bool), ranges)
    else:
        first_mask = ~sig_before if lead_first else sig_before
        seq = np.concatenate([_lockstep(first_mask, ranges), _lockstep(~first_mask, ranges)])
    cum = np.cumsum(reduction[seq])
    hit = np.flatnonzero(sse - cum <= target)
    j = int(hit[0]) if hit.size else seq.size - 1
    taken = np.zeros(reduction.size, dtype=bool)
    taken[seq[:j + 1]] = True
    stops = np.array([[int((taken[a:b] & ~sig_before[a:b]).sum()),
                       int((taken[a:b] & sig_before[a:b]).sum())] for a, b in ranges],
                     dtype=np.int64)
    return stops, sse - float(cum[j])


def _decode_block(block_payloads, length, first_plane_stops, coder, where):
    """Decode every plane of one block; returns (known bits, negative, lowest known plane)."""
    m = np.zeros(length, dtype=np.uint64)
    neg = np.zeros(length, dtype=bool)
    known = np.full(length, 64, dtype=np.int64)
    sig = np.zeros(length, dtype=bool)
    nplanes = len(block_payloads)
    for i, payload in enumerate(block_payloads):
        p = 63 - i
        lead_idx = np.flatnonzero(~sig)
        trail_idx = np.flatnonzero(sig)
        if i == nplanes - 1:
            lead_stop, trail_stop = (int(s) for s in first_plane_stops)
            if lead_stop > lead_idx.size or trail_stop > trail_idx.size:
                raise DecodeError(f"plane {p} {where}: stop beyond the block")
        else:
            lead_stop, trail_stop = lead_idx.size, trail_idx.size
        try:
            count, pos = read_varint(payload, 0)
            nbytes, pos = read_varint(payload, pos)
            if len(payload) - pos < nbytes:
                raise DecodeError("leading-bit stream truncated")
            runs = _DECODERS[coder](payload[pos:pos + nbytes], count)
            lead_bits = entropy.rle_restore(runs, lead_stop)
            pos += nbytes
            lead_in = lead_idx[:lead_stop]
            newly = lead_in[lead_bits]
            trail_in = trail_idx[:trail_stop]
            raw_pos = np.sort(np.concatenate([trail_in, newly]))
            raw = unpack_bits(payload[pos:], raw_pos.size)
            if len(payload) - pos != -(-raw_pos.size // 8):
                raise DecodeError("raw bit section has the wrong length")
        except DecodeError as exc:
            raise DecodeError(f"plane {p} {where}: {exc}") from None
        is_trail = sig[raw_pos]
        bit = np.uint64(1) << np.uint64(p)
        m[raw_pos[is_trail & raw]] |= bit
        neg[raw_pos[~is_trail]] = raw[~is_trail]
        m[newly] |= bit
        sig[newly] = True
        known[lead_in] = p
        known[trail_in] = p
    return m, neg, known


def decode_planes(stream, workers=1):
    """Known magnitude bits, signs and lowest known plane of every coefficient."""
    n = stream.size
    ranges = _block_ranges(n, stream.block_size)
    if stream.breakpoint.empty:
        return (np.zeros(n, dtype=np.uint64), np.zeros(n, dtype=bool),
                np.full(n, 64, dtype=np.int64))
    items = [([plane[b] for plane in stream.payloads], hi - lo, stream.breakpoint.stops[b],
              stream.coder, f"block {b}")
             for b, (lo, hi) in enumerate(ranges)]
    parts = _map(_decode_block, items, workers)
    return tuple(np.concatenate([part[i] for part in parts]) for i in range(3))


def dequantize(known_bits, negative, known_plane, k):
    """Reconstruct values; significant ones sit mid-way through their unknown bits."""
    known_bits = np.asarray(known_bits, dtype=np.uint64)
    known_plane = np.asarray(known_plane, dtype=np.int64)
    sig = known_bits != 0
    corr_plane = np.clip(known_plane - 1, 0, 63).astype(np.uint64)
    correction = np.where(sig & (known_plane > 0) & (known_plane < 64), _ONE << corr_plane,
                          np.uint64(0))
    val = np.ldexp((known_bits + correction).astype(np.float64), -k)
    return np.where(negative & sig, -val, val)


@dataclass
class QuantizedCore:
    magnitudes: np.ndarray
    negative: np.ndarray
    scale_exponent: int
    shape: tuple
    spec: VectorizationSpec
    zero_flag: bool

    def values(self):
        """Quantized (not yet truncated) core in its natural shape."""
        v = np.ldexp(self.magnitudes.astype(np.float64), -self.scale_exponent)
        v = np.where(self.negative, -v, v)
        return devectorize(v, self.spec, self.shape)

    @property
    def slice_norms(self):
        return slice_norms(self.values())


def slice_norms(core):
    """Euclidean norm of every slice of ``core``, one array per mode."""
    sq = core * core
    return [np.sqrt(np.sum(sq, axis=tuple(j for j in range(core.ndim) if j != i)))
            for i in range(core.ndim)]


def quantize(core, spec=None):
    spec = (spec or VectorizationSpec()).resolve(core.shape)
    mags, neg, k, zero = quantize_vector(vectorize(np.asarray(core, dtype=np.float64), spec))
    return QuantizedCore(mags, neg, k, tuple(core.shape), spec, zero)


@dataclass
class EncodedCore:
    shape: tuple
    spec: VectorizationSpec
    scale_exponent: int
    zero_flag: bool
    stream: PlaneStream
    achieved_sse: float = 0.0

    @property
    def breakpoint(self):
        return self.stream.breakpoint


def encode(q, quant_sse_target, coder="ac", block_size=None, split=True, workers=1,
           trace=False):
    """Encode a quantized core until its quantization SSE reaches ``quant_sse_target``."""
    if quant_sse_target < 0:
        raise ValueError("target SSE must be nonnegative")
    if q.zero_flag:
        n = q.magnitudes.size
        size = int(block_size or default_block_size(n))
        stops = np.zeros((max(1, -(-n // size)), 2), np.int64)
        stream = PlaneStream(n, size, entropy.coder_id(coder), Breakpoint(NO_PLANE, stops), [])
        return EncodedCore(q.shape, q.spec, 0, True, stream, 0.0)
    k = q.scale_exponent
    stream = encode_planes(q.magnitudes, q.negative, to_units(quant_sse_target, k), coder,
                           block_size, split, workers, trace)
    # exact SSE of what the decoder will reconstruct
    _, _, known = decode_state(stream, q.magnitudes)
    exact = 0.0
    if known.size:
        absres = _residual_with_known(q.magnitudes, known)
        exact = from_units(math.ldexp(exact_sum_of_squares(absres), -128), k)
    return EncodedCore(q.shape, q.spec, k, False, stream, exact)


def decode_state(stream, mags):
    """Encoder-side view of what the decoder knows, without parsing payloads."""
    n = mags.size
    bp = stream.breakpoint
    known = np.full(n, 64, dtype=np.int64)
    if bp.empty:
        return np.zeros(n, np.uint64), np.zeros(n, bool), known
    p = bp.last_plane
    known[:] = p + 1 if p < 63 else 64
    sig_before = (mags >> np.uint64(p + 1)) != 0 if p < 63 else np.zeros(n, dtype=bool)
    for b, (lo, hi) in enumerate(_block_ranges(n, stream.block_size)):
        lead_stop, trail_stop = bp.stops[b]
        s = sig_before[lo:hi]
        lead = np.flatnonzero(~s)[:lead_stop] + lo
        trail = np.flatnonzero(s)[:trail_stop] + lo
        known[lead] = p
        known[trail] = p
    shift = np.minimum(known, 63).astype(np.uint64)
    bits = np.where(known < 64, (mags >> shift) << shift, np.uint64(0))
    return bits, None, known


def _residual_with_known(mags, known):
    out = np.empty_like(mags)
    for plane in np.unique(known):
        sel = known == plane
        out[sel] = residuals_at(mags[sel], int(plane))
    return out


def decode(e, workers=1):
    """Core tensor (natural shape) reconstructed from an encoded core."""
    if e.zero_flag:
        return np.zeros(e.shape)
    bits, neg, known = decode_planes(e.stream, workers)
    vec = dequantize(bits, neg, known, e.scale_exponent)
    return devectorize(vec, e.spec, e.shape)


def skip_dead_slices(decoded_core):
    """Per mode, a boolean mask of slices without any significant coefficient."""
    nz = np.asarray(decoded_core) != 0
    return [~np.any(nz, axis=tuple(j for j in range(nz.ndim) if j != i)) for i in range(nz.ndim)]


def reconstructed_values(stream, mags, negative, k):
    """What :func:`decode_planes` plus :func:`dequantize` will return, computed
    from the encoder's own data instead of the payload."""
    bits, _, known = decode_state(stream, mags)
    return dequantize(bits, negative, known, k)


def encoded_core_values(q, e):
    """Decoded core (natural shape) as the encoder predicts it."""
    if e.zero_flag:
        return np.zeros(e.shape)
    vec = reconstructed_values(e.stream, q.magnitudes, q.negative, e.scale_exponent)
    return devectorize(vec, e.spec, e.shape)
