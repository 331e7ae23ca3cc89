"""Factor matrices stored as Householder reflectors.

An ``n x r`` matrix with orthonormal columns is, up to column signs, the
product ``H_1 ... H_r`` of reflections ``H_j = I - 2 v_j v_j^T`` applied to
the first ``r`` identity columns, where ``v_j`` is zero above row ``j``.
Each ``v_j`` is normalized with a positive diagonal entry, so only the
entries strictly below the diagonal are kept: ``nr - r(r+1)/2`` numbers.
Column signs of the factor are adjusted to match (the core is flipped
accordingly), which removes the triangular factor altogether.

Before quantization reflector ``j`` is scaled by a weight derived from the
decoded core's slice norms so that equal absolute coefficient errors have
about equal effect on the reconstruction error.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .corecodec import (NO_PLANE, Breakpoint, PlaneStream, decode_planes, default_block_size,
                        dequantize, encode_planes, quantize_vector, to_units)
from .entropy import DecodeError, coder_id

_HEADER = struct.Struct("<IIhB")


@dataclass
class HouseholderFactor:
    reflectors: np.ndarray  # n x r, column j zero above row j, unit norm

    @property
    def shape(self):
        return self.reflectors.shape

    @property
    def stored_coefficients(self):
        return below_diagonal(self.reflectors)


def stored_count(n, r):
    return n * r - r * (r + 1) // 2


def below_diagonal(v, columns=None):
    """Strictly sub-diagonal entries, column by column."""
    r = v.shape[1] if columns is None else columns
    return np.concatenate([v[j + 1:, j] for j in range(r)]) if r else np.zeros(0)


def factorize(u, tol=1e-8):
    """Reflectors of ``u`` and the sign-adjusted factor they reproduce.

    Returns ``(HouseholderFactor, u_adjusted, signs)`` with
    ``u_adjusted = u * signs``.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 2 or u.shape[0] < u.shape[1]:
        raise ValueError(f"expected a tall matrix, got shape {u.shape}")
    n, r = u.shape
    if r and np.max(np.abs(u.T @ u - np.eye(r))) > tol:
        raise ValueError("factor columns are not orthonormal")
    rmat = u.copy()
    v_all = np.zeros((n, r))
    signs = np.ones(r)
    for i in range(r):
        v = rmat[i:, i].copy()
        nv = np.linalg.norm(v)
        v[0] += (1.0 if v[0] >= 0 else -1.0) * nv
        v /= np.linalg.norm(v)
        rmat[i:, i:] -= 2.0 * np.outer(v, v @ rmat[i:, i:])
        # -v gives the same reflection; keep the diagonal entry positive
        v_all[i:, i] = v if v[0] >= 0 else -v
        signs[i] = 1.0 if rmat[i, i] >= 0 else -1.0
    return HouseholderFactor(v_all), u * signs, signs


def reflectors_from_coefficients(coeffs, n, r, strict=True):
    """Rebuild reflectors from sub-diagonal entries, filling in the diagonal."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.size != stored_count(n, r):
        raise ValueError(f"{coeffs.size} coefficients do not describe an {n} x {r} factor")
    v = np.zeros((n, r))
    pos = 0
    for j in range(r):
        sub = coeffs[pos:pos + n - j - 1]
        pos += n - j - 1
        s = float(sub @ sub)
        if s >= 1.0:
            if strict:
                raise ValueError(f"reflector {j} has sub-diagonal norm >= 1")
            diag = 0.0
        else:
            diag = np.sqrt(1.0 - s)
        col = np.concatenate(([diag], sub))
        nrm = np.linalg.norm(col)
        v[j:, j] = col / nrm if nrm > 0 else np.eye(n - j)[0]
    return v


def reconstruct(h):
    """``H_1 ... H_r`` applied to the first ``r`` identity columns."""
    v = h.reflectors if isinstance(h, HouseholderFactor) else np.asarray(h)
    n, r = v.shape
    q = np.eye(n, r)
    for j in range(r - 1, -1, -1):
        vj = v[j:, j]
        q[j:, :] -= 2.0 * np.outer(vj, vj @ q[j:, :])
    return q


def weights(slice_norms, n):
    """Per-reflector weights ``alpha_j`` (every entry of ``v_j`` shares one)."""
    s2 = np.asarray(slice_norms, dtype=np.float64) ** 2
    r = s2.size
    if n < r:
        raise ValueError(f"factor with {n} rows cannot have {r} columns")
    tail = np.concatenate((np.cumsum(s2[::-1])[::-1][1:], [0.0]))
    alpha = np.empty(r)
    for j in range(r):
        nj = n - j
        rt = np.sqrt(nj)
        a = (1.0 + (nj + 5.0 * rt + 2.0) / ((rt + 1.0) ** 2 * rt)) * s2[j]
        if tail[j] > 0:
            a += (2.0 / (nj - 1) + (nj + 2.0 * rt + 2.0) / ((rt + 1.0) ** 3 * rt)) * tail[j]
        alpha[j] = a
    return alpha


def coefficient_scales(slice_norms, n, simple=False):
    """Multiplier applied to every stored entry of each reflector."""
    if simple:
        return np.asarray(slice_norms, dtype=np.float64).copy()
    return np.sqrt(2.0 * weights(slice_norms, n))


def _expand_scales(scales, n, r):
    return np.concatenate([np.full(n - j - 1, scales[j]) for j in range(r)]) if r else np.zeros(0)


@dataclass
class EncodedFactor:
    n: int
    r: int
    dead: np.ndarray  # bool per column
    stored_columns: int
    scale_exponent: int
    zero_flag: bool
    stream: PlaneStream

    def to_bytes(self):
        bitmap = np.packbits(self.dead.astype(np.uint8)).tobytes()
        head = _HEADER.pack(self.stored_columns, self.stream.block_size, self.scale_exponent,
                            int(self.zero_flag))
        return bitmap + head + self.stream.to_bytes()

    @classmethod
    def from_bytes(cls, buf, n, r, coder):
        nb = -(-r // 8)
        if len(buf) < nb + _HEADER.size:
            raise DecodeError("factor header is truncated")
        dead = np.unpackbits(np.frombuffer(bytes(buf[:nb]), dtype=np.uint8), count=r).astype(bool)
        cols, block_size, k, zero = _HEADER.unpack_from(buf, nb)
        if cols > r or block_size == 0:
            raise DecodeError("factor header is inconsistent")
        size = stored_count(n, cols)
        stream = PlaneStream.from_bytes(bytes(buf[nb + _HEADER.size:]), size, block_size, coder)
        return cls(n, r, dead, cols, k, bool(zero), stream)


def _stored_columns(dead):
    alive = np.flatnonzero(~dead)
    return int(alive[-1]) + 1 if alive.size else 0


def encode_factor(h, slice_norms, dead, target_sse, coder="ac", block_size=None, split=True,
                  workers=1, simple=False):
    """Quantize and bit-plane code the weighted reflector entries of one factor."""
    v = h.reflectors
    n, r = v.shape
    dead = np.asarray(dead, dtype=bool)
    cols = _stored_columns(dead)
    scales = coefficient_scales(slice_norms, n, simple)
    coeffs = below_diagonal(v, cols) * _expand_scales(scales, n, cols)
    mags, neg, k, zero = quantize_vector(coeffs)
    if zero:
        # nothing to send; an empty breakpoint decodes to all zeros
        k = 0
        size = int(block_size or default_block_size(mags.size))
        stops = np.zeros((max(1, -(-mags.size // size)), 2), dtype=np.int64)
        stream = PlaneStream(mags.size, size, coder_id(coder), Breakpoint(NO_PLANE, stops), [])
    else:
        stream = encode_planes(mags, neg, to_units(target_sse, k), coder, block_size, split, workers)
    return EncodedFactor(n, r, dead, cols, k, zero, stream)


def decode_factor(e, slice_norms, simple=False, workers=1):
    """Reconstructed (sign-adjusted) factor with dead columns zeroed."""
    n, r, cols = e.n, e.r, e.stored_columns
    if e.zero_flag or cols == 0:
        coeffs = np.zeros(stored_count(n, cols))
    else:
        bits, neg, known = decode_planes(e.stream, workers)
        scaled = dequantize(bits, neg, known, e.scale_exponent)
        scales = _expand_scales(coefficient_scales(slice_norms, n, simple)[:cols], n, cols)
        coeffs = np.divide(scaled, scales, out=np.zeros_like(scaled), where=scales > 0)
    v = reflectors_from_coefficients(coeffs, n, cols, strict=False)
    u = np.zeros((n, r))
    u[:, :cols] = reconstruct(v)
    u[:, e.dead] = 0.0
    return u
