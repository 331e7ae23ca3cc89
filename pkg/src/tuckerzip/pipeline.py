"""End-to-end compression and decompression."""

import time
from dataclasses import dataclass, field

import numpy as np

from . import corecodec, factorcodec, sthosvd
from .container import Header, emit, read_container, to_internal, write_container
from .corecodec import EncodedCore, PlaneStream
from .entropy import coder_id
from .errormodel import DEFAULT_RTMSS, ErrorEstimate, make_budget
from .tensor import norm_sq
from .vectorize import METHOD_IDS, METHODS, VectorizationSpec

# Share of the post-truncation budget spent on factor quantization (split
# evenly across modes); the core receives the rest.
FACTOR_SSE_SHARE = 0.02


@dataclass
class CompressionResult:
    data: bytes
    header: Header
    estimate: ErrorEstimate
    ranks: tuple
    timings: dict = field(default_factory=dict)
    reconstruction: np.ndarray = None

    @property
    def compression_factor(self):
        return self.header.original_bytes / len(self.data)


def compress(values, target_re=None, target_sse=None, rtmss=DEFAULT_RTMSS, mode_order=None,
             vectorization="lexicographic", storage_order=None, coder="ac", split_planes=True,
             simple_factor_weights=False, workers=1, block_size=None, precision="float64",
             factor_share=FACTOR_SSE_SHARE, keep_reconstruction=False):
    """Compress an array to container bytes.

    Exactly one of ``target_re`` (relative Euclidean error) and ``target_sse``
    must be given. With ``keep_reconstruction`` the encoder's view of the
    decompressed (float) tensor is returned alongside, which saves a decode.
    """
    timings = {}
    t0 = time.perf_counter()
    values = np.asarray(values)
    dtype = values.dtype.name
    a = to_internal(values, precision)
    if a.ndim < 1:
        raise ValueError("input must have at least one mode")
    if not np.all(np.isfinite(a)):
        raise ValueError("input contains non-finite values")
    total = norm_sq(a)
    budget = make_budget(total, rtmss, target_re=target_re, target_sse=target_sse)

    f = sthosvd.compress(a, budget.sthosvd_target, order=mode_order)
    budget = budget.with_truncation(f.truncation_sse)
    timings["sthosvd"] = time.perf_counter() - t0

    t1 = time.perf_counter()
    core = np.asarray(f.core, dtype=np.float64)
    d = core.ndim
    p = f.processing_order
    householders, adjusted = [], []
    for mode in range(d):
        h, u_adj, signs = factorcodec.factorize(np.asarray(f.factors[mode], dtype=np.float64),
                                                tol=1e-4 if precision == "float32" else 1e-8)
        householders.append(h)
        adjusted.append(u_adj)
        shape = [1] * d
        shape[p.index(mode)] = -1
        core = core * signs.reshape(shape)

    remaining = budget.core_quant_target_sse
    share = factor_share if remaining > 0 else 0.0
    spec = VectorizationSpec(vectorization, storage_order).resolve(core.shape)
    q = corecodec.quantize(core, spec)
    e = corecodec.encode(q, remaining * (1.0 - share), coder, block_size, split_planes, workers)
    decoded_core = corecodec.encoded_core_values(q, e)
    timings["core"] = time.perf_counter() - t1

    t2 = time.perf_counter()
    axis_norms = corecodec.slice_norms(decoded_core)
    dead_axes = corecodec.skip_dead_slices(decoded_core)
    factor_sections, decoded_factors, terms = [], [], []
    for mode in range(d):
        axis = p.index(mode)
        ef = factorcodec.encode_factor(householders[mode], axis_norms[axis], dead_axes[axis],
                                       remaining * share / d, coder, block_size, split_planes,
                                       workers, simple_factor_weights)
        u = _factor_from_encoder(ef, householders[mode], axis_norms[axis], simple_factor_weights)
        decoded_factors.append(u)
        terms.append(float(np.sum(((u - adjusted[mode]) * axis_norms[axis]) ** 2)))
        factor_sections.append(ef.to_bytes())
    timings["factors"] = time.perf_counter() - t2

    estimate = ErrorEstimate(f.truncation_sse, e.achieved_sse, tuple(terms))
    header = Header(
        dtype=dtype, mode_sizes=a.shape, ranks=f.ranks, compression_order=p,
        storage_order=spec.storage_order, vectorization=spec.method_id,
        coder=coder_id(coder), scale_exponent=e.scale_exponent, block_size=e.stream.block_size,
        rtmss=budget.rtmss, target_sse=budget.target_sse_total, norm_sq=total,
        truncation_sse=f.truncation_sse, core_sse=e.achieved_sse, estimate_sse=estimate.total,
        zero=e.zero_flag, split=bool(split_planes), simple_weights=bool(simple_factor_weights),
        float32=precision == "float32")
    data = write_container(header, e.stream.to_bytes(), factor_sections)
    result = CompressionResult(data, header, estimate, f.ranks, timings)
    if keep_reconstruction:
        result.reconstruction = sthosvd.expand(decoded_core, p, decoded_factors)
    timings["total"] = time.perf_counter() - t0
    return result


def _factor_from_encoder(ef, h, slice_norms, simple):
    """Decoded factor as predicted by the encoder (no payload parsing)."""
    n, r, cols = ef.n, ef.r, ef.stored_columns
    if ef.zero_flag or cols == 0:
        coeffs = np.zeros(factorcodec.stored_count(n, cols))
    else:
        scales = factorcodec.coefficient_scales(slice_norms, n, simple)[:cols]
        weighted = factorcodec.below_diagonal(h.reflectors, cols) * factorcodec._expand_scales(
            scales, n, cols)
        mags, neg, k, _ = corecodec.quantize_vector(weighted)
        scaled = corecodec.reconstructed_values(ef.stream, mags, neg, k)
        full = factorcodec._expand_scales(scales, n, cols)
        coeffs = np.divide(scaled, full, out=np.zeros_like(scaled), where=full > 0)
    v = factorcodec.reflectors_from_coefficients(coeffs, n, cols, strict=False)
    u = np.zeros((n, r))
    u[:, :cols] = factorcodec.reconstruct(v)
    u[:, ef.dead] = 0.0
    return u


def decompress_float(buf, workers=1):
    """Decompressed tensor as float64, plus the parsed header."""
    c = read_container(buf)
    h = c.header
    spec = VectorizationSpec(METHODS[h.vectorization] if h.vectorization < len(METHODS)
                             else h.vectorization, h.storage_order)
    core_shape = tuple(h.ranks[m] for m in h.compression_order)
    n = int(np.prod(core_shape))
    stream = PlaneStream.from_bytes(c.core, n, h.block_size, h.coder)
    e = EncodedCore(core_shape, spec, h.scale_exponent, h.zero, stream, h.core_sse)
    core = corecodec.decode(e, workers)
    norms = corecodec.slice_norms(core)
    factors = []
    for mode, section in enumerate(c.factors):
        axis = h.compression_order.index(mode)
        ef = factorcodec.EncodedFactor.from_bytes(section, h.mode_sizes[mode], h.ranks[mode], h.coder)
        factors.append(factorcodec.decode_factor(ef, norms[axis], h.simple_weights, workers))
    return sthosvd.expand(core, h.compression_order, factors), h


def decompress(buf, workers=1, dtype=None):
    """Decompressed tensor in the original (or the requested) data type."""
    values, h = decompress_float(buf, workers)
    return emit(values, dtype or h.dtype)


__all__ = ["CompressionResult", "FACTOR_SSE_SHARE", "METHOD_IDS", "compress", "decompress",
           "decompress_float"]
