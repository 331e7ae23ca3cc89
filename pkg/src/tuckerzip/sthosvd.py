"""Sequentially truncated HOSVD with a circular mode shift.

The input is transposed once into the processing order. Each step then takes
the front mode, projects it onto its leading left singular vectors and writes
the projected mode to the back, so the core cycles through the rotated mode
orders without further transpositions.
"""

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .tensor import check_permutation, transpose


@dataclass(frozen=True)
class TuckerFactorization:
    """Truncated core plus orthonormal factors.

    ``core`` stores its axes in ``processing_order``: axis ``j`` of the core
    belongs to mode ``processing_order[j]``. ``factors[i]`` is the
    ``n_i x r_i`` factor of natural mode ``i``.
    """

    core: np.ndarray
    factors: tuple
    processing_order: tuple
    per_step_truncation_sse: tuple

    @property
    def ranks(self):
        return tuple(u.shape[1] for u in self.factors)

    @property
    def shape(self):
        return tuple(u.shape[0] for u in self.factors)

    @property
    def truncation_sse(self):
        return float(sum(self.per_step_truncation_sse))


def choose_truncation_rank(squared_singular_values, step_budget):
    """Smallest rank whose discarded tail of squared singular values fits the budget.

    Returns ``(rank, discarded_sse)``. The rank is never below 1.
    """
    s2 = np.asarray(squared_singular_values, dtype=np.float64)
    if s2.size == 0:
        raise ValueError("no singular values to truncate")
    if step_budget < 0:
        raise ValueError("step budget must be nonnegative")
    # tail[r] = sum(s2[r:]), accumulated from the small end
    tail = np.concatenate((np.cumsum(s2[::-1])[::-1], [0.0]))
    fits = np.flatnonzero(tail <= step_budget)
    rank = max(int(fits[0]), 1)
    return rank, float(tail[rank])


def compression_mode_order(mode_sizes):
    """Process short modes first; ties keep the natural order."""
    return tuple(sorted(range(len(mode_sizes)), key=lambda i: (mode_sizes[i], i)))


def decompression_cost(mode_sizes, ranks, order):
    """Naive flop estimate for expanding the core in the given mode order."""
    d = len(order)
    cost = 0
    for i in range(d):
        term = 1
        for m in order[:i + 1]:
            term *= mode_sizes[m]
        for m in order[i:]:
            term *= ranks[m]
        cost += term
    return cost


def decompression_mode_order(mode_sizes, ranks):
    """Exhaustive search for the cheapest expansion order (lexicographic tie-break)."""
    d = len(mode_sizes)
    if d > 8:
        raise ValueError("exhaustive order search is limited to 8 modes")
    best, best_cost = None, None
    for order in permutations(range(d)):
        cost = decompression_cost(mode_sizes, ranks, order)
        if best_cost is None or cost < best_cost:
            best, best_cost = order, cost
    return best


def _fix_signs(u):
    # largest-magnitude entry of every column made nonnegative
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.where(u[idx, np.arange(u.shape[1])] < 0, -1.0, 1.0)
    return u * signs


def _left_singular(m, method):
    if method == "gram" and m.shape[0] <= m.shape[1]:
        w, v = np.linalg.eigh(m @ m.T)
        w, v = w[::-1], v[:, ::-1]
        return v, np.clip(w, 0.0, None)
    if method not in ("svd", "gram"):
        raise ValueError(f"unknown SVD method {method!r}")
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    return u, s * s


def compress(a, sthosvd_sse_target, order=None, svd_method="svd"):
    """ST-HOSVD of ``a`` under a total truncation SSE budget.

    Each step gets ``remaining_budget / remaining_modes``; whatever a step does
    not spend carries over. ``order=None`` uses :func:`compression_mode_order`.
    """
    a = np.asarray(a)
    if not np.all(np.isfinite(a)):
        raise ValueError("input contains non-finite values")
    if sthosvd_sse_target < 0:
        raise ValueError("truncation target must be nonnegative")
    d = a.ndim
    order = compression_mode_order(a.shape) if order is None else check_permutation(order, d)

    core = transpose(a, order)
    factors = [None] * d
    steps = []
    remaining = float(sthosvd_sse_target)
    for i, mode in enumerate(order):
        rows = core.shape[0]
        mat = core.reshape(rows, -1)
        u, s2 = _left_singular(mat, svd_method)
        rank, discarded = choose_truncation_rank(s2, remaining / (d - i))
        remaining = max(remaining - discarded, 0.0)
        u = _fix_signs(u[:, :rank])
        factors[mode] = u
        steps.append(discarded)
        # projection fused with the transpose: (rest, rank) moves the mode to the back
        core = (mat.T @ u).reshape(core.shape[1:] + (rank,))
    return TuckerFactorization(np.ascontiguousarray(core), tuple(factors), order, tuple(steps))


def expand(core, core_modes, factors, order=None):
    """Multiply ``core`` (axes belonging to ``core_modes``) by all factors.

    Mirrors the compression scheme: the core is brought into the expansion
    order, each step replaces the front axis by the full mode at the back, and
    one final transposition restores the natural mode order.
    """
    d = core.ndim
    core_modes = check_permutation(core_modes, d)
    sizes = [u.shape[0] for u in factors]
    ranks = [u.shape[1] for u in factors]
    for axis, mode in enumerate(core_modes):
        if core.shape[axis] != ranks[mode]:
            raise ValueError(
                f"core axis {axis} has size {core.shape[axis]} but factor {mode} has "
                f"{ranks[mode]} columns")
    if order is None:
        order = decompression_mode_order(sizes, ranks)
    order = check_permutation(order, d)

    t = transpose(core, [core_modes.index(m) for m in order])
    for mode in order:
        mat = t.reshape(t.shape[0], -1)
        t = (mat.T @ factors[mode].T).reshape(t.shape[1:] + (sizes[mode],))
    return transpose(t, np.argsort(order))


def reconstruct(f, order=None):
    """Full tensor ``(U_1, ..., U_d) . core`` in natural mode order."""
    return expand(f.core, f.processing_order, f.factors, order)
