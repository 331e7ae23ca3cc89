"""Dense tensor primitives.

Tensors are plain C-ordered numpy arrays, so element ``(i_1, ..., i_d)`` sits
at flat offset ``sum_k i_k * prod_{m>k} n_m`` (last index fastest). Modes are
0-based everywhere in this package.
"""

import numpy as np

FLOAT_DTYPES = {"float64": np.float64, "float32": np.float32}


def as_tensor(a, dtype=np.float64):
    """Return ``a`` as a C-contiguous floating array of order >= 1."""
    t = np.ascontiguousarray(a, dtype=dtype)
    if t.ndim == 0:
        raise ValueError("tensor must have at least one mode")
    return t


def check_mode(t, k):
    if not 0 <= k < t.ndim:
        raise ValueError(f"mode {k} out of range for a tensor of order {t.ndim}")
    return k


def check_permutation(perm, d):
    """Validate ``perm`` as a bijection of ``range(d)`` and return it as a tuple."""
    perm = tuple(int(p) for p in perm)
    if len(perm) != d or sorted(perm) != list(range(d)):
        raise ValueError(f"{perm} is not a permutation of {tuple(range(d))}")
    return perm


def inverse_permutation(perm):
    inv = [0] * len(perm)
    for i, p in enumerate(perm):
        inv[p] = i
    return tuple(inv)


def matricize(t, k):
    """Mode-``k`` matricization, shape ``(n_k, N / n_k)``.

    Column ``j`` is the ``j``-th mode-``k`` fiber, with fibers enumerated
    lexicographically over the remaining indices (last fastest). For ``k = 0``
    this is a reshape of the underlying buffer.
    """
    check_mode(t, k)
    if k == 0:
        return t.reshape(t.shape[0], -1)
    return np.moveaxis(t, k, 0).reshape(t.shape[k], -1)


def dematricize(m, shape, k):
    """Inverse of :func:`matricize` for a tensor of the given ``shape``."""
    shape = tuple(shape)
    moved = (shape[k],) + shape[:k] + shape[k + 1:]
    return np.ascontiguousarray(np.moveaxis(np.reshape(m, moved), 0, k))


def mode_product(m, t, k):
    """Mode-``k`` product ``m x_k t``: every mode-``k`` fiber is mapped by ``m``."""
    m = np.asarray(m)
    check_mode(t, k)
    if m.ndim != 2 or m.shape[1] != t.shape[k]:
        raise ValueError(
            f"matrix of shape {m.shape} cannot act on mode {k} of size {t.shape[k]}")
    shape = list(t.shape)
    shape[k] = m.shape[0]
    return dematricize(m @ matricize(t, k), shape, k)


def transpose(t, perm):
    """Permute modes so that result mode ``i`` is mode ``perm[i]`` of ``t``."""
    perm = check_permutation(perm, t.ndim)
    if perm == tuple(range(t.ndim)):
        return t
    return np.ascontiguousarray(np.transpose(t, perm))


def norm_sq(t):
    v = np.ravel(t).astype(np.float64, copy=False)
    return float(np.dot(v, v))


def sse_between(a, b):
    """Sum of squared elementwise differences."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    diff = np.ravel(a).astype(np.float64) - np.ravel(b).astype(np.float64)
    return float(np.dot(diff, diff))
