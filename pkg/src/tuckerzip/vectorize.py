"""Orders in which core coefficients become rows of the bit matrix.

Three traversals are supported: lexicographic (last index fastest), zigzag
(cells grouped by coordinate sum, lexicographic inside a group) and Z-order
(Morton order with mode 0 as the most significant bit of every interleaved
group, skipping cells outside the grid). The core is first permuted into a
storage order, by default its modes sorted by increasing size.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .tensor import check_permutation, inverse_permutation, transpose

METHODS = ("lexicographic", "zigzag", "zorder")
METHOD_IDS = {name: i for i, name in enumerate(METHODS)}
_ALIASES = {"lex": "lexicographic", "z": "zorder", "morton": "zorder"}


def canonical_method(method) -> str:
    if isinstance(method, (int, np.integer)):
        if not 0 <= method < len(METHODS):
            raise ValueError(f"unknown vectorization id {method}")
        return METHODS[method]
    name = _ALIASES.get(method, method)
    if name not in METHOD_IDS:
        raise ValueError(f"unknown vectorization {method!r}; expected one of {METHODS}")
    return name


def storage_order_heuristic(core_mode_sizes):
    """Modes sorted by increasing size, ties kept in index order."""
    return tuple(int(i) for i in np.argsort(np.asarray(core_mode_sizes), kind="stable"))


@dataclass(frozen=True)
class VectorizationSpec:
    method: str = "lexicographic"
    storage_order: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "method", canonical_method(self.method))
        if self.storage_order is not None:
            object.__setattr__(self, "storage_order", tuple(int(p) for p in self.storage_order))

    def resolve(self, core_shape):
        """Fill in the heuristic storage order for a concrete core shape."""
        order = self.storage_order
        if order is None:
            order = storage_order_heuristic(core_shape)
        return VectorizationSpec(self.method, check_permutation(order, len(core_shape)))

    @property
    def method_id(self):
        return METHOD_IDS[self.method]


def _check_position(pos, shape):
    if len(pos) != len(shape) or any(not 0 <= p < n for p, n in zip(pos, shape)):
        raise ValueError(f"position {tuple(pos)} outside grid {tuple(shape)}")


def _next_lex(pos, shape):
    pos = list(pos)
    for i in range(len(shape) - 1, -1, -1):
        pos[i] += 1
        if pos[i] < shape[i]:
            return tuple(pos)
        pos[i] = 0
    return None


def _fill_smallest(prefix, remaining, caps):
    """Lexicographically smallest completion of ``prefix`` whose entries sum to ``remaining``."""
    out = list(prefix)
    tail = sum(caps)
    for c in caps:
        tail -= c
        x = max(0, remaining - tail)
        out.append(x)
        remaining -= x
    return tuple(out)


def _next_zigzag(pos, shape):
    d = len(shape)
    caps = [n - 1 for n in shape]
    layer = sum(pos)
    prefix = 0
    prefix_sums = []
    for p in pos:
        prefix_sums.append(prefix)
        prefix += p
    # rightmost position that can grow while the rest still absorbs the layer sum
    for i in range(d - 2, -1, -1):
        if pos[i] + 1 > caps[i]:
            continue
        rem = layer - prefix_sums[i] - pos[i] - 1
        if 0 <= rem <= sum(caps[i + 1:]):
            return _fill_smallest(list(pos[:i]) + [pos[i] + 1], rem, caps[i + 1:])
    if layer + 1 > sum(caps):
        return None
    return _fill_smallest([], layer + 1, caps)


def morton_bits(shape):
    return max(1, max(int(n - 1).bit_length() for n in shape))


def morton_encode(pos, bits):
    key = 0
    for b in range(bits - 1, -1, -1):
        for c in pos:
            key = (key << 1) | ((c >> b) & 1)
    return key


def morton_decode(key, d, bits):
    pos = [0] * d
    shift = d * bits
    for b in range(bits - 1, -1, -1):
        for i in range(d):
            shift -= 1
            pos[i] |= ((key >> shift) & 1) << b
    return tuple(pos)


def _next_zorder(pos, shape):
    d = len(shape)
    bits = morton_bits(shape)
    end = 1 << (d * bits)
    key = morton_encode(pos, bits) + 1
    while key < end:
        # find the most significant key bit at which some coordinate's prefix
        # already exceeds the grid; everything below it is out of bounds too
        prefix = [0] * d
        shift = d * bits
        jump = None
        for b in range(bits - 1, -1, -1):
            for i in range(d):
                shift -= 1
                prefix[i] = (prefix[i] << 1) | ((key >> shift) & 1)
                if (prefix[i] << b) >= shape[i]:
                    jump = shift
                    break
            if jump is not None:
                break
        if jump is None:
            return morton_decode(key, d, bits)
        key = ((key >> jump) + 1) << jump
    return None


_NEXT = {"lexicographic": _next_lex, "zigzag": _next_zigzag, "zorder": _next_zorder}


def next_position(method, current, shape):
    """Cell following ``current`` in the given traversal, or ``None`` at the end."""
    shape = tuple(int(n) for n in shape)
    _check_position(current, shape)
    return _NEXT[canonical_method(method)](tuple(int(c) for c in current), shape)


def iterate_positions(method, shape):
    """Walk the whole grid with :func:`next_position`."""
    shape = tuple(int(n) for n in shape)
    pos = (0,) * len(shape)
    step = _NEXT[canonical_method(method)]
    while pos is not None:
        yield pos
        pos = step(pos, shape)


@lru_cache(maxsize=64)
def _flat_order(method, shape):
    n = int(np.prod(shape))
    if method == "lexicographic" or n <= 1:
        order = np.arange(n, dtype=np.int64)
    else:
        coords = np.indices(shape).reshape(len(shape), -1)
        if method == "zigzag":
            order = np.lexsort(tuple(coords[::-1]) + (coords.sum(axis=0),))
        else:
            bits = morton_bits(shape)
            key = np.zeros(n, dtype=object if len(shape) * bits > 63 else np.int64)
            for b in range(bits - 1, -1, -1):
                for c in coords:
                    key = key * 2 + ((c >> b) & 1)
            order = np.argsort(key, kind="stable")
        order = order.astype(np.int64)
    order.setflags(write=False)
    return order


def flat_order(method, shape):
    """Flat C-order offsets of the grid cells in traversal order (read-only, cached)."""
    return _flat_order(canonical_method(method), tuple(int(n) for n in shape))


def full_order(spec, shape):
    """All cells of ``shape`` as an ``(N, d)`` array of multi-indices in traversal order.

    ``shape`` is the grid being traversed, i.e. the core after its storage
    permutation.
    """
    shape = tuple(int(n) for n in shape)
    method = spec.method if isinstance(spec, VectorizationSpec) else spec
    flat = flat_order(method, shape)
    return np.stack(np.unravel_index(flat, shape), axis=1) if shape else flat[:, None]


def vectorize(core, spec):
    """Flatten ``core`` into traversal order after permuting it to ``spec.storage_order``."""
    spec = spec.resolve(core.shape)
    stored = transpose(core, spec.storage_order)
    return stored.reshape(-1)[flat_order(spec.method, stored.shape)]


def devectorize(vec, spec, core_shape):
    """Inverse of :func:`vectorize`."""
    spec = spec.resolve(core_shape)
    stored_shape = tuple(core_shape[p] for p in spec.storage_order)
    flat = np.empty(len(vec), dtype=np.asarray(vec).dtype)
    flat[flat_order(spec.method, stored_shape)] = vec
    return transpose(flat.reshape(stored_shape), inverse_permutation(spec.storage_order))
