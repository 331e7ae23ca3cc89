import itertools

import numpy as np
import pytest

from tuckerzip.vectorize import (METHODS, VectorizationSpec, devectorize, full_order,
                                 iterate_positions, morton_decode, morton_encode, next_position,
                                 storage_order_heuristic, vectorize)

SHAPES = [(1, 1, 1), (2, 2), (2, 2, 2), (4, 4), (5, 7), (3, 5, 2), (6, 5, 4, 3), (1, 9),
          (7, 1, 3), (16, 16, 16), (3, 17, 9), (64, 64)]


def brute_zigzag(shape):
    cells = list(itertools.product(*map(range, shape)))
    return sorted(cells, key=lambda c: (sum(c), c))


def brute_zorder(shape):
    bits = max(1, max((n - 1).bit_length() for n in shape))

    def key(c):
        k = 0
        for b in range(bits - 1, -1, -1):
            for x in c:
                k = 2 * k + ((x >> b) & 1)
        return k
    return sorted(itertools.product(*map(range, shape)), key=key)


def test_storage_order_heuristic():
    assert storage_order_heuristic((5, 5, 5)) == (0, 1, 2)
    assert storage_order_heuristic((64, 8, 32)) == (1, 2, 0)
    assert storage_order_heuristic((100, 128, 128, 128)) == (0, 1, 2, 3)


def test_lexicographic_example():
    order = [tuple(c) for c in full_order("lexicographic", (2, 2, 2))]
    assert order[:4] == [(0, 0, 0), (0, 0, 1), (0, 1, 0), (0, 1, 1)]


def test_morton_example():
    assert morton_decode(0b101011, 3, 2) == (2, 1, 3)
    assert morton_encode((2, 1, 3), 2) == 43


def test_zigzag_2x2():
    assert [tuple(c) for c in full_order("zigzag", (2, 2))] == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_zigzag_layers_5x7():
    order = full_order("zigzag", (5, 7))
    sums = order.sum(axis=1)
    assert len(np.unique(sums)) == 11
    assert np.all(np.diff(sums) >= 0)


def test_zorder_4x4_is_morton():
    order = [morton_encode(tuple(c), 2) for c in full_order("zorder", (4, 4))]
    assert order == list(range(16))


@pytest.mark.parametrize("shape", [s for s in SHAPES if np.prod(s) <= 4096])
def test_orders_match_brute_force(shape):
    cells = list(itertools.product(*map(range, shape)))
    lex = [tuple(c) for c in full_order("lexicographic", shape)]
    assert lex == cells
    assert [tuple(c) for c in full_order("zigzag", shape)] == brute_zigzag(shape)
    assert [tuple(c) for c in full_order("zorder", shape)] == brute_zorder(shape)
    for method in METHODS:
        walked = list(iterate_positions(method, shape))
        assert walked == [tuple(c) for c in full_order(method, shape)]
        assert len(set(walked)) == len(cells)


def test_next_position_end_and_errors():
    assert next_position("zigzag", (1, 1), (2, 2)) is None
    assert next_position("zorder", (2, 2), (3, 3)) is None
    assert next_position("lex", (0, 1), (2, 2)) == (1, 0)
    with pytest.raises(ValueError):
        next_position("lexicographic", (2, 0), (2, 2))
    with pytest.raises(ValueError):
        next_position("hilbert", (0, 0), (2, 2))


def count_zorder_jumps(shape):
    """Out-of-grid skips taken while walking ``shape`` in Z-order."""
    import inspect
    import sys
    from tuckerzip import vectorize as vz
    code = vz._next_zorder.__code__
    lines, first = inspect.getsourcelines(vz._next_zorder)
    skip_line = first + next(i for i, ln in enumerate(lines) if "key = ((key >> jump)" in ln)
    jumps = 0

    def tracer(frame, event, arg):
        nonlocal jumps
        if frame.f_code is not code:
            return None
        if event == "line" and frame.f_lineno == skip_line:
            jumps += 1
        return tracer

    sys.settrace(tracer)
    try:
        cells = list(iterate_positions("zorder", shape))
    finally:
        sys.settrace(None)
    return jumps, len(cells)


@pytest.mark.parametrize("shape", [(33, 2), (17, 3), (5, 9, 65), (2, 2, 2, 129)])
def test_zorder_skips_are_amortized_constant(shape):
    # grids that waste most of their power-of-two bounding box still cost
    # about one skip per step on average
    jumps, cells = count_zorder_jumps(shape)
    assert cells == int(np.prod(shape))
    assert jumps / cells <= 2.0


@pytest.mark.parametrize("method", METHODS)
def test_vectorize_roundtrip(method):
    core = np.random.default_rng(0).standard_normal((3, 5, 2))
    spec = VectorizationSpec(method)
    v = vectorize(core, spec)
    assert v[0] == core[0, 0, 0]
    assert np.array_equal(devectorize(v, spec, core.shape), core)
    spec = VectorizationSpec(method, (1, 2, 0))
    assert np.array_equal(devectorize(vectorize(core, spec), spec, core.shape), core)
