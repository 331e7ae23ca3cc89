import warnings

import numpy as np
import pytest

from tuckerzip import compress, decompress
from tuckerzip.container import (DTYPES, ContainerError, Header, emit, ingest, read_container,
                                 read_raw, to_bytes, write_container)


def header():
    return Header("float32", (4, 5, 6), (2, 3, 1), (2, 0, 1), (1, 2, 0), vectorization=2,
                  coder=2, scale_exponent=-7, block_size=4096, rtmss=0.3, target_sse=1.5,
                  norm_sq=2.0, truncation_sse=0.25, core_sse=0.5, estimate_sse=0.9, split=False,
                  simple_weights=True)


def test_header_roundtrip():
    h = header()
    buf = write_container(h, b"core", [b"a", b"", b"xyz"])
    c = read_container(buf)
    assert c.header == h
    assert c.core == b"core" and c.factors == [b"a", b"", b"xyz"]
    assert h.original_bytes == 4 * 5 * 6 * 4


def test_damaged_files_name_the_problem():
    buf = write_container(header(), b"core", [b"a", b"bb", b"xyz"])
    with pytest.raises(ContainerError, match="magic"):
        read_container(b"NOPE" + buf[4:])
    with pytest.raises(ContainerError, match="factor 2"):
        read_container(buf[:-1])
    with pytest.raises(ContainerError, match="factor 2 section is missing"):
        read_container(buf[:-11])
    with pytest.raises(ContainerError, match="after the last"):
        read_container(buf + b"\0")
    with pytest.raises(ContainerError, match="header"):
        read_container(buf[:20])
    bad = bytearray(buf)
    bad[4] = 9
    with pytest.raises(ContainerError, match="version"):
        read_container(bytes(bad))


def test_raw_reading():
    a = np.arange(24, dtype=np.int16).reshape(2, 3, 4) - 7
    raw = b"hdr" + to_bytes(a)
    assert np.array_equal(read_raw(raw, "int16", (2, 3, 4), skip_bytes=3), a)
    assert ingest(raw, "int16", (2, 3, 4), 3).dtype == np.float64
    assert ingest(raw, "int16", (2, 3, 4), 3, precision="float32").dtype == np.float32
    with pytest.raises(ValueError, match="expected"):
        read_raw(raw, "int16", (2, 3, 4))
    with pytest.raises(ValueError):
        read_raw(raw, "complex64", (2,))


def test_big_int64_warns():
    with pytest.warns(RuntimeWarning):
        ingest(to_bytes(np.array([2 ** 60, 1], dtype=np.int64)), "int64", (2,))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ingest(to_bytes(np.array([2 ** 40], dtype=np.int64)), "int64", (1,))


def test_emit_rounds_and_clamps():
    assert emit([-3.0, 1.6, 300.0], "uint8").tolist() == [0, 2, 255]
    assert emit([1e30, -1e30], "int64").tolist() == [2 ** 63 - 1, -2 ** 63]
    assert emit([1e30], "uint64").tolist() == [2 ** 64 - 1]
    assert emit([1.25], "float32").dtype == np.float32


@pytest.mark.parametrize("dtype", sorted(DTYPES))
def test_all_types_roundtrip(dtype):
    x, y, z = np.meshgrid(*[np.linspace(0, 1, n) for n in (6, 7, 8)], indexing="ij")
    a = (40 + 30 * np.sin(3 * x) * np.cos(2 * y + z)).astype(dtype)
    buf = compress(a, target_re=1e-3).data
    out = decompress(buf)
    assert out.dtype == np.dtype(dtype) and out.shape == a.shape
    c = read_container(buf)
    assert c.header.dtype == dtype and c.header.mode_sizes == a.shape
    ref = a.astype(float)
    # integer output adds at most half a unit of rounding per element
    rounding = 0.5 * np.sqrt(a.size) if dtype.startswith(("int", "uint")) else 0.0
    assert np.linalg.norm(out.astype(float) - ref) <= 1.05e-3 * np.linalg.norm(ref) + rounding


def test_zero_tensor():
    buf = compress(np.zeros((3, 4, 5)), target_re=1e-2).data
    c = read_container(buf)
    assert c.header.zero
    assert np.array_equal(decompress(buf), np.zeros((3, 4, 5)))


def test_corrupt_payload_is_an_error():
    a = np.random.default_rng(1).standard_normal((10, 10, 10))
    buf = bytearray(compress(a, target_re=1e-2).data)
    with pytest.raises(ContainerError):
        decompress(bytes(buf[:-3]))
