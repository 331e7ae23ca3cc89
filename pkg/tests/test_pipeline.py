import numpy as np
import pytest
from sklearn.base import clone

from corpus import load
from tuckerzip import TuckerCompressor, compress, decompress, decompress_float
from tuckerzip.container import read_container


def rel_err(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(a)


@pytest.mark.parametrize("target", [1e-1, 1e-2, 1e-3, 1e-5])
def test_hits_target(target):
    a = load("smooth")
    r = compress(a, target_re=target)
    out = decompress(r.data)
    assert rel_err(a, out) == pytest.approx(target, rel=0.05)


def test_target_sse_and_estimate():
    a = load("bumps")
    sse = 1e-4 * float(np.sum(a * a))
    r = compress(a, target_sse=sse, keep_reconstruction=True)
    out = decompress(r.data)
    measured = float(np.sum((out - a) ** 2))
    assert measured <= sse * 1.05
    assert r.estimate.total == pytest.approx(measured, rel=0.01)
    assert np.allclose(r.reconstruction, out, rtol=0, atol=1e-12 * np.abs(a).max())
    h = read_container(r.data).header
    assert h.estimate_sse == r.estimate.total


@pytest.mark.parametrize("options", [
    dict(vectorization="zigzag"), dict(vectorization="zorder", storage_order=(2, 1, 0)),
    dict(coder="rans"), dict(split_planes=False), dict(simple_factor_weights=True),
    dict(mode_order=(2, 0, 1)), dict(rtmss=0.9), dict(block_size=100, workers=3),
    dict(precision="float32")])
def test_options_roundtrip(options):
    a = load("mixed")
    r = compress(a, target_re=1e-2, **options)
    out, h = decompress_float(r.data)
    assert rel_err(a, out) == pytest.approx(1e-2, rel=0.05)
    if "mode_order" in options:
        assert h.compression_order == (2, 0, 1)


def test_decompress_dtype_override():
    a = load("smooth")
    r = compress(a, target_re=1e-2)
    assert decompress(r.data, dtype="float32").dtype == np.float32


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        compress(np.array([np.nan, 1.0]).reshape(1, 2), target_re=1e-2)
    with pytest.raises(ValueError):
        compress(np.ones((3, 3)), target_re=1e-2, target_sse=1.0)
    with pytest.raises(ValueError):
        compress(np.ones((3, 3)), target_re=-1e-3)
    # a zero target is allowed in the library and keeps every bit
    a = load("mixed")
    assert rel_err(a, decompress(compress(a, target_re=0.0).data)) < 1e-13


def test_estimator_api():
    a = load("lowrank_noise")
    est = TuckerCompressor(target_re=1e-2, coder="rans", n_threads=2)
    params = est.get_params()
    assert params["target_re"] == 1e-2 and params["rtmss"] == 0.5
    twin = clone(est)
    assert twin.get_params() == params
    out = est.fit_transform(a)
    assert out.shape == a.shape
    assert est.achieved_re_ == pytest.approx(rel_err(a, out))
    assert est.achieved_re_ == pytest.approx(1e-2, rel=0.05)
    assert est.compression_factor_ > 1
    assert np.array_equal(est.decompress(est.container_), out)
    assert est.compress(a) == est.container_
    est.set_params(target_re=1e-3)
    assert est.fit(a).achieved_re_ == pytest.approx(1e-3, rel=0.05)
    with pytest.raises(ValueError):
        est.transform(np.ones((2, 2)))


def test_estimator_validation():
    a = load("smooth")
    for bad in (dict(), dict(target_re=-1.0), dict(target_re=1e-2, rtmss=1.5),
                dict(target_re=1e-2, vectorization="hilbert"), dict(target_re=1e-2, coder="x"),
                dict(target_re=1e-2, factor_weights="odd"), dict(target_re=1e-2, n_threads=0),
                dict(target_re=1e-2, mode_order=(0, 0, 1))):
        with pytest.raises(ValueError):
            TuckerCompressor(**bad).fit(a)
    with pytest.raises(ValueError):
        TuckerCompressor(target_re=1e-2).fit(np.ones(5))
