"""Scikit-learn style wrapper around the compression pipeline."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import pipeline
from ._validation import (canonical_method, check_array, check_block_size, check_coder,
                          check_factor_weights, check_order, check_precision, check_rtmss,
                          check_targets, check_workers)
from .container import emit
from .errormodel import DEFAULT_RTMSS
from .tensor import sse_between


class TuckerCompressor(TransformerMixin, BaseEstimator):
    """Lossy compressor for dense tensors with a prescribed error.

    ``fit`` compresses the tensor and keeps the container bytes in
    ``container_``; ``transform`` returns the decompressed approximation of
    the fitted tensor, so ``fit_transform`` gives the lossy round trip.

    Parameters
    ----------
    target_re, target_sse : float
        Give one: relative Euclidean error or absolute sum of squared errors.
    rtmss : float
        Share of the error budget granted to rank truncation.
    mode_order, storage_order : sequence of int or None
        Mode processing order and core storage order (heuristics if None).
    vectorization : {"lexicographic", "zigzag", "zorder"}
    coder : {"ac", "rans"}
    split_planes : bool
        Separate last-plane breakpoints for leading and trailing bits.
    factor_weights : {"alpha", "simple"}
    n_threads : int
    block_size : int or None
    precision : {"float64", "float32"}
    """

    def __init__(self, target_re=None, target_sse=None, rtmss=DEFAULT_RTMSS, mode_order=None,
                 storage_order=None, vectorization="lexicographic", coder="ac",
                 split_planes=True, factor_weights="alpha", n_threads=1, block_size=None,
                 precision="float64"):
        self.target_re = target_re
        self.target_sse = target_sse
        self.rtmss = rtmss
        self.mode_order = mode_order
        self.storage_order = storage_order
        self.vectorization = vectorization
        self.coder = coder
        self.split_planes = split_planes
        self.factor_weights = factor_weights
        self.n_threads = n_threads
        self.block_size = block_size
        self.precision = precision

    def _options(self, d):
        target_re, target_sse = check_targets(self.target_re, self.target_sse)
        return dict(
            target_re=target_re, target_sse=target_sse, rtmss=check_rtmss(self.rtmss),
            mode_order=check_order(self.mode_order, d, "mode_order"),
            storage_order=check_order(self.storage_order, d, "storage_order"),
            vectorization=canonical_method(self.vectorization), coder=check_coder(self.coder),
            split_planes=bool(self.split_planes),
            simple_factor_weights=check_factor_weights(self.factor_weights) == "simple",
            workers=check_workers(self.n_threads), block_size=check_block_size(self.block_size),
            precision=check_precision(self.precision))

    def fit(self, X, y=None):
        a = check_array(X)
        result = pipeline.compress(a, keep_reconstruction=True, **self._options(a.ndim))
        self.container_ = result.data
        self.ranks_ = result.ranks
        self.estimate_ = result.estimate
        self.timings_ = result.timings
        self.dtype_ = a.dtype
        self.shape_ = a.shape
        self.compression_factor_ = result.compression_factor
        recon = emit(result.reconstruction, a.dtype)
        self.achieved_sse_ = sse_between(a, recon)
        norm = float(np.sum(np.asarray(a, dtype=np.float64) ** 2))
        self.achieved_re_ = np.sqrt(self.achieved_sse_ / norm) if norm > 0 else 0.0
        return self

    def transform(self, X=None):
        """Decompressed approximation of the fitted tensor.

        ``X`` is accepted for pipeline compatibility; it must match the
        fitted shape.
        """
        check_is_fitted(self, "container_")
        if X is not None and np.shape(X) != self.shape_:
            raise ValueError(f"expected shape {self.shape_}, got {np.shape(X)}")
        return pipeline.decompress(self.container_, check_workers(self.n_threads))

    def compress(self, X):
        """Fit and return the container bytes."""
        return self.fit(X).container_

    def decompress(self, data):
        return pipeline.decompress(data, check_workers(self.n_threads))
