"""Argument checks shared by the estimator, the pipeline front end and the CLI."""

import numbers

import numpy as np

from .container import DTYPES
from .entropy import CODERS
from .vectorize import canonical_method


def check_targets(target_re=None, target_sse=None):
    """Exactly one positive target; returns ``(target_re, target_sse)``."""
    if (target_re is None) == (target_sse is None):
        raise ValueError("specify exactly one of target_re and target_sse")
    value, name = (target_re, "target_re") if target_sse is None else (target_sse, "target_sse")
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be a finite nonnegative number, got {value!r}")
    return target_re, target_sse


def check_rtmss(rtmss):
    if not isinstance(rtmss, numbers.Real) or not 0.0 <= rtmss <= 1.0:
        raise ValueError(f"rtmss must lie in [0, 1], got {rtmss!r}")
    return float(rtmss)


def check_workers(n):
    if n is None:
        return 1
    if not isinstance(n, numbers.Integral) or n < 1:
        raise ValueError(f"n_threads must be a positive integer, got {n!r}")
    return int(n)


def check_block_size(n):
    if n is None:
        return None
    if not isinstance(n, numbers.Integral) or n < 1:
        raise ValueError(f"block_size must be a positive integer, got {n!r}")
    return int(n)


def check_order(order, d, name):
    if order is None:
        return None
    order = tuple(int(p) for p in order)
    if sorted(order) != list(range(d)):
        raise ValueError(f"{name} {order} is not a permutation of the {d} modes")
    return order


def check_coder(coder):
    if coder not in CODERS:
        raise ValueError(f"coder must be one of {sorted(CODERS)}, got {coder!r}")
    return coder


def check_precision(precision):
    if precision not in ("float64", "float32"):
        raise ValueError(f"precision must be 'float64' or 'float32', got {precision!r}")
    return precision


def check_factor_weights(weights):
    if weights not in ("alpha", "simple"):
        raise ValueError(f"factor_weights must be 'alpha' or 'simple', got {weights!r}")
    return weights


def check_array(x):
    """Input tensor of a supported dtype, order >= 2, finite."""
    a = np.asarray(x)
    if a.dtype == bool or a.dtype.name not in DTYPES:
        a = a.astype(np.float64)
    if a.ndim < 2:
        raise ValueError(f"expected a tensor with at least 2 modes, got shape {a.shape}")
    if a.size == 0:
        raise ValueError("tensor is empty")
    if a.dtype.kind == "f" and not np.all(np.isfinite(a)):
        raise ValueError("tensor contains NaN or infinite values")
    return a


__all__ = ["canonical_method", "check_array", "check_block_size", "check_coder",
           "check_factor_weights", "check_order", "check_precision", "check_rtmss",
           "check_targets", "check_workers"]
