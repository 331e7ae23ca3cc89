"""Error budget bookkeeping and SSE accumulation."""

from dataclasses import dataclass, replace

import numpy as np

DEFAULT_RTMSS = 0.5

# Rounding-error margin for the running quantization SSE: c * eps * m * S.
MARGIN_CONSTANT = 4.0
RECALIBRATION_TRIGGER = 0.1


@dataclass(frozen=True)
class ErrorBudget:
    target_sse_total: float
    rtmss: float
    realized_truncation_sse: float = 0.0

    @property
    def sthosvd_target(self):
        return self.rtmss * self.target_sse_total

    @property
    def core_quant_target_sse(self):
        return max(self.target_sse_total - self.realized_truncation_sse, 0.0)

    def with_truncation(self, truncation_sse):
        return replace(self, realized_truncation_sse=float(truncation_sse))


def make_budget(norm_sq, rtmss=DEFAULT_RTMSS, *, target_re=None, target_sse=None):
    """Build a budget from either a relative error or an absolute SSE target."""
    if (target_re is None) == (target_sse is None):
        raise ValueError("give exactly one of target_re and target_sse")
    if not 0.0 <= rtmss <= 1.0:
        raise ValueError(f"rtmss must lie in [0, 1], got {rtmss}")
    if target_sse is None:
        if target_re < 0:
            raise ValueError("target relative error must be nonnegative")
        target_sse = target_re * target_re * norm_sq
    if target_sse < 0:
        raise ValueError("target SSE must be nonnegative")
    return ErrorBudget(float(target_sse), float(rtmss))


@dataclass(frozen=True)
class ErrorEstimate:
    """Components of the approximate total SSE (cross terms dropped)."""

    truncation_sse: float
    core_quantization_sse: float
    factor_terms: tuple = ()

    @property
    def total(self):
        return self.truncation_sse + self.core_quantization_sse + float(sum(self.factor_terms))


def factor_term(delta_u, slice_norms):
    """``||dU diag(sigma)||_F^2`` for one mode."""
    delta_u = np.asarray(delta_u, dtype=np.float64)
    col = np.einsum("ij,ij->j", delta_u, delta_u)
    return float(np.dot(col, np.asarray(slice_norms, dtype=np.float64) ** 2))


def estimate_total_sse(e):
    if e.truncation_sse < 0 or e.core_quantization_sse < 0 or any(t < 0 for t in e.factor_terms):
        raise ValueError("error components must be nonnegative")
    return e.total


def backward_sum_sse(values):
    """Sum of squares accumulated naively from the last element to the first.

    Intended for sequences ordered roughly from large to small, where adding
    the small terms first keeps them from being absorbed.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        return 0.0
    # cumsum is a strictly sequential accumulation
    return float(np.cumsum((v * v)[::-1])[-1])


def recalibration_margin(terms_processed, magnitude, c=MARGIN_CONSTANT):
    """Conservative bound on the rounding error of a running sum.

    ``magnitude`` is the largest value the running sum held since it was last
    known exactly.
    """
    return c * np.finfo(np.float64).eps * terms_processed * magnitude


def exact_sum_of_squares(values):
    """Correctly rounded ``sum(x**2)`` for integers with ``|x| < 2**64``.

    Magnitudes are split into three 22-bit limbs so that every partial sum fits
    in a uint64; the limb sums are combined with Python integers.
    """
    v = np.asarray(values)
    if v.dtype.kind == "i":
        mag = np.abs(v.astype(np.int64)).view(np.uint64)
        mag = np.where(v == np.iinfo(np.int64).min, np.uint64(1 << 63), mag)
    else:
        mag = v.astype(np.uint64)
    mag = mag.ravel()
    total = 0
    chunk = 1 << 18
    mask = np.uint64((1 << 22) - 1)
    for start in range(0, mag.size, chunk):
        m = mag[start:start + chunk]
        limbs = [(m >> np.uint64(22 * i)) & mask for i in range(3)]
        for i in range(3):
            for j in range(i, 3):
                s = int(np.sum(limbs[i] * limbs[j], dtype=np.uint64))
                total += (s << (22 * (i + j))) * (1 if i == j else 2)
    return float(total)


def residuals(magnitudes, known_down_to):
    """Signed residual ``magnitude - dequantized`` per coefficient, as exact integers.

    ``known_down_to[i]`` is the lowest encoded plane of coefficient ``i`` (64
    when nothing is encoded). Significant coefficients are dequantized at the
    middle of their uncertainty interval; insignificant ones decode to zero.
    Returns ``(abs_residual uint64, negative bool)``.
    """
    m = np.asarray(magnitudes, dtype=np.uint64)
    low = np.asarray(known_down_to, dtype=np.int64)
    shift = np.minimum(low, 63).astype(np.uint64)
    sig = (low < 64) & ((m >> shift) != 0)
    lowbits = m & ((np.uint64(1) << shift) - np.uint64(1))
    half = np.where(low > 0, np.uint64(1) << (np.maximum(low, 1) - 1).astype(np.uint64), 0).astype(np.uint64)
    above = lowbits >= half
    diff = np.where(above, lowbits - half, half - lowbits)
    absres = np.where(sig, diff, m)
    negative = sig & ~above
    return absres, negative


def recalibrate_sse(magnitudes, known_down_to):
    """Exact quantization SSE of the current partially encoded state."""
    absres, _ = residuals(magnitudes, known_down_to)
    return exact_sum_of_squares(absres)


class SSETracker:
    """Running quantization SSE with margin-triggered exact recalibration."""

    def __init__(self, initial_sse, terms):
        self.sse = float(initial_sse)
        self.magnitude = float(initial_sse)
        self.terms = int(terms)
        self.recalibrations = 0

    @property
    def margin(self):
        return recalibration_margin(self.terms, self.magnitude)

    def needs_recalibration(self):
        return self.margin > RECALIBRATION_TRIGGER * self.sse

    def subtract(self, reduction, terms):
        self.sse -= float(reduction)
        self.terms += int(terms)

    def reset(self, exact_sse):
        self.sse = float(exact_sse)
        self.magnitude = float(exact_sse)
        self.terms = 0
        self.recalibrations += 1
