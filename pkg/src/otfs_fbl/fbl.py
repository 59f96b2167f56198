"""Finite-blocklength formulas for scalar and parallel AWGN channels.

Normal-approximation machinery: Gaussian Q-function and its inverse, AWGN
capacity and dispersion per real channel use, the achievable rate at a target
block error probability, and the resulting outage probability.

A channel with L complex paths of SNRs a_1..a_L is treated as 2L real
subchannels, two per path, each carrying the per-path SNR. Under that
convention the parallel capacity reduces to sum(log2(1 + a_j)) over complex
paths and the parallel dispersion to twice the sum of per-path real-channel
dispersions. This function family is the single place that expansion lives.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

__all__ = [
    "LOG2E",
    "FblPoint",
    "q_function",
    "q_inverse",
    "awgn_capacity",
    "awgn_dispersion",
    "achievable_rate",
    "scalar_outage",
    "parallel_capacity",
    "parallel_dispersion",
    "parallel_outage",
    "snr_vector",
]

# log2(e) from the platform natural-log constant, never a truncated literal.
LOG2E = 1.0 / math.log(2.0)

_SQRT2 = math.sqrt(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def q_function(x):
    """Gaussian tail probability Q(x) = P[N(0,1) > x].

    Computed as 0.5 * erfc(x / sqrt(2)); erfc covers the far tails with its
    own asymptotic branch, so no separate large-|x| fallback is needed.
    Accepts a scalar or an array; non-finite input raises ValueError.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("q_function requires finite input")
    out = 0.5 * erfc(arr / _SQRT2)
    if arr.ndim == 0:
        return float(out)
    return out


def _log_q(x):
    """log Q(x) for scalar x, stable in the deep right tail."""
    q = 0.5 * erfc(x / _SQRT2)
    if q > 0.0:
        return math.log(q)
    # Beyond erfc underflow (~x > 38.6): leading-order asymptotic expansion.
    return -0.5 * x * x - math.log(x * _SQRT_2PI)


def q_inverse(p: float) -> float:
    """Inverse Q-function: the x with Q(x) = p, for p in (0, 1).

    Safeguarded Newton iteration on log Q(x) = log p, with a bisection
    prepass to bracket the root. The log form keeps the iteration stable
    for p at the double-precision floor.
    """
    p = float(p)
    if not (0.0 < p < 1.0):
        raise ValueError(f"q_inverse requires 0 < p < 1, got {p!r}")
    if p == 0.5:
        return 0.0
    if p > 0.5:
        # reflect into the well-conditioned tail; 1 - p is exact here
        return -q_inverse(1.0 - p)
    target = math.log(p)
    lo, hi = 0.0, 40.0
    for _ in range(25):
        mid = 0.5 * (lo + hi)
        g = _log_q(mid) - target
        if g == 0.0:
            return mid
        if g > 0.0:
            lo = mid
        else:
            hi = mid
    # the root is localized to ~1e-6; finish with plain Newton, which the
    # smooth monotone log Q makes quadratic from here. Roundoff can place
    # the root a few ulps outside the bracket, so no re-bracketing.
    x = 0.5 * (lo + hi)
    x_best, g_best = x, math.inf
    for _ in range(12):
        g = _log_q(x) - target
        if abs(g) < g_best:
            x_best, g_best = x, abs(g)
        if g == 0.0:
            return x
        # d/dx log Q = -phi(x)/Q(x); in the far tail phi/Q ~ x.
        q = 0.5 * erfc(x / _SQRT2)
        phi = math.exp(-0.5 * x * x) / _SQRT_2PI
        slope = -(phi / q) if q > 0.0 else -x
        x_new = x - g / slope
        if abs(x_new - x) <= 1e-13 * (1.0 + abs(x_new)):
            return x_new
        x = x_new
    return x_best


def awgn_capacity(gamma: float) -> float:
    """Capacity of the real AWGN channel, 0.5 * log2(1 + gamma) bits per use."""
    gamma = _check_snr(gamma)
    return 0.5 * math.log1p(gamma) * LOG2E


def awgn_dispersion(gamma: float) -> float:
    """Dispersion of the real AWGN channel in bits^2 per use.

    V(gamma) = gamma * (2 + gamma) * log2(e)^2 / (2 * (1 + gamma)^2),
    zero at gamma = 0 and approaching log2(e)^2 / 2 as gamma grows. Clamped
    at that supremum, which roundoff can otherwise overshoot by an ulp.
    """
    gamma = _check_snr(gamma)
    raw = gamma * (2.0 + gamma) * LOG2E * LOG2E / (2.0 * (1.0 + gamma) ** 2)
    return min(raw, 0.5 * LOG2E * LOG2E)


def achievable_rate(gamma: float, blocklength: int, epsilon: float) -> float:
    """Normal-approximation coding rate C - sqrt(V/n) * Qinv(epsilon).

    The O(log n / n) refinement is dropped; the approximation is tight for
    blocklengths above roughly one hundred. The result can go negative for
    tiny blocklengths and strict error targets and is returned as-is.
    """
    n = _check_blocklength(blocklength)
    if not (0.0 < epsilon < 1.0):
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    c = awgn_capacity(gamma)
    v = awgn_dispersion(gamma)
    return c - math.sqrt(v / n) * q_inverse(epsilon)


def scalar_outage(gamma: float, blocklength: int, rate: float) -> float:
    """Outage probability Q(sqrt(n/V) * (C - rate)) on one real AWGN channel."""
    return FblPoint.for_scalar(gamma, blocklength, rate).outage()


def snr_vector(values) -> np.ndarray:
    """Validate a per-path SNR vector: 1-D, non-empty, finite, non-negative."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("SNR vector must be one-dimensional and non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError("SNR vector must be finite")
    if np.any(arr < 0.0):
        raise ValueError("SNR vector must be non-negative")
    return arr


def parallel_capacity(snrs) -> float:
    """Capacity of L complex parallel paths: sum of log2(1 + a_j) bits per use."""
    arr = snr_vector(snrs)
    return float(np.sum(np.log1p(arr)) * LOG2E)


def parallel_dispersion(snrs) -> float:
    """Dispersion of L complex parallel paths in bits^2 per use.

    Equals log2(e)^2 * sum(a * (2 + a) / (1 + a)^2), i.e. twice the scalar
    dispersion summed over paths under the two-real-subchannels convention.
    """
    arr = snr_vector(snrs)
    ratio = np.minimum(arr * (2.0 + arr) / (1.0 + arr) ** 2, 1.0)
    return float(LOG2E * LOG2E * np.sum(ratio))


def parallel_outage(snrs, blocklength: int, coding_rate: float) -> float:
    """Outage probability over parallel paths at coding rate R_c bits per use."""
    return FblPoint.for_parallel(snrs, blocklength, coding_rate).outage()


@dataclass(frozen=True)
class FblPoint:
    """One normal-approximation operating point: (C, V, n, R).

    ``outage()`` applies the shared degenerate convention: with zero
    dispersion the channel is deterministic and outage is the 0/1 indicator
    of C < R, the limit of Q at plus or minus infinity.
    """

    capacity: float
    dispersion: float
    blocklength: int
    rate: float

    def __post_init__(self):
        if self.blocklength < 1:
            raise ValueError("blocklength must be >= 1")
        for name in ("capacity", "dispersion"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0.0:
                raise ValueError(f"{name} must be finite and non-negative")
        # rate may be negative: the normal approximation dips below zero for
        # small blocklengths and strict error targets, and the round trip
        # through the outage formula must still hold there
        if not math.isfinite(self.rate):
            raise ValueError("rate must be finite")
        if (self.dispersion == 0.0) != (self.capacity == 0.0):
            raise ValueError("dispersion vanishes exactly when capacity does")

    @classmethod
    def for_scalar(cls, gamma, blocklength, rate):
        n = _check_blocklength(blocklength)
        return cls(awgn_capacity(gamma), awgn_dispersion(gamma), n, float(rate))

    @classmethod
    def for_parallel(cls, snrs, blocklength, rate):
        n = _check_blocklength(blocklength)
        return cls(parallel_capacity(snrs), parallel_dispersion(snrs), n, float(rate))

    def outage(self) -> float:
        if self.dispersion == 0.0:
            return 0.0 if self.capacity >= self.rate else 1.0
        arg = math.sqrt(self.blocklength / self.dispersion) * (self.capacity - self.rate)
        return q_function(arg)


def _check_snr(gamma) -> float:
    gamma = float(gamma)
    if not math.isfinite(gamma) or gamma < 0.0:
        raise ValueError(f"SNR must be finite and non-negative, got {gamma!r}")
    return gamma


def _check_blocklength(n) -> int:
    if int(n) != n or n < 1:
        raise ValueError(f"blocklength must be a positive integer, got {n!r}")
    return int(n)
