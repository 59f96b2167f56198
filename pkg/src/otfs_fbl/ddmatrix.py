"""Effective delay-Doppler channel matrix and its log-det frame capacity.

Each path contributes gain * (F_N kron I_M) P^l D^s (F_N^H kron I_M), where
F_N is the unitary N-point DFT, P cyclically shifts the MN symbol indices
forward by one, and D^s is the diagonal phase ramp diag(a^(0s) .. a^((MN-1)s))
with a = exp(2j*pi/(MN)) and s the (possibly fractional) Doppler index. The
permutation and the diagonal are never materialized: P^l is an index roll,
D^s an elementwise scaling, and the left DFT a per-block FFT, so assembling
the dense MN x MN sum costs O(L*(MN)^2) instead of O(L*(MN)^3).
"""

import math
import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import dft
from scipy.linalg.blas import zherk

from .channel import OtfsGrid, TapSet
from .errors import ConfigError, NumericalError

__all__ = [
    "DdMatrix",
    "build_h_dd",
    "frame_capacity_bits",
    "theoretical_outage_indicator",
    "write_dd_matrix",
    "read_dd_matrix",
]

LOG2E = 1.0 / math.log(2.0)

_MAGIC = b"DDMX"


@dataclass(eq=False)
class DdMatrix:
    """Dense effective channel matrix for one realization on one grid."""

    entries: np.ndarray  # complex, (MN, MN)
    grid: OtfsGrid

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.complex128)
        mn = self.grid.frame_size
        if entries.shape != (mn, mn):
            raise ConfigError(
                f"entries must be {mn}x{mn} for this grid, got {entries.shape}"
            )
        self.entries = entries

    @property
    def frame_size(self) -> int:
        return self.grid.frame_size


@lru_cache(maxsize=8)
def _right_dft_factor(n: int, m: int) -> np.ndarray:
    """Dense F_N^H kron I_M. Cached per grid shape; treat as read-only."""
    f_n = dft(n) / math.sqrt(n)  # unitary forward DFT
    return np.kron(f_n.conj().T, np.eye(m))


def build_h_dd(taps: TapSet, grid: OtfsGrid) -> DdMatrix:
    """Assemble the effective channel matrix from one realization.

    Delays act as forward cyclic shifts of the symbol index, Doppler values
    as phase ramps at the frame's fundamental frequency; both are wrapped in
    the block-DFT pair that moves the result into the delay-Doppler domain.
    """
    m, n = grid.m, grid.n
    mn = grid.frame_size
    if np.any(taps.delays >= m):
        raise ConfigError(
            f"delay indices {taps.delays.tolist()} must all be < m = {m}"
        )
    base = _right_dft_factor(n, m)
    ramp_freq = 2j * np.pi / mn
    rows = np.arange(mn)
    accum = np.zeros((mn, mn), dtype=np.complex128)
    for h, delay, doppler in zip(taps.gains, taps.delays, taps.dopplers):
        term = np.exp(ramp_freq * doppler * rows)[:, None] * base
        term = np.roll(term, int(delay), axis=0)
        term = np.fft.fft(term.reshape(n, m, mn), axis=0, norm="ortho")
        accum += h * term.reshape(mn, mn)
    return DdMatrix(accum, grid)


def frame_capacity_bits(h: DdMatrix, es_n0: float) -> float:
    """log2 det(I + es_n0 * H^H H) in bits per frame.

    Computed through a Cholesky factorization of the Hermitian positive
    definite Gram matrix; the rank-k update fills only the lower triangle,
    which is all the factorization reads.
    """
    if not (es_n0 >= 0.0 and math.isfinite(es_n0)):
        raise ValueError(f"es_n0 must be finite and >= 0, got {es_n0!r}")
    if es_n0 == 0.0:
        return 0.0
    entries = h.entries
    gram = zherk(es_n0, entries, trans=2, lower=1)
    mn = h.frame_size
    idx = np.arange(mn)
    gram[idx, idx] += 1.0
    try:
        factor = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            "Cholesky factorization failed on I + gamma*H^H*H "
            f"(size {mn}, es_n0 = {es_n0!r}, ||H||_F^2 = "
            f"{float(np.linalg.norm(entries)) ** 2:.6g})"
        ) from exc
    cap = 2.0 * LOG2E * float(np.sum(np.log(factor.diagonal().real)))
    if not math.isfinite(cap):
        # zpotrf passes NaN entries through without setting an error flag
        raise NumericalError(
            f"non-finite log-det (size {mn}, es_n0 = {es_n0!r}); "
            "channel entries are likely not finite"
        )
    return cap if cap > 0.0 else 0.0


def theoretical_outage_indicator(h: DdMatrix, es_n0: float, k_bits: int) -> int:
    """1 iff the frame log-det capacity falls below k_bits information bits."""
    if int(k_bits) != k_bits or k_bits < 1:
        raise ValueError(f"k_bits must be a positive integer, got {k_bits!r}")
    return int(frame_capacity_bits(h, es_n0) < k_bits)


def write_dd_matrix(h: DdMatrix, path) -> None:
    """Binary dump for cross-validation: magic, u32 m, u32 n, complex64 rows.

    Header is b"DDMX" followed by little-endian uint32 m and n; entries follow
    row-major as complex64 (interleaved float32 re, im). Values are narrowed
    from the internal complex128, so the dump is a diagnostic artifact, not a
    lossless store.
    """
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", h.grid.m, h.grid.n))
        fh.write(np.ascontiguousarray(h.entries, dtype=np.complex64).tobytes())


def read_dd_matrix(path, grid: OtfsGrid) -> DdMatrix:
    """Read a ``write_dd_matrix`` dump; the grid must match the stored shape."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {_MAGIC!r}")
        m, n = struct.unpack("<II", fh.read(8))
        if (m, n) != (grid.m, grid.n):
            raise ConfigError(
                f"stored shape m={m}, n={n} does not match grid "
                f"m={grid.m}, n={grid.n}"
            )
        mn = m * n
        raw = fh.read(mn * mn * 8)
        entries = np.frombuffer(raw, dtype=np.complex64).reshape(mn, mn)
    return DdMatrix(entries.astype(np.complex128), grid)
