"""Random delay-Doppler channel realizations.

A realization is a set of L resolvable paths, each with a complex gain, an
integer delay index and a real Doppler index. Gains are complex Gaussian with
per-component mean mu and variance 1/(2L), so with mu = 0 the magnitudes are
Rayleigh and the total expected gain power is 1 regardless of L. Doppler
indices follow the classic Jakes model: nu_max * cos(theta) with theta
uniform, expressed directly in index units as k_max * cos(theta) and split
into an integer tap plus a fractional offset in (-1/2, 1/2].
"""

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

__all__ = [
    "OtfsGrid",
    "ChannelConfig",
    "TapSet",
    "sample_tapset",
    "sample_tap_batch",
    "gain_power",
    "doppler_split",
    "tapset_to_text",
    "tapset_from_text",
]


@dataclass(frozen=True)
class OtfsGrid:
    """Static frame geometry of the delay-Doppler grid."""

    m: int                       # delay bins per slot (symbols per time slot)
    n: int                       # time slots per frame (Doppler bins)
    delta_f_hz: float            # subcarrier spacing
    carrier_hz: float            # carrier frequency f_c
    slot_duration_s: float = None  # T; defaults to 1/delta_f

    def __post_init__(self):
        problems = []
        if int(self.m) != self.m or self.m < 2:
            problems.append(f"m must be an integer >= 2, got {self.m!r}")
        if int(self.n) != self.n or self.n < 2:
            problems.append(f"n must be an integer >= 2, got {self.n!r}")
        if not (self.delta_f_hz > 0.0 and math.isfinite(self.delta_f_hz)):
            problems.append(f"delta_f_hz must be positive, got {self.delta_f_hz!r}")
        if not (self.carrier_hz > 0.0 and math.isfinite(self.carrier_hz)):
            problems.append(f"carrier_hz must be positive, got {self.carrier_hz!r}")
        if problems:
            raise ConfigError("; ".join(problems), problems)
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "n", int(self.n))
        if self.slot_duration_s is None:
            object.__setattr__(self, "slot_duration_s", 1.0 / self.delta_f_hz)
        elif abs(self.slot_duration_s * self.delta_f_hz - 1.0) > 1e-9:
            raise ConfigError(
                "slot_duration_s must equal 1/delta_f_hz "
                f"(got T*delta_f = {self.slot_duration_s * self.delta_f_hz})"
            )

    @property
    def frame_size(self) -> int:
        """Symbols per frame, M*N; also the default blocklength."""
        return self.m * self.n

    @property
    def frame_duration_s(self) -> float:
        return self.n * self.slot_duration_s

    @property
    def delay_resolution_s(self) -> float:
        return self.slot_duration_s / self.m

    @property
    def doppler_resolution_hz(self) -> float:
        return 1.0 / (self.n * self.slot_duration_s)


@dataclass(frozen=True)
class ChannelConfig:
    """Statistical model for one channel: path count, spreads, gain mean."""

    grid: OtfsGrid
    num_paths: int               # L, resolvable paths
    max_delay_index: int         # l_max; delays drawn from {0..l_max}
    max_doppler_index: int       # k_max; Doppler index magnitude bound
    tap_mean: float = 0.0        # mu of each Gaussian gain component
    fractional_doppler: bool = True
    zero_delay_first: bool = True  # force a line-of-sight path at delay 0

    def __post_init__(self):
        problems = []
        if int(self.num_paths) != self.num_paths or self.num_paths < 1:
            problems.append(f"num_paths must be a positive integer, got {self.num_paths!r}")
        if int(self.max_delay_index) != self.max_delay_index or self.max_delay_index < 0:
            problems.append(f"max_delay_index must be a non-negative integer, got {self.max_delay_index!r}")
        if int(self.max_doppler_index) != self.max_doppler_index or self.max_doppler_index < 0:
            problems.append(f"max_doppler_index must be a non-negative integer, got {self.max_doppler_index!r}")
        if not math.isfinite(self.tap_mean):
            problems.append(f"tap_mean must be finite, got {self.tap_mean!r}")
        if not problems:
            if self.num_paths > self.max_delay_index + 1:
                problems.append(
                    f"num_paths = {self.num_paths} exceeds the {self.max_delay_index + 1} "
                    "distinct delay indices available"
                )
            if self.max_delay_index >= self.grid.m:
                problems.append(
                    f"max_delay_index = {self.max_delay_index} must be < m = {self.grid.m}"
                )
            if self.max_doppler_index > self.grid.n / 2:
                problems.append(
                    f"max_doppler_index = {self.max_doppler_index} must be <= n/2 = {self.grid.n / 2}"
                )
        if problems:
            raise ConfigError("; ".join(problems), problems)
        object.__setattr__(self, "num_paths", int(self.num_paths))
        object.__setattr__(self, "max_delay_index", int(self.max_delay_index))
        object.__setattr__(self, "max_doppler_index", int(self.max_doppler_index))

    @property
    def component_std(self) -> float:
        """Per-component gain standard deviation, sqrt(1/(2L))."""
        return math.sqrt(1.0 / (2.0 * self.num_paths))


@dataclass(frozen=True)
class TapSet:
    """One channel realization: per-path gains, delays and Doppler indices."""

    gains: np.ndarray = field(repr=False)     # complex, shape (L,)
    delays: np.ndarray = field(repr=False)    # int, shape (L,), distinct
    dopplers: np.ndarray = field(repr=False)  # float, shape (L,), k + kappa

    def __post_init__(self):
        gains = np.asarray(self.gains, dtype=np.complex128)
        delays = np.asarray(self.delays)
        dopplers = np.asarray(self.dopplers, dtype=np.float64)
        if not (gains.ndim == delays.ndim == dopplers.ndim == 1):
            raise ConfigError("tap fields must be one-dimensional")
        if not (gains.size == delays.size == dopplers.size) or gains.size == 0:
            raise ConfigError("gains, delays, dopplers must share a positive length")
        if not np.issubdtype(delays.dtype, np.integer):
            if not np.all(delays == np.floor(delays)):
                raise ConfigError("delay indices must be integers")
        delays = delays.astype(np.int64)
        if np.any(delays < 0):
            raise ConfigError("delay indices must be non-negative")
        if np.unique(delays).size != delays.size:
            raise ConfigError("delay indices must be distinct")
        if not (np.all(np.isfinite(gains)) and np.all(np.isfinite(dopplers))):
            raise ConfigError("gains and dopplers must be finite")
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "delays", delays)
        object.__setattr__(self, "dopplers", dopplers)

    @property
    def num_paths(self) -> int:
        return self.gains.size


def sample_tap_batch(cfg: ChannelConfig, rng: np.random.Generator, count: int):
    """Draw ``count`` independent realizations as (gains, delays, dopplers).

    Arrays have shape (count, L). Gains, delays and Doppler indices are drawn
    mutually independently, in that fixed order, so a given generator state
    always produces the same batch. Delays are a uniform distinct sample from
    {0..l_max}, with path 0 pinned to delay 0 when ``zero_delay_first``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    L = cfg.num_paths
    components = rng.normal(cfg.tap_mean, cfg.component_std, size=(count, L, 2))
    gains = components[..., 0] + 1j * components[..., 1]

    theta = rng.uniform(0.0, 2.0 * np.pi, size=(count, L))
    index_value = cfg.max_doppler_index * np.cos(theta)
    if cfg.fractional_doppler:
        dopplers = index_value
    else:
        dopplers = np.ceil(index_value - 0.5)

    if cfg.zero_delay_first:
        perm = np.argsort(rng.random((count, cfg.max_delay_index)), axis=1)
        delays = np.concatenate(
            [np.zeros((count, 1), dtype=np.int64), perm[:, : L - 1] + 1], axis=1
        )
    else:
        perm = np.argsort(rng.random((count, cfg.max_delay_index + 1)), axis=1)
        delays = perm[:, :L].astype(np.int64)
    return gains, delays, dopplers


def sample_tapset(cfg: ChannelConfig, rng: np.random.Generator) -> TapSet:
    """Draw a single channel realization."""
    gains, delays, dopplers = sample_tap_batch(cfg, rng, 1)
    return TapSet(gains[0], delays[0], dopplers[0])


def gain_power(taps: TapSet) -> float:
    """Total gain power sum(|h_i|^2); expectation 1 under the mu = 0 model."""
    return float(np.sum(np.abs(taps.gains) ** 2))


def doppler_split(dopplers):
    """Split Doppler index values into integer taps and fractions in (-1/2, 1/2]."""
    values = np.asarray(dopplers, dtype=float)
    integral = np.ceil(values - 0.5)
    return integral.astype(np.int64), values - integral


def tapset_to_text(taps: TapSet) -> str:
    """Serialize one path per line as ``re(h) im(h) delay doppler``.

    Floats use %.17g so parsing the text reproduces the arrays bit-exactly.
    """
    out = io.StringIO()
    for h, l, k in zip(taps.gains, taps.delays, taps.dopplers):
        out.write(f"{h.real:.17g} {h.imag:.17g} {l:d} {k:.17g}\n")
    return out.getvalue()


def tapset_from_text(text: str) -> TapSet:
    """Parse the ``tapset_to_text`` format back into a TapSet."""
    gains, delays, dopplers = [], [], []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"line {line_no}: expected 4 fields, got {len(parts)}")
        re, im, delay, doppler = parts
        gains.append(complex(float(re), float(im)))
        delays.append(int(delay))
        dopplers.append(float(doppler))
    if not gains:
        raise ValueError("no tap records found")
    return TapSet(np.array(gains), np.array(delays), np.array(dopplers))
