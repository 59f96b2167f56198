"""Per-path power allocation: average split and exact water-filling.

Water-filling uses the equivalent per-path noise eps_i = noise / |h_i|^2: the
water level lam solves sum_i max(lam - eps_i, 0) = total power. The level is
found exactly on the sorted piecewise-linear power curve, so budget
conservation holds to rounding error with no iteration tolerance.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import TapSet
from .errors import AllocationError

__all__ = [
    "PowerBudget",
    "Allocation",
    "equivalent_noise",
    "allocate_average",
    "allocate_waterfilling",
    "waterfill_snr_batch",
]

STRATEGIES = ("average", "water_filling")


@dataclass(frozen=True)
class PowerBudget:
    total_power: float  # W, linear
    noise_power: float  # sigma_0^2, linear

    def __post_init__(self):
        for name in ("total_power", "noise_power"):
            value = getattr(self, name)
            if not (value > 0.0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class Allocation:
    """Result of one allocation: per-path powers, per-path SNRs, strategy."""

    powers: np.ndarray            # (L,), non-negative, sums to the budget
    snrs: np.ndarray              # (L,), powers[i]*|h_i|^2/noise
    strategy: str
    water_level: Optional[float] = None  # lam, water_filling only

    def __post_init__(self):
        powers = np.asarray(self.powers, dtype=np.float64)
        snrs = np.asarray(self.snrs, dtype=np.float64)
        if powers.ndim != 1 or powers.shape != snrs.shape:
            raise ValueError("powers and snrs must be 1-D arrays of equal length")
        if np.any(powers < 0.0) or not np.all(np.isfinite(powers)):
            raise ValueError("powers must be finite and non-negative")
        if np.any(snrs < 0.0) or not np.all(np.isfinite(snrs)):
            raise ValueError("snrs must be finite and non-negative")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if (self.water_level is None) == (self.strategy == "water_filling"):
            raise ValueError("water_level must be present exactly for water_filling")
        object.__setattr__(self, "powers", powers)
        object.__setattr__(self, "snrs", snrs)

    @property
    def num_paths(self) -> int:
        return self.powers.size


def equivalent_noise(taps: TapSet, noise_power: float) -> np.ndarray:
    """Per-path equivalent noise noise/|h_i|^2; +inf for zero-gain paths."""
    if not (noise_power > 0.0 and math.isfinite(noise_power)):
        raise ValueError(f"noise_power must be positive, got {noise_power!r}")
    gain_sq = np.abs(taps.gains) ** 2
    with np.errstate(divide="ignore"):
        return np.where(gain_sq > 0.0, noise_power / gain_sq, np.inf)


def allocate_average(taps: TapSet, budget: PowerBudget) -> Allocation:
    """Split the budget evenly: every path gets W/L regardless of gain."""
    L = taps.num_paths
    powers = np.full(L, budget.total_power / L)
    snrs = powers * np.abs(taps.gains) ** 2 / budget.noise_power
    return Allocation(powers, snrs, "average")


def allocate_waterfilling(taps: TapSet, budget: PowerBudget) -> Allocation:
    """Pour the budget above the equivalent noise levels up to a common level.

    Sorting the levels makes the total-power curve piecewise linear in lam
    with breakpoints at the sorted eps; the active segment is solved in closed
    form. Zero-gain paths carry an infinite level and never receive power.
    """
    eps = equivalent_noise(taps, budget.noise_power)
    finite = np.isfinite(eps)
    if not finite.any():
        raise AllocationError("no usable path: every gain is zero")
    level = _exact_water_level(np.sort(eps[finite]), budget.total_power)
    powers = np.maximum(level - eps, 0.0)
    snrs = powers * np.abs(taps.gains) ** 2 / budget.noise_power
    return Allocation(powers, snrs, "water_filling", water_level=level)


def _exact_water_level(sorted_eps: np.ndarray, total_power: float) -> float:
    # candidate level if the first m channels are active; feasibility
    # (lam_m > eps_m) holds on a prefix, so the active count is the number
    # of feasible candidates
    m = np.arange(1, sorted_eps.size + 1)
    candidates = (total_power + np.cumsum(sorted_eps)) / m
    active = int(np.count_nonzero(candidates > sorted_eps))
    return float(candidates[active - 1])


def waterfill_snr_batch(gain_sq: np.ndarray, total_power: float, noise_power: float):
    """Vectorized water-filling SNRs for a (trials, L) block of gain powers.

    Returns (snrs, failed) where failed marks rows with no usable path; those
    rows are NaN in snrs and must be excluded by the caller.
    """
    gain_sq = np.asarray(gain_sq, dtype=np.float64)
    with np.errstate(divide="ignore"):
        eps = np.where(gain_sq > 0.0, noise_power / gain_sq, np.inf)
    sorted_eps = np.sort(eps, axis=1)
    m = np.arange(1, gain_sq.shape[1] + 1)
    with np.errstate(invalid="ignore"):
        candidates = (total_power + np.cumsum(sorted_eps, axis=1)) / m
        active = np.count_nonzero(candidates > sorted_eps, axis=1)
    failed = active == 0
    pick = (np.maximum(active, 1) - 1)[:, None]
    level = np.take_along_axis(candidates, pick, axis=1)
    with np.errstate(invalid="ignore"):
        powers = np.clip(level - eps, 0.0, None)
    snrs = powers * gain_sq / noise_power
    if failed.any():
        snrs[failed] = np.nan
    return snrs, failed
