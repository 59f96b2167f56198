"""Monte-Carlo outage estimation over sweeps of SNR, path count and rate.

Three estimators share one sampling scheme:

* ``theoretical`` draws channel realizations, builds the effective matrix and
  averages the indicator {frame log-det capacity < k bits} with a Wilson CI.
* ``lower_avg`` and ``lower_wat`` treat the paths as parallel AWGN channels
  under average or water-filling power allocation and average the
  per-realization normal-approximation outage (a conditional probability, not
  an indicator) with a normal CI of the mean.

Determinism contract: every sweep point owns a seed derived from
(base_seed, estimator id, path count, rate key, SNR index). Trials are drawn
in fixed chunks of ``CHUNK_TRIALS``; chunk c uses the generator seeded by
(point seed, c) and always draws a full chunk before truncation. Results are
therefore a pure function of the spec, independent of execution order and
thread count, and any single row can be reproduced from its own seed column.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Optional

import numpy as np
from scipy.special import erfc

from .channel import ChannelConfig, OtfsGrid, sample_tap_batch, TapSet
from .ddmatrix import build_h_dd, theoretical_outage_indicator
from .errors import AllocationError, ConfigError, NumericalError
from .power import waterfill_snr_batch

__all__ = [
    "ESTIMATORS",
    "CHUNK_TRIALS",
    "SweepSpec",
    "SweepRow",
    "SweepResult",
    "point_seed",
    "estimate_lower_bound",
    "estimate_theoretical",
    "run_sweep",
]

LOG2E = 1.0 / math.log(2.0)
Z_95 = 1.959963984540054          # two-sided 95% normal quantile
ESTIMATORS = ("lower_avg", "lower_wat", "theoretical")
CHUNK_TRIALS = 4096               # fixed RNG chunk; do not change, seeds depend on it
_EST_ID = {"theoretical": 0, "lower_avg": 1, "lower_wat": 2}
_STRATEGY_TO_ESTIMATOR = {"average": "lower_avg", "water_filling": "lower_wat"}

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class SweepSpec:
    """Full description of one sweep; validation collects every violation."""

    grid: OtfsGrid
    path_counts: tuple                  # L values to sweep
    coding_rates: tuple                 # R_c values in (0, 1)
    es_n0_grid_db: tuple                # sweep axis, dB
    trials: int = 100_000
    theoretical_trials: Optional[int] = None  # defaults to trials
    base_seed: int = 2024
    estimators: tuple = ("lower_avg", "lower_wat")
    max_delay_index: int = 8
    max_doppler_index: int = 4
    tap_mean: float = 0.0
    fractional_doppler: bool = True
    zero_delay_first: bool = True
    blocklength: Optional[int] = None   # bounds only; theoretical always uses M*N
    total_power_model: str = "total"    # "total": W = Es/N0; "per_path": W = L*Es/N0

    def __post_init__(self):
        problems = []
        object.__setattr__(self, "path_counts", _canonical(self.path_counts, int, "path_counts", problems))
        object.__setattr__(self, "coding_rates", _canonical(self.coding_rates, float, "coding_rates", problems))
        object.__setattr__(self, "es_n0_grid_db", _canonical(self.es_n0_grid_db, float, "es_n0_grid_db", problems))
        for rc in self.coding_rates:
            if not 0.0 < rc < 1.0:
                problems.append(f"coding_rates: {rc!r} outside (0, 1)")
            elif round(rc * self.grid.frame_size) < 1:
                problems.append(f"coding_rates: {rc!r} maps to zero information bits on this grid")
        for db in self.es_n0_grid_db:
            if not math.isfinite(db):
                problems.append(f"es_n0_grid_db: {db!r} not finite")
        if int(self.trials) != self.trials or self.trials < 1:
            problems.append(f"trials must be a positive integer, got {self.trials!r}")
        if self.theoretical_trials is not None and (
            int(self.theoretical_trials) != self.theoretical_trials or self.theoretical_trials < 1
        ):
            problems.append(f"theoretical_trials must be a positive integer, got {self.theoretical_trials!r}")
        if int(self.base_seed) != self.base_seed or not 0 <= self.base_seed < 2**64:
            problems.append(f"base_seed must be an integer in [0, 2^64), got {self.base_seed!r}")
        bad_est = [e for e in self.estimators if e not in ESTIMATORS]
        if bad_est or not self.estimators:
            problems.append(f"estimators must be a non-empty subset of {ESTIMATORS}, got {tuple(self.estimators)!r}")
        else:
            object.__setattr__(self, "estimators", tuple(sorted(set(self.estimators))))
        if self.blocklength is not None and (int(self.blocklength) != self.blocklength or self.blocklength < 1):
            problems.append(f"blocklength must be a positive integer, got {self.blocklength!r}")
        if self.total_power_model not in ("total", "per_path"):
            problems.append(f"total_power_model must be 'total' or 'per_path', got {self.total_power_model!r}")
        for L in self.path_counts:
            try:
                self.channel_for(int(L))
            except ConfigError as exc:
                problems.extend(f"path_counts: L={L}: {v}" for v in exc.violations)
            except (TypeError, ValueError) as exc:
                problems.append(f"path_counts: L={L}: {exc}")
        if problems:
            raise ConfigError("; ".join(problems), problems)

    def channel_for(self, path_count: int) -> ChannelConfig:
        """Channel statistics with the swept path count filled in."""
        return ChannelConfig(
            grid=self.grid,
            num_paths=path_count,
            max_delay_index=self.max_delay_index,
            max_doppler_index=self.max_doppler_index,
            tap_mean=self.tap_mean,
            fractional_doppler=self.fractional_doppler,
            zero_delay_first=self.zero_delay_first,
        )

    @property
    def bound_blocklength(self) -> int:
        return self.blocklength if self.blocklength is not None else self.grid.frame_size


def _canonical(values, cast, name, problems):
    try:
        items = list(values)
    except TypeError:
        problems.append(f"{name} must be a sequence, got {values!r}")
        return ()
    out = []
    clean = True
    for v in items:
        try:
            c = cast(v)
        except (TypeError, ValueError):
            problems.append(f"{name}: cannot read {v!r} as {cast.__name__}")
            clean = False
            continue
        if cast is int and c != v:
            problems.append(f"{name}: {v!r} is not an integer")
            clean = False
            continue
        out.append(c)
    if not clean:
        return ()
    out = tuple(sorted(out))
    if not out:
        problems.append(f"{name} must be non-empty")
    elif len(set(out)) != len(out):
        problems.append(f"{name} contains duplicates: {values!r}")
    return out


@dataclass(frozen=True)
class SweepRow:
    estimator: str
    path_count: int
    coding_rate: float
    es_n0_db: float
    outage: float
    trials: int
    ci_low: float
    ci_high: float
    seed: int                 # per-point seed; reproduces the row on its own
    failed_trials: int = 0
    below_resolution: bool = False  # no outage mass seen; read as < 1/trials


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    spec: SweepSpec

    def select(self, estimator=None, path_count=None, coding_rate=None):
        """Rows matching the given coordinates, in canonical order."""
        out = []
        for row in self.rows:
            if estimator is not None and row.estimator != estimator:
                continue
            if path_count is not None and row.path_count != path_count:
                continue
            if coding_rate is not None and not math.isclose(row.coding_rate, coding_rate):
                continue
            out.append(row)
        return out


def point_seed(base_seed: int, estimator: str, path_count: int,
               coding_rate: float, es_n0_index: int) -> int:
    """Stable per-point seed; the CSV seed column holds exactly this value."""
    key = (base_seed, _EST_ID[estimator], path_count,
           int(round(coding_rate * 1e12)), es_n0_index)
    return int(np.random.SeedSequence(key).generate_state(1, dtype=np.uint64)[0])


def _chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, chunk_index)))


def _es_n0_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def _normal_approx_outage_batch(snrs, blocklength, rate):
    """Per-row Q(sqrt(n/V)(C - R)) with the V = 0 indicator convention.

    NaN rows (failed allocations) stay NaN for the caller to mask.
    """
    with np.errstate(invalid="ignore", divide="ignore"):
        capacity = np.sum(np.log1p(snrs), axis=1) * LOG2E
        ratio = np.minimum(snrs * (2.0 + snrs) / (1.0 + snrs) ** 2, 1.0)
        dispersion = LOG2E * LOG2E * np.sum(ratio, axis=1)
        arg = np.sqrt(blocklength / dispersion) * (capacity - rate)
        q = 0.5 * erfc(arg / _SQRT2)
        degenerate = dispersion == 0.0
        if np.any(degenerate):
            q = np.where(degenerate, (capacity < rate).astype(float), q)
    return q


def _check_point_args(coding_rate, es_n0_db, trials, seed):
    if not 0.0 < coding_rate < 1.0:
        raise ConfigError(f"coding_rate must be in (0, 1), got {coding_rate!r}")
    if not math.isfinite(es_n0_db):
        raise ConfigError(f"es_n0_db must be finite, got {es_n0_db!r}")
    if int(trials) != trials or trials < 1:
        raise ConfigError(f"trials must be a positive integer, got {trials!r}")
    if int(seed) != seed or seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")


def estimate_lower_bound(cfg: ChannelConfig, coding_rate: float, es_n0_db: float,
                         strategy: str, trials: int, seed: int, *,
                         blocklength: Optional[int] = None,
                         total_power_model: str = "total",
                         sampler=None) -> SweepRow:
    """Parallel-channel outage bound at one sweep point.

    Averages the per-realization conditional outage probability, so arbitrarily
    small estimates remain resolvable; the CI is the normal interval of the
    sample mean. Realizations where allocation fails (no usable path) are
    counted in failed_trials and excluded from the mean.
    """
    if strategy not in _STRATEGY_TO_ESTIMATOR:
        raise ConfigError(f"strategy must be 'average' or 'water_filling', got {strategy!r}")
    _check_point_args(coding_rate, es_n0_db, trials, seed)
    sampler = sampler or sample_tap_batch
    n = blocklength if blocklength is not None else cfg.grid.frame_size
    gamma = _es_n0_linear(es_n0_db)
    L = cfg.num_paths
    total_power = gamma * L if total_power_model == "per_path" else gamma
    noise_power = 1.0

    sum_q = 0.0
    sum_q2 = 0.0
    n_ok = 0
    failed = 0
    for chunk in range(-(-trials // CHUNK_TRIALS)):
        rng = _chunk_rng(seed, chunk)
        gains, _, _ = sampler(cfg, rng, CHUNK_TRIALS)
        take = min(CHUNK_TRIALS, trials - chunk * CHUNK_TRIALS)
        gain_sq = np.abs(gains[:take]) ** 2
        if strategy == "average":
            snrs = total_power * gain_sq / (L * noise_power)
            bad = None
        else:
            snrs, bad = waterfill_snr_batch(gain_sq, total_power, noise_power)
        q = _normal_approx_outage_batch(snrs, n, coding_rate)
        if bad is not None and bad.any():
            failed += int(bad.sum())
            q = q[~bad]
        sum_q += float(np.sum(q))
        sum_q2 += float(np.sum(q * q))
        n_ok += q.size
    if n_ok == 0:
        raise AllocationError("every trial failed allocation; nothing to average")

    mean = sum_q / n_ok
    if n_ok > 1:
        var = max(0.0, (sum_q2 - n_ok * mean * mean) / (n_ok - 1))
    else:
        var = 0.0
    half = Z_95 * math.sqrt(var / n_ok)
    return SweepRow(
        estimator=_STRATEGY_TO_ESTIMATOR[strategy],
        path_count=L,
        coding_rate=coding_rate,
        es_n0_db=es_n0_db,
        outage=mean,
        trials=int(trials),
        ci_low=max(0.0, mean - half),
        ci_high=min(1.0, mean + half),
        seed=int(seed),
        failed_trials=failed,
        below_resolution=sum_q == 0.0,
    )


def estimate_theoretical(cfg: ChannelConfig, coding_rate: float, es_n0_db: float,
                         trials: int, seed: int, *, sampler=None) -> SweepRow:
    """Indicator-mean estimate of the log-det outage at one sweep point.

    k = round(R_c * M * N) information bits per frame. Numerical failures are
    recorded per trial; the run aborts once they exceed 0.1% of trials.
    """
    _check_point_args(coding_rate, es_n0_db, trials, seed)
    sampler = sampler or sample_tap_batch
    grid = cfg.grid
    k_bits = int(round(coding_rate * grid.frame_size))
    if k_bits < 1:
        raise ConfigError(
            f"coding_rate {coding_rate!r} maps to zero information bits on this grid"
        )
    gamma = _es_n0_linear(es_n0_db)
    max_failures = 0.001 * trials

    successes = 0
    n_ok = 0
    failed = 0
    for chunk in range(-(-trials // CHUNK_TRIALS)):
        rng = _chunk_rng(seed, chunk)
        gains, delays, dopplers = sampler(cfg, rng, CHUNK_TRIALS)
        take = min(CHUNK_TRIALS, trials - chunk * CHUNK_TRIALS)
        for i in range(take):
            taps = TapSet(gains[i], delays[i], dopplers[i])
            try:
                h = build_h_dd(taps, grid)
                successes += theoretical_outage_indicator(h, gamma, k_bits)
            except NumericalError:
                failed += 1
                if failed > max_failures:
                    raise NumericalError(
                        f"{failed} of {trials} trials failed numerically "
                        "(threshold 0.1%); aborting the sweep point"
                    ) from None
                continue
            n_ok += 1
    p_hat = successes / n_ok if n_ok else 0.0
    ci_low, ci_high = _wilson_interval(successes, n_ok)
    return SweepRow(
        estimator="theoretical",
        path_count=cfg.num_paths,
        coding_rate=coding_rate,
        es_n0_db=es_n0_db,
        outage=p_hat,
        trials=int(trials),
        ci_low=ci_low,
        ci_high=ci_high,
        seed=int(seed),
        failed_trials=failed,
        below_resolution=successes == 0,
    )


def _wilson_interval(successes: int, n: int):
    if n == 0:
        return 0.0, 1.0
    p = successes / n
    z2 = Z_95 * Z_95
    denom = 1.0 + z2 / n
    center = (p + z2 / (2.0 * n)) / denom
    half = Z_95 * math.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom
    # at the boundary counts center and half agree analytically; pin the
    # limit so roundoff cannot open a spurious gap at 0 or 1
    low = 0.0 if successes == 0 else max(0.0, center - half)
    high = 1.0 if successes == n else min(1.0, center + half)
    return low, high


def _run_point(spec: SweepSpec, point):
    estimator, L, rc, idx = point
    db = spec.es_n0_grid_db[idx]
    cfg = spec.channel_for(L)
    seed = point_seed(spec.base_seed, estimator, L, rc, idx)
    if estimator == "theoretical":
        trials = spec.theoretical_trials if spec.theoretical_trials is not None else spec.trials
        return estimate_theoretical(cfg, rc, db, trials, seed)
    strategy = "average" if estimator == "lower_avg" else "water_filling"
    return estimate_lower_bound(
        cfg, rc, db, strategy, spec.trials, seed,
        blocklength=spec.blocklength, total_power_model=spec.total_power_model,
    )


def run_sweep(spec: SweepSpec, threads: int = 1) -> SweepResult:
    """Evaluate every requested estimator on the full parameter grid.

    Rows come back sorted by (estimator, path count, rate, SNR); the output
    is a pure function of the spec, whatever the thread count.
    """
    if int(threads) != threads or threads < 1:
        raise ConfigError(f"threads must be a positive integer, got {threads!r}")
    points = [
        (estimator, L, rc, idx)
        for estimator in spec.estimators
        for L in spec.path_counts
        for rc in spec.coding_rates
        for idx in range(len(spec.es_n0_grid_db))
    ]
    worker = partial(_run_point, spec)
    if threads == 1:
        rows = [worker(p) for p in points]
    else:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            rows = list(pool.map(worker, points))
    rows.sort(key=lambda r: (r.estimator, r.path_count, r.coding_rate, r.es_n0_db))
    return SweepResult(tuple(rows), spec)
