"""Outage probability of OTFS modulation with finite blocklength.

Library surface in five layers: finite-blocklength formulas (``fbl``),
random delay-Doppler channels (``channel``), the effective channel matrix
and its log-det capacity (``ddmatrix``), per-path power allocation
(``power``), and Monte-Carlo sweeps (``sim``) driven by the ``cli``.
"""

from .errors import AllocationError, ConfigError, NumericalError
from .fbl import (
    FblPoint,
    achievable_rate,
    awgn_capacity,
    awgn_dispersion,
    parallel_capacity,
    parallel_dispersion,
    parallel_outage,
    q_function,
    q_inverse,
    scalar_outage,
    snr_vector,
)
from .channel import (
    ChannelConfig,
    OtfsGrid,
    TapSet,
    gain_power,
    sample_tap_batch,
    sample_tapset,
    tapset_from_text,
    tapset_to_text,
)
from .ddmatrix import (
    DdMatrix,
    build_h_dd,
    frame_capacity_bits,
    read_dd_matrix,
    theoretical_outage_indicator,
    write_dd_matrix,
)
from .power import (
    Allocation,
    PowerBudget,
    allocate_average,
    allocate_waterfilling,
    equivalent_noise,
    waterfill_snr_batch,
)
from .sim import (
    CHUNK_TRIALS,
    ESTIMATORS,
    SweepResult,
    SweepRow,
    SweepSpec,
    estimate_lower_bound,
    estimate_theoretical,
    point_seed,
    run_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "AllocationError",
    "ConfigError",
    "NumericalError",
    "FblPoint",
    "achievable_rate",
    "awgn_capacity",
    "awgn_dispersion",
    "parallel_capacity",
    "parallel_dispersion",
    "parallel_outage",
    "q_function",
    "q_inverse",
    "scalar_outage",
    "snr_vector",
    "ChannelConfig",
    "OtfsGrid",
    "TapSet",
    "gain_power",
    "sample_tap_batch",
    "sample_tapset",
    "tapset_from_text",
    "tapset_to_text",
    "DdMatrix",
    "build_h_dd",
    "frame_capacity_bits",
    "read_dd_matrix",
    "theoretical_outage_indicator",
    "write_dd_matrix",
    "Allocation",
    "PowerBudget",
    "allocate_average",
    "allocate_waterfilling",
    "equivalent_noise",
    "waterfill_snr_batch",
    "CHUNK_TRIALS",
    "ESTIMATORS",
    "SweepResult",
    "SweepRow",
    "SweepSpec",
    "estimate_lower_bound",
    "estimate_theoretical",
    "point_seed",
    "run_sweep",
    "__version__",
]
