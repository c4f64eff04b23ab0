"""Sliding-window total-variation restoration and noise-level monitoring.

Typical use::

    import wintv
    w = wintv.WindowSamples.from_timestamps(y, t)
    path = wintv.compute_merge_path(w)
    lam = wintv.select_lambda(path, w)
    u = wintv.solution_at_lambda(w, path, lam).to_signal()
"""

from .core import (
    ContractError,
    MergePath,
    Segmentation,
    WindowSamples,
    evaluate_functional,
    extremum_count,
    extremum_count_of_levels,
    periods_from_timestamps,
    segment_levels,
    solution_at_lambda,
)
from .monitor import (
    MonitorRecord,
    ShiftPolicy,
    calibrate_baseline,
    mad_sigma,
    run_monitor,
    shift_alert,
    window_residual_sigma,
)
from .path import (
    MergeEvent,
    SelectorConfig,
    compute_merge_path,
    g_curve,
    merge_events,
    select_lambda,
)
from .sim import (
    ExperimentConfig,
    ExperimentReport,
    NoiseModel,
    UndefinedRVEError,
    generate_signal,
    mean_bias,
    reference_sigma,
    run_bench,
    run_experiment,
    rve_score,
)
from .stream import (
    CorruptedStateError,
    IsolationBounds,
    RejectedSampleError,
    StreamState,
    build_virtual_segment,
    find_isolation_bounds,
    restore_current,
    slide_update,
    virtual_segment_lambdas,
)

__version__ = "0.1.0"

__all__ = [
    "ContractError",
    "CorruptedStateError",
    "ExperimentConfig",
    "ExperimentReport",
    "IsolationBounds",
    "MergeEvent",
    "MergePath",
    "MonitorRecord",
    "NoiseModel",
    "RejectedSampleError",
    "Segmentation",
    "SelectorConfig",
    "ShiftPolicy",
    "StreamState",
    "UndefinedRVEError",
    "WindowSamples",
    "build_virtual_segment",
    "calibrate_baseline",
    "compute_merge_path",
    "evaluate_functional",
    "extremum_count",
    "extremum_count_of_levels",
    "find_isolation_bounds",
    "g_curve",
    "generate_signal",
    "mad_sigma",
    "mean_bias",
    "merge_events",
    "periods_from_timestamps",
    "reference_sigma",
    "restore_current",
    "run_bench",
    "run_experiment",
    "run_monitor",
    "rve_score",
    "segment_levels",
    "select_lambda",
    "shift_alert",
    "slide_update",
    "solution_at_lambda",
    "virtual_segment_lambdas",
    "window_residual_sigma",
]
