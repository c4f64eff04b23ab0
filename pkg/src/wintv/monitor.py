"""Windowed noise-level estimation and variance-shift alerts."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .core import ContractError, WindowSamples
from .path import SelectorConfig
from .stream import StreamState, restore_current, slide_update

MAD_CONSISTENCY = 1.4826


@dataclass(frozen=True)
class MonitorRecord:
    window_start_index: int
    sigma_star: float
    lambda_used: float
    mad_sigma: float
    shift_alert: bool

    def as_row(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ShiftPolicy:
    baseline_sigma: float
    ratio_threshold: float = 1.2
    consecutive_windows: int = 5

    def __post_init__(self):
        if not self.baseline_sigma > 0:
            raise ContractError("baseline_sigma must be positive")
        if not self.ratio_threshold > 1:
            raise ContractError("ratio_threshold must exceed 1")
        if int(self.consecutive_windows) != self.consecutive_windows or self.consecutive_windows < 1:
            raise ContractError("consecutive_windows must be a positive integer")

    @property
    def limit(self) -> float:
        return self.ratio_threshold * self.baseline_sigma


def window_residual_sigma(w: WindowSamples, u_star) -> float:
    """Unweighted sample standard deviation of the residual ``y - u_star``."""
    u_star = np.asarray(u_star, dtype=float)
    if u_star.shape != w.y.shape:
        raise ContractError("u_star must match the window length")
    return residual_sigma(w.y - u_star)


def residual_sigma(r) -> float:
    r = np.asarray(r, dtype=float)
    if r.size < 2:
        raise ContractError("need at least 2 residuals")
    return float(np.sqrt(np.sum((r - r.mean()) ** 2) / (r.size - 1)))


def _median(x: np.ndarray) -> float:
    # mean of the two central order statistics for even sizes
    return float(np.median(x))


def mad_sigma(y) -> float:
    """Robust noise level from scaled first differences.

    ``1.4826 * median(|B - median(B)|)`` with ``B = sqrt(2) * diff(y)``.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size < 2:
        raise ContractError("mad_sigma needs at least 2 samples")
    B = np.sqrt(2.0) * np.diff(y)
    return MAD_CONSISTENCY * _median(np.abs(B - _median(B)))


def shift_alert(sigma_star: float, policy: ShiftPolicy, history: Sequence[MonitorRecord]) -> bool:
    """True when this and the preceding ``consecutive_windows - 1`` records exceed the limit."""
    need = policy.consecutive_windows - 1
    if not sigma_star > policy.limit:
        return False
    if len(history) < need:
        return False
    return all(r.sigma_star > policy.limit for r in history[len(history) - need :])


def monitor_step(
    state: StreamState,
    cfg: SelectorConfig,
    policy: Optional[ShiftPolicy],
    history: Sequence[MonitorRecord],
    window_start_index: int = 0,
) -> MonitorRecord:
    lam, seg = restore_current(state, cfg)
    sigma = window_residual_sigma(state.window, seg.to_signal())
    alert = shift_alert(sigma, policy, history) if policy is not None else False
    return MonitorRecord(window_start_index, sigma, lam, mad_sigma(state.window.y), alert)


def apply_policy(records: Iterable[MonitorRecord], policy: ShiftPolicy) -> list[MonitorRecord]:
    """Recompute alert flags of an existing record stream under ``policy``."""
    out: list[MonitorRecord] = []
    for r in records:
        out.append(
            MonitorRecord(r.window_start_index, r.sigma_star, r.lambda_used, r.mad_sigma,
                          shift_alert(r.sigma_star, policy, out))
        )
    return out


def calibrate_baseline(records: Sequence[MonitorRecord], warmup: int) -> float:
    """Median sigma_star over the first ``warmup`` windows."""
    if warmup < 1 or warmup > len(records):
        raise ContractError(f"warm-up of {warmup} windows needs at least that many records")
    return float(np.median([r.sigma_star for r in records[:warmup]]))


def iter_windows(
    y,
    t,
    m: int,
    cfg: SelectorConfig = SelectorConfig(),
    **state_kwargs,
) -> Iterator[tuple[StreamState, float, np.ndarray]]:
    """Slide a window of length ``m`` over the series.

    Yields ``(state, lambda, u_star)`` per window; ``state`` is live and
    mutated by the next step.
    """
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    n = y.size
    if m < 2:
        raise ContractError("window length must be at least 2")
    if n < m:
        raise ContractError(f"series of length {n} is shorter than the window ({m})")
    state = StreamState.from_samples(y[:m], t[:m], **state_kwargs)
    for i in range(n - m + 1):
        if i:
            slide_update(state, (y[i + m - 1], t[i + m - 1]))
        lam, seg = restore_current(state, cfg)
        yield state, lam, seg.to_signal()


def run_monitor(
    y,
    t,
    m: int,
    cfg: SelectorConfig = SelectorConfig(),
    baseline_sigma: Optional[float] = None,
    warmup: Optional[int] = None,
    ratio_threshold: float = 1.2,
    consecutive_windows: int = 5,
    **state_kwargs,
) -> tuple[list[MonitorRecord], Optional[ShiftPolicy]]:
    """Monitor every window of a series.

    The baseline is ``baseline_sigma`` when given, otherwise the warm-up
    median of sigma_star. Without either no alerts are raised.
    """
    raw = []
    for i, (state, lam, u) in enumerate(iter_windows(y, t, m, cfg, **state_kwargs)):
        raw.append(MonitorRecord(i, window_residual_sigma(state.window, u), lam,
                                 mad_sigma(state.window.y), False))
    if baseline_sigma is None and warmup is not None:
        baseline_sigma = calibrate_baseline(raw, warmup)
    if baseline_sigma is None or baseline_sigma <= 0:
        # a noiseless warm-up gives no usable baseline
        return raw, None
    policy = ShiftPolicy(baseline_sigma, ratio_threshold, consecutive_windows)
    return apply_policy(raw, policy), policy
