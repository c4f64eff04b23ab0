"""Domain types and closed-form evaluations for weighted 1D TV denoising.

The restoration problem is

    F(u) = sum_i tau_i (y_i - u_i)**2 + lam * sum_i |u_{i+1} - u_i|

Indices are 0-based throughout: boundary ``b`` separates points ``b`` and
``b + 1`` so a window of ``m`` points has ``m - 1`` boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ContractError(ValueError):
    """Raised when an input violates a documented precondition."""


@dataclass(frozen=True)
class WindowSamples:
    """Values, timestamps and sampling periods of one window.

    ``tau[i] = t[i] - t[i-1]`` for ``i >= 1`` and ``tau[0] = tau[1]``.
    """

    y: np.ndarray
    t: np.ndarray
    tau: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        t = np.asarray(self.t, dtype=float)
        tau = np.asarray(self.tau, dtype=float)
        if y.ndim != 1 or y.shape != t.shape or y.shape != tau.shape:
            raise ContractError("y, t and tau must be 1D vectors of equal length")
        if y.size < 2:
            raise ContractError("a window needs at least 2 samples")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(t))):
            raise ContractError("y and t must be finite")
        if np.any(np.diff(t) <= 0):
            raise ContractError("timestamps must be strictly increasing")
        if np.any(tau <= 0):
            raise ContractError("sampling periods must be positive")
        for name, arr in (("y", y), ("t", t), ("tau", tau)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_timestamps(cls, y, t) -> "WindowSamples":
        t = np.asarray(t, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ContractError("a window needs at least 2 timestamps")
        return cls(y, t, periods_from_timestamps(t))

    @classmethod
    def uniform(cls, y, dt: float = 1.0) -> "WindowSamples":
        y = np.asarray(y, dtype=float)
        return cls.from_timestamps(y, dt * np.arange(y.size))

    @property
    def m(self) -> int:
        return self.y.size


def periods_from_timestamps(t) -> np.ndarray:
    """Sampling periods with the head convention ``tau[0] = tau[1]``."""
    t = np.asarray(t, dtype=float)
    tau = np.empty_like(t)
    tau[1:] = np.diff(t)
    tau[0] = tau[1]
    return tau


@dataclass(frozen=True)
class Segmentation:
    """Piecewise-constant restoration as segments.

    Attributes
    ----------
    cut_boundaries : ndarray of int
        Sorted boundaries separating consecutive segments.
    levels : ndarray
        Segment levels ``v`` (length K).
    lengths : ndarray
        Summed sampling periods per segment (length K).
    signs : ndarray of int
        ``s[0] = s[K] = 0`` and ``s[j] = sign(v[j] - v[j-1])`` in between
        (length K + 1).
    m : int
        Number of samples covered.
    """

    cut_boundaries: np.ndarray
    levels: np.ndarray
    lengths: np.ndarray
    signs: np.ndarray
    m: int

    @property
    def n_segments(self) -> int:
        return self.levels.size

    @property
    def starts(self) -> np.ndarray:
        return np.concatenate(([0], self.cut_boundaries + 1))

    @property
    def stops(self) -> np.ndarray:
        """Exclusive end index of each segment."""
        return np.concatenate((self.cut_boundaries + 1, [self.m]))

    @property
    def counts(self) -> np.ndarray:
        return self.stops - self.starts

    def segment_ids(self) -> np.ndarray:
        """Segment index of every sample."""
        return np.repeat(np.arange(self.n_segments), self.counts)

    def to_signal(self) -> np.ndarray:
        return np.repeat(self.levels, self.counts)


@dataclass(frozen=True)
class MergePath:
    """Merge value and extremum-count drop of every boundary.

    ``lambdas[b]`` is the smallest lambda at which points ``b`` and ``b+1``
    share a segment. ``g_drops[b]`` is the change ``g_before - g_after`` of
    the merge event that joined them.
    """

    lambdas: np.ndarray
    g_drops: np.ndarray = field(default=None)

    def __post_init__(self):
        lambdas = np.asarray(self.lambdas, dtype=float)
        if self.g_drops is None:
            g_drops = np.zeros(lambdas.size, dtype=np.int64)
        else:
            g_drops = np.asarray(self.g_drops, dtype=np.int64)
        if g_drops.shape != lambdas.shape:
            raise ContractError("lambdas and g_drops must have equal length")
        object.__setattr__(self, "lambdas", lambdas)
        object.__setattr__(self, "g_drops", g_drops)

    @property
    def event_order(self) -> np.ndarray:
        """Boundaries sorted by merge value, ties by ascending boundary."""
        return np.lexsort((np.arange(self.lambdas.size), self.lambdas))

    @property
    def max_lambda(self) -> float:
        return float(self.lambdas.max()) if self.lambdas.size else 0.0


def evaluate_functional(w: WindowSamples, u, lam: float) -> float:
    u = np.asarray(u, dtype=float)
    if u.shape != w.y.shape:
        raise ContractError(f"u has length {u.size}, window has {w.m}")
    if lam < 0:
        raise ContractError("lambda must be nonnegative")
    data = np.sum(w.tau * (w.y - u) ** 2)
    return float(data + lam * np.sum(np.abs(np.diff(u))))


def _as_sign_vector(signs, n_segments: int) -> np.ndarray:
    signs = np.asarray(signs, dtype=np.int64)
    if signs.size != n_segments + 1:
        raise ContractError(f"expected {n_segments + 1} signs, got {signs.size}")
    if signs[0] != 0 or signs[-1] != 0:
        raise ContractError("end signs must be zero")
    return signs


def _check_boundaries(boundaries, m: int) -> np.ndarray:
    b = np.asarray(boundaries, dtype=np.int64).reshape(-1)
    if b.size and (b[0] < 0 or b[-1] > m - 2 or np.any(np.diff(b) <= 0)):
        raise ContractError("boundaries must be sorted, unique and within [0, m-2]")
    return b


def segment_sums(values, weights, starts) -> tuple[np.ndarray, np.ndarray]:
    """Weighted sum and total weight per segment."""
    total = np.add.reduceat(weights, starts)
    weighted = np.add.reduceat(weights * values, starts)
    return weighted, total


def segment_means(values, weights, starts) -> tuple[np.ndarray, np.ndarray]:
    """Weighted mean and total weight per segment.

    Segments whose values are all equal get that value exactly, so
    ``lam = 0`` reproduces the data bit for bit.
    """
    weighted, total = segment_sums(values, weights, starts)
    mean = weighted / total
    lo = np.minimum.reduceat(values, starts)
    flat = lo == np.maximum.reduceat(values, starts)
    mean[flat] = lo[flat]
    return mean, total


def segment_levels(w: WindowSamples, boundaries, signs, lam: float) -> np.ndarray:
    """Segment levels ``ybar_j + lam / (2 T_j) (s_j - s_{j-1})``.

    ``ybar_j`` is the tau-weighted mean of the segment and ``T_j`` its
    summed sampling period.
    """
    b = _check_boundaries(boundaries, w.m)
    signs = _as_sign_vector(signs, b.size + 1)
    starts = np.concatenate(([0], b + 1))
    mean, total = segment_means(w.y, w.tau, starts)
    return mean + lam * (signs[1:] - signs[:-1]) / (2.0 * total)


def jump_signs(y, boundaries) -> np.ndarray:
    """Sign vector of a segmentation read from the raw data.

    The level gap across a cut keeps the sign of ``y[b+1] - y[b]`` for every
    lambda below its merge value, so no level comparison is needed.
    """
    y = np.asarray(y, dtype=float)
    b = np.asarray(boundaries, dtype=np.int64)
    inner = np.sign(y[b + 1] - y[b]).astype(np.int64)
    return np.concatenate(([0], inner, [0]))


def segmentation_from_cuts(y, tau, cuts, lam: float) -> Segmentation:
    """Build the restoration at ``lam`` from a known cut set."""
    y = np.asarray(y, dtype=float)
    tau = np.asarray(tau, dtype=float)
    cuts = np.asarray(cuts, dtype=np.int64)
    starts = np.concatenate(([0], cuts + 1))
    signs = jump_signs(y, cuts)
    mean, total = segment_means(y, tau, starts)
    levels = mean + lam * (signs[1:] - signs[:-1]) / (2.0 * total)
    return Segmentation(cuts, levels, total, signs, y.size)


def solution_at_lambda(w: WindowSamples, path: MergePath, lam: float) -> Segmentation:
    """Exact minimiser of the TV functional at ``lam`` read off the path.

    Boundaries whose merge value exceeds ``lam`` are cuts.
    """
    if path.lambdas.size != w.m - 1:
        raise ContractError("path does not match window length")
    if lam < 0:
        raise ContractError("lambda must be nonnegative")
    cuts = np.flatnonzero(path.lambdas > lam)
    return segmentation_from_cuts(w.y, w.tau, cuts, lam)


def extremum_count_of_levels(levels) -> int:
    """Number of strict interior peaks and valleys of a level sequence."""
    d = np.sign(np.diff(np.asarray(levels, dtype=float)))
    if d.size < 2:
        return 0
    return int(np.count_nonzero((d[:-1] * d[1:]) < 0))


def extremum_count(seg: Segmentation) -> int:
    # signs already hold sign(v[j] - v[j-1]) for every junction
    s = seg.signs[1:-1]
    if s.size < 2:
        return 0
    return int(np.count_nonzero((s[:-1] * s[1:]) < 0))
