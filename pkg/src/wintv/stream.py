"""Sliding-window maintenance of the merge path.

A slide removes the oldest sample and appends a new one. At the cutting
point ``lambda_hat`` the restoration only changes near the two window ends;
merges below ``lambda_hat`` inside the untouched middle are copied, the two
ends are recomputed on small padded sub-problems and the merges above
``lambda_hat`` come from the path of the segment levels.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    ContractError,
    MergePath,
    Segmentation,
    WindowSamples,
    periods_from_timestamps,
    segmentation_from_cuts,
    solution_at_lambda,
)
from .path import SelectorConfig, compute_merge_path, merge_path_arrays, select_lambda

log = logging.getLogger(__name__)

CUTTING_POLICIES = ("previous", "fixed", "quantile")


class RejectedSampleError(ValueError):
    """The incoming sample cannot be appended (non-increasing timestamp)."""


class CorruptedStateError(RuntimeError):
    """An update produced non-finite values; the state was left untouched."""


@dataclass(frozen=True)
class IsolationBounds:
    """Extent of the window parts a slide can change.

    ``p`` is the last index of the non left-isolated prefix and ``l`` the
    first index of the non right-isolated suffix (old-window indices).
    ``j_p`` and ``j_l`` are the matching segment indices. Either side is
    ``None`` when no junction satisfies the sign condition.
    """

    p: Optional[int]
    l: Optional[int]
    j_p: Optional[int]
    j_l: Optional[int]


def find_isolation_bounds(seg: Segmentation, y_removed: float, y_new: float) -> IsolationBounds:
    v = seg.levels
    K = v.size
    starts = seg.starts
    # sign(v[j-1] - v[j]) for j = 1..K-1
    down = -seg.signs[1:-1]

    l = j_l = None
    target = np.sign(v[-1] - y_new)
    if target != 0 and K > 1:
        hits = np.flatnonzero(down == target)
        if hits.size:
            j_l = int(hits[-1]) + 1
            l = int(starts[j_l])

    p = j_p = None
    target = np.sign(v[0] - y_removed)
    if target != 0 and K > 1:
        hits = np.flatnonzero(down == target)
        if hits.size:
            j_p = int(hits[0]) + 1
            p = int(starts[j_p + 1]) - 1 if j_p + 1 < K else seg.m - 1
    return IsolationBounds(p, l, j_p, j_l)


def _sentinel(level: float, lam_hat: float, eps: float, sign: int) -> float:
    if sign == 0:
        raise ContractError("virtual segment needs a nonzero junction sign")
    return level + (lam_hat + eps) / (2.0 * sign)


def build_virtual_segment(
    w: WindowSamples, seg: Segmentation, j: int, lambda_hat: float, eps: float
) -> tuple[np.ndarray, np.ndarray]:
    """Samples of segment ``j`` padded with sentinel points of unit period.

    The sentinels stand in for the neighbouring segments: the left one sits
    at ``v_j - c_{j-1}`` and the right one at ``v_j + c_j`` with
    ``c_i = (lambda_hat + eps) / (2 s_i)``. The first segment has no left
    sentinel and the last none on the right.
    """
    if eps <= 0:
        raise ContractError("eps must be positive")
    K = seg.n_segments
    if not 0 <= j < K:
        raise ContractError(f"segment {j} out of range")
    a, b = seg.starts[j], seg.stops[j]
    ys = [w.y[a:b]]
    taus = [w.tau[a:b]]
    v = seg.levels[j]
    if j > 0:
        ys.insert(0, [_sentinel(v, lambda_hat, eps, -int(seg.signs[j]))])
        taus.insert(0, [1.0])
    if j < K - 1:
        ys.append([_sentinel(v, lambda_hat, eps, int(seg.signs[j + 1]))])
        taus.append([1.0])
    return np.concatenate(ys), np.concatenate(taus)


def virtual_segment_lambdas(w: WindowSamples, path: MergePath, lambda_hat: float, eps: float) -> np.ndarray:
    """Union of the trimmed virtual-segment sub-paths at ``lambda_hat``.

    Equals the multiset of merge values not exceeding ``lambda_hat``.
    """
    seg = solution_at_lambda(w, path, lambda_hat)
    K = seg.n_segments
    parts = []
    for j in range(K):
        yv, tv = build_virtual_segment(w, seg, j, lambda_hat, eps)
        if yv.size < 2:
            continue
        lam, _, _ = merge_path_arrays(yv, tv)
        lo = 1 if j > 0 else 0
        hi = lam.size - 1 if j < K - 1 else lam.size
        parts.append(lam[lo:hi])
    return np.concatenate(parts) if parts else np.empty(0)


@dataclass
class StreamState:
    """Current window and its merge path, updated in place by slides."""

    window: WindowSamples
    path: MergePath
    cutting_point: float = 0.0
    selected_lambda: float = 0.0
    epsilon_lambda: Optional[float] = None
    policy: str = "quantile"
    fixed_cutting_point: float = 0.0
    quantile: float = 0.8
    last_update: str = "init"
    last_bounds: Optional[IsolationBounds] = None
    last_rewritten: int = 0
    stats: dict = field(default_factory=lambda: {"incremental": 0, "offline": 0})

    def __post_init__(self):
        if self.policy not in CUTTING_POLICIES:
            raise ContractError(f"unknown cutting policy {self.policy!r}")
        if self.epsilon_lambda is not None and self.epsilon_lambda <= 0:
            raise ContractError("epsilon_lambda must be positive")

    @classmethod
    def from_samples(cls, y, t, **kwargs) -> "StreamState":
        w = WindowSamples.from_timestamps(y, t)
        return cls(w, compute_merge_path(w), **kwargs)

    @property
    def m(self) -> int:
        return self.window.m

    def eps_for(self, lam_hat: float) -> float:
        if self.epsilon_lambda is not None:
            return self.epsilon_lambda
        return max(1e-9, 1e-9 * lam_hat)

    def next_cutting_point(self) -> float:
        if self.policy == "fixed":
            return self.fixed_cutting_point
        if self.policy == "quantile":
            return _off_event(self.path.lambdas, float(np.quantile(self.path.lambdas, self.quantile)))
        return _off_event(self.path.lambdas, self.selected_lambda)


def _off_event(lambdas: np.ndarray, lam: float) -> float:
    """Midpoint between ``lam`` and the next larger merge value.

    The selected lambda is itself a merge value, which would leave the cut
    set at the cutting point up to rounding.
    """
    above = lambdas[lambdas > lam * (1 + 1e-9) + 1e-12]
    return 0.5 * (lam + float(above.min())) if above.size else lam


def _ill_conditioned(lambdas: np.ndarray, lam_hat: float) -> bool:
    return bool(np.any(np.abs(lambdas - lam_hat) <= 1e-9 * (1.0 + lam_hat)))


def _certify_prefix(lam_sub, y_sub, tau_sub, lam_hat, sign, neighbour_level):
    """Check a padded prefix sub-problem reproduces a valid junction.

    The sentinel must still be separate at ``lam_hat`` with the expected
    jump sign, and the recomputed last level must stay on the prefix side of
    the untouched neighbour. Then the spliced restoration satisfies the
    optimality conditions and is exact.
    """
    if not lam_sub[-1] > lam_hat:
        return False
    if np.sign(y_sub[-1] - y_sub[-2]) != sign:
        return False
    seg = segmentation_from_cuts(y_sub, tau_sub, np.flatnonzero(lam_sub > lam_hat), lam_hat)
    return sign * (neighbour_level - seg.levels[-2]) > 0


def _certify_suffix(lam_sub, y_sub, tau_sub, lam_hat, sign, neighbour_level):
    if not lam_sub[0] > lam_hat:
        return False
    if np.sign(y_sub[1] - y_sub[0]) != sign:
        return False
    seg = segmentation_from_cuts(y_sub, tau_sub, np.flatnonzero(lam_sub > lam_hat), lam_hat)
    return sign * (seg.levels[1] - neighbour_level) > 0


def _incremental_path(state: StreamState, new_w: WindowSamples, lam_hat: float,
                      y_removed: float, y_new: float):
    """Spliced path of the slid window.

    Returns ``(path, bounds, rewritten)``; ``path`` is ``None`` when a
    fallback to the offline computation is needed.
    """
    if not lam_hat > 0:
        return None, None, 0
    eps = state.eps_for(lam_hat)
    old_w, old = state.window, state.path
    m = old_w.m
    if _ill_conditioned(old.lambdas, lam_hat):
        return None, None, 0
    seg = solution_at_lambda(old_w, old, lam_hat)
    bounds = find_isolation_bounds(seg, y_removed, y_new)
    fail = None, bounds, 0
    if bounds.p is None or bounds.l is None:
        return fail
    p, l, kp, kl = bounds.p, bounds.l, bounds.j_p, bounds.j_l
    if not p < l - 2:
        return fail
    v, s = seg.levels, seg.signs
    y, tau = new_w.y, new_w.tau

    # prefix: old points 1..p are new points 0..p-1, right junction sign s[kp+1]
    s_b = int(s[kp + 1])
    y_b = np.append(y[:p], _sentinel(v[kp], lam_hat, eps, s_b))
    tau_b = np.append(tau[:p], 1.0)
    lam_b, g_b, _ = merge_path_arrays(y_b, tau_b)
    if not _certify_prefix(lam_b, y_b, tau_b, lam_hat, s_b, v[kp + 1]):
        return fail

    # suffix: old points l..m-1 plus the new sample are new points l-1..m-1
    s_a = int(s[kl])
    y_a = np.concatenate(([_sentinel(v[kl], lam_hat, eps, -s_a)], y[l - 1 :]))
    tau_a = np.concatenate(([1.0], tau[l - 1 :]))
    lam_a, g_a, _ = merge_path_arrays(y_a, tau_a)
    if not _certify_suffix(lam_a, y_a, tau_a, lam_hat, s_a, v[kl - 1]):
        return fail

    lam_c = np.empty(m - 1)
    g_c = np.zeros(m - 1, dtype=np.int64)
    lam_c[: p - 1] = lam_b[: p - 1]
    g_c[: p - 1] = g_b[: p - 1]
    lam_c[p - 1] = math.inf
    lam_c[p : l - 2] = old.lambdas[p + 1 : l - 1]
    g_c[p : l - 2] = old.g_drops[p + 1 : l - 1]
    lam_c[l - 2] = math.inf
    lam_c[l - 1 :] = lam_a[1:]
    g_c[l - 1 :] = g_a[1:]

    if _ill_conditioned(lam_c, lam_hat):
        return fail
    cuts = np.flatnonzero(lam_c > lam_hat)
    hat = segmentation_from_cuts(y, tau, cuts, lam_hat)
    lam_d, g_d, _ = merge_path_arrays(hat.levels, hat.lengths)
    lam_c[cuts] = lam_hat + lam_d
    g_c[cuts] = g_d
    # boundaries not copied from the old path: both ends, junctions and cuts
    touched = np.zeros(m - 1, dtype=bool)
    touched[:p] = True
    touched[l - 2 :] = True
    touched[cuts] = True
    return MergePath(lam_c, g_c), bounds, int(np.count_nonzero(touched))


def slide_update(state: StreamState, new_sample) -> StreamState:
    """Drop the oldest sample, append ``new_sample = (y, t)`` and update the path.

    The state is modified in place and returned. On any error it is left as
    it was.
    """
    y_new, t_new = float(new_sample[0]), float(new_sample[1])
    old_w = state.window
    if not (math.isfinite(y_new) and math.isfinite(t_new)):
        raise CorruptedStateError("non-finite sample")
    if not t_new > old_w.t[-1]:
        raise RejectedSampleError(f"timestamp {t_new} does not follow {old_w.t[-1]}")

    y = np.append(old_w.y[1:], y_new)
    t = np.append(old_w.t[1:], t_new)
    new_w = WindowSamples(y, t, periods_from_timestamps(t))

    lam_hat = state.next_cutting_point()
    path, bounds, rewritten = _incremental_path(state, new_w, lam_hat, float(old_w.y[0]), y_new)
    if path is None:
        path = compute_merge_path(new_w)
        kind = "offline"
        rewritten = new_w.m - 1
    else:
        kind = "incremental"
    if np.any(np.isnan(path.lambdas)):
        raise CorruptedStateError("merge path contains NaN")
    state.cutting_point = lam_hat
    state.last_bounds = bounds
    state.last_rewritten = rewritten
    state.window = new_w
    state.path = path
    state.last_update = kind
    state.stats[kind] += 1
    return state


def restore_current(state: StreamState, cfg: SelectorConfig = SelectorConfig()) -> tuple[float, Segmentation]:
    lam = select_lambda(state.path, state.window, cfg)
    state.selected_lambda = lam
    return lam, solution_at_lambda(state.window, state.path, lam)
