"""Offline merge path of the weighted 1D TV problem and lambda selection.

Between merge events every segment level moves linearly in lambda::

    v_j(lam) = ybar_j + lam * (s_j - s_{j-1}) / (2 T_j)

so the next merge of two neighbours has a closed form. Gaps between
neighbours never widen, hence the path only merges and a priority queue of
per-boundary candidates yields the whole path in O(m log m).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .core import ContractError, MergePath, WindowSamples, extremum_count_of_levels

INF = math.inf


class MergeEvent(NamedTuple):
    lam: float
    left_segment: int
    right_segment: int
    boundary_index: int
    g_before: int
    g_after: int


def _sign(x: float) -> int:
    return (x > 0) - (x < 0)


def _is_extremum(left: int, right: int) -> bool:
    return left != 0 and left == -right


def merge_path_arrays(y, tau, events: Optional[list] = None):
    """Merge values and extremum drops for data ``y`` with weights ``tau``.

    Returns ``(lambdas, g_drops, g0)`` where ``g0`` is the extremum count at
    lambda = 0 with exact ties already merged. When ``events`` is a list it
    receives one :class:`MergeEvent` per boundary in processing order.
    """
    y = [float(v) for v in y]
    tau = [float(v) for v in tau]
    m = len(y)
    if m < 2 or len(tau) != m:
        raise ContractError("merge path needs at least 2 weighted samples")
    nb = m - 1
    lambdas = [INF] * nb
    drops = [0] * nb
    sgn = [_sign(y[b + 1] - y[b]) for b in range(nb)]

    # segments keyed by start index; ties are merged up front at lambda = 0
    end = {}
    S = {}
    T = {}
    starts = []
    a = 0
    for i in range(m):
        if i > 0 and sgn[i - 1] == 0:
            lambdas[i - 1] = 0.0
            end[a] = i
            S[a] += tau[i] * y[i]
            T[a] += tau[i]
            if events is not None:
                events.append(MergeEvent(0.0, a, i, i - 1, -1, -1))
        else:
            a = i
            starts.append(a)
            end[a] = i
            S[a] = tau[i] * y[i]
            T[a] = tau[i]
    nxt = {}
    prv = {}
    for k, st in enumerate(starts):
        prv[st] = starts[k - 1] if k > 0 else -1
        nxt[st] = starts[k + 1] if k + 1 < len(starts) else -1

    cut_signs = [sgn[end[st]] for st in starts[:-1]]
    g = sum(
        1 for k in range(1, len(cut_signs)) if cut_signs[k - 1] == -cut_signs[k] != 0
    )
    g0 = g
    if events is not None:
        events[:] = [e._replace(g_before=g0, g_after=g0) for e in events]

    stamp = [0] * nb
    heap = []

    def candidate(sa: int) -> float:
        sb = nxt[sa]
        b = end[sa]
        s = sgn[b]
        left = sgn[sa - 1] if sa > 0 else 0
        eb = end[sb]
        right = sgn[eb] if eb < nb else 0
        rate = (s - left) / T[sa] + (s - right) / T[sb]
        if rate == 0.0:
            return INF
        lam = 2.0 * (S[sb] / T[sb] - S[sa] / T[sa]) / rate
        return lam if lam > 0.0 else 0.0

    def push(sa: int) -> None:
        b = end[sa]
        stamp[b] += 1
        heapq.heappush(heap, (candidate(sa), b, stamp[b], sa))

    for st in starts[:-1]:
        push(st)

    current = 0.0
    while heap:
        lam, b, st_b, sa = heapq.heappop(heap)
        if st_b != stamp[b] or end.get(sa) != b or nxt.get(sa, -1) == -1:
            continue
        if lam == INF:
            # only possible for a degenerate rate; everything left merges last
            lam = current
        if lam < current:
            lam = current
        current = lam
        sb = nxt[sa]
        s = sgn[b]
        left = sgn[sa - 1] if sa > 0 else 0
        eb = end[sb]
        right = sgn[eb] if eb < nb else 0
        before = _is_extremum(left, s) + _is_extremum(s, right)
        after = _is_extremum(left, right)
        g_before = g
        g = g - before + after
        lambdas[b] = lam
        drops[b] = before - after
        if events is not None:
            events.append(MergeEvent(lam, sa, sb, b, g_before, g))

        S[sa] += S.pop(sb)
        T[sa] += T.pop(sb)
        end[sa] = eb
        del end[sb]
        nn = nxt.pop(sb)
        prv.pop(sb)
        nxt[sa] = nn
        if nn != -1:
            prv[nn] = sa
            push(sa)
        pa = prv[sa]
        if pa != -1:
            push(pa)

    return np.array(lambdas), np.array(drops, dtype=np.int64), g0


def compute_merge_path(w: WindowSamples) -> MergePath:
    lambdas, drops, _ = merge_path_arrays(w.y, w.tau)
    return MergePath(lambdas, drops)


def merge_events(w: WindowSamples) -> list[MergeEvent]:
    """Merge events of ``w`` in processing order (ties first, at lambda 0)."""
    events: list[MergeEvent] = []
    merge_path_arrays(w.y, w.tau, events)
    return events


def initial_extremum_count(y) -> int:
    """Extremum count at lambda = 0 with runs of equal values collapsed."""
    y = np.asarray(y, dtype=float)
    keep = np.concatenate(([True], np.diff(y) != 0))
    return extremum_count_of_levels(y[keep])


def g_sequence(path: MergePath, w: WindowSamples) -> tuple[np.ndarray, np.ndarray]:
    """Event lambdas in event order and g after each event.

    Element 0 is the state before any event (lambda 0, g(0)).
    """
    order = path.event_order
    g0 = initial_extremum_count(w.y)
    lam = np.concatenate(([0.0], path.lambdas[order]))
    g = np.concatenate(([g0], g0 - np.cumsum(path.g_drops[order])))
    return lam, g


def g_curve(path: MergePath, w: WindowSamples) -> list[tuple[float, int]]:
    """Step function g(lambda) as ``(lambda, g)`` pairs at each change.

    g takes the listed value on ``[lambda_k, lambda_{k+1})``.
    """
    lam, g = g_sequence(path, w)
    steps = [(0.0, int(g[0]))]
    k = 1
    n = lam.size
    while k < n:
        # all events sharing one lambda act together
        j = k
        while j + 1 < n and lam[j + 1] == lam[k]:
            j += 1
        if g[j] != steps[-1][1]:
            steps.append((float(lam[k]), int(g[j])))
        k = j + 1
    return steps


@dataclass(frozen=True)
class SelectorConfig:
    """Lambda selection settings.

    kind is ``"g-plateau"`` (default rule), ``"fixed"`` (returns
    ``fixed_lambda``) or ``"external"`` (calls ``selector(path, window)``).
    """

    q: int = 10
    kind: str = "g-plateau"
    fixed_lambda: float = 0.0
    selector: Optional[Callable[[MergePath, WindowSamples], float]] = None

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 1:
            raise ContractError("q must be a positive integer")
        if self.kind not in ("g-plateau", "fixed", "external"):
            raise ContractError(f"unknown selector kind {self.kind!r}")
        if self.kind == "fixed" and self.fixed_lambda < 0:
            raise ContractError("fixed_lambda must be nonnegative")
        if self.kind == "external" and self.selector is None:
            raise ContractError("external selector requires a callable")


def plateau_lambda(lam: np.ndarray, g: np.ndarray, q: int) -> float:
    """Onset of the first g plateau after the steepest extremum decay.

    ``lam`` and ``g`` come from :func:`g_sequence`. The drop of g over the
    multiplicative span ``[lam, q * lam]`` is large while noise extremums
    merge and at most one once only structural ones are left. The search
    starts at the steepest span because g also looks flat below the
    smallest noise merges. Falls back to the event where g first reaches 0.
    """
    if g[0] == 0:
        return 0.0
    ahead = np.searchsorted(lam, q * lam, side="right") - 1
    drop = np.where(lam > 0, g - g[ahead], -1)
    if drop.max() <= 1:
        return 0.0
    start = int(np.argmax(drop))
    hits = start + np.flatnonzero(drop[start:] <= 1)
    hits = hits[lam[hits] > 0]
    if hits.size:
        return float(lam[hits[0]])
    zero = np.flatnonzero(g == 0)
    return float(lam[zero[0]]) if zero.size else float(lam[-1])


def select_lambda(path: MergePath, w: WindowSamples, cfg: SelectorConfig = SelectorConfig()) -> float:
    if path.lambdas.size == 0:
        raise ContractError("empty path")
    if cfg.kind == "fixed":
        return float(cfg.fixed_lambda)
    if cfg.kind == "external":
        return float(cfg.selector(path, w))
    lam, g = g_sequence(path, w)
    return plateau_lambda(lam, g, cfg.q)
