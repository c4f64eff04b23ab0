"""Simulated traces, evaluation metrics and the variance-monitoring experiment.

Every random draw goes through ``numpy.random.Generator(PCG64(seed))`` and
repetition ``r`` of an experiment uses ``seed = base_seed + r``.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import ContractError
from .monitor import mad_sigma, window_residual_sigma
from .path import SelectorConfig
from .stream import StreamState, restore_current, slide_update

NOISE_KINDS = (
    "gaussian_linear_sigma",
    "gaussian_piecewise_sigma",
    "uniform_linear_halfwidth",
    "gaussian_plus_uniform",
)

# (start time, level); a plain piecewise-constant test signal over t in [0, 2000)
DEFAULT_STEPS = (
    (0.0, 0.0),
    (150.0, 6.0),
    (420.0, 1.0),
    (700.0, 9.0),
    (930.0, 4.0),
    (1200.0, -3.0),
    (1480.0, 5.0),
    (1750.0, 0.0),
)


class UndefinedRVEError(ValueError):
    """The reference sigma series is constant so RVE has no denominator."""


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean noise with a time-varying scale.

    ========================  ==========================================
    kind                      parameters
    ========================  ==========================================
    gaussian_linear_sigma     (a, b): sigma(t) = a + b t
    gaussian_piecewise_sigma  (s0, t0, a, b): s0 for t <= t0, else a + b t
    uniform_linear_halfwidth  (a, b): U(-d, d) with d(t) = a + b t
    gaussian_plus_uniform     (a, b, h): N(0, (a + b t)^2) + U(-h, h)
    ========================  ==========================================
    """

    kind: str
    parameters: tuple

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ContractError(f"unknown noise kind {self.kind!r}")
        need = {"gaussian_piecewise_sigma": 4, "gaussian_plus_uniform": 3}.get(self.kind, 2)
        if len(self.parameters) != need:
            raise ContractError(f"{self.kind} takes {need} parameters")
        object.__setattr__(self, "parameters", tuple(float(p) for p in self.parameters))

    @classmethod
    def preset(cls, number: int) -> "NoiseModel":
        """Standard noise settings 1 to 4 of the simulation study."""
        table = {
            1: ("gaussian_linear_sigma", (1.0, 0.0005)),
            2: ("gaussian_piecewise_sigma", (1.0, 1000.0, 1.0, 0.001)),
            3: ("uniform_linear_halfwidth", (1.0, 0.0005)),
            4: ("gaussian_plus_uniform", (1.0, 0.0005, 1.0)),
        }
        if number not in table:
            raise ContractError("noise model number must be 1, 2, 3 or 4")
        return cls(*table[number])

    def scale(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        p = self.parameters
        if self.kind == "gaussian_piecewise_sigma":
            s = np.where(t <= p[1], p[0], p[2] + p[3] * t)
        else:
            s = p[0] + p[1] * t
        if np.any(s <= 0):
            raise ContractError("noise scale must stay positive over the horizon")
        return s

    def noise_std(self, t) -> np.ndarray:
        """Theoretical standard deviation of the noise at ``t``."""
        s = self.scale(t)
        if self.kind == "uniform_linear_halfwidth":
            return s / np.sqrt(3.0)
        if self.kind == "gaussian_plus_uniform":
            return np.sqrt(s**2 + self.parameters[2] ** 2 / 3.0)
        return s

    def draw(self, t, rng: np.random.Generator) -> np.ndarray:
        s = self.scale(t)
        n = s.size
        if self.kind == "uniform_linear_halfwidth":
            return s * rng.uniform(-1.0, 1.0, n)
        eps = s * rng.standard_normal(n)
        if self.kind == "gaussian_plus_uniform":
            h = self.parameters[2]
            eps = eps + rng.uniform(-h, h, n)
        return eps


@dataclass(frozen=True)
class SimulatedTrace:
    u_net: np.ndarray
    y: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        if not (len(self.u_net) == len(self.y) == len(self.t)):
            raise ContractError("trace vectors must have equal length")

    @property
    def epsilon_hat(self) -> np.ndarray:
        return self.y - self.u_net


def generate_signal(steps: Sequence[tuple[float, float]] = DEFAULT_STEPS, n: int = 2000,
                    dt: float = 1.0) -> SimulatedTrace:
    """Noiseless piecewise-constant trace sampled at ``t = k * dt``.

    ``steps`` lists ``(start_time, level)``; each level holds until the next
    start. The first step must start at or before 0; steps beyond the
    horizon are simply never reached.
    """
    if not steps:
        raise ContractError("at least one step is required")
    if n < 1 or dt <= 0:
        raise ContractError("n must be positive and dt > 0")
    times = np.array([s[0] for s in steps], dtype=float)
    levels = np.array([s[1] for s in steps], dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ContractError("step times must be strictly increasing")
    t = dt * np.arange(n)
    if times[0] > t[0]:
        raise ContractError("the first step must start at the beginning of the trace")
    u = levels[np.searchsorted(times, t, side="right") - 1]
    return SimulatedTrace(u, u.copy(), t)


def add_noise(trace: SimulatedTrace, model: NoiseModel, seed: int) -> SimulatedTrace:
    eps = model.draw(trace.t, make_rng(seed))
    return SimulatedTrace(trace.u_net, trace.u_net + eps, trace.t)


def reference_sigma(trace, m: int) -> np.ndarray:
    """Sliding sample standard deviation of the true noise over windows of ``m``.

    ``trace`` is a :class:`SimulatedTrace` or the noise vector itself.
    """
    eps = trace.epsilon_hat if isinstance(trace, SimulatedTrace) else np.asarray(trace, dtype=float)
    if not 2 <= m <= eps.size:
        raise ContractError(f"window length {m} must lie in [2, {eps.size}]")
    return sliding_window_view(eps, m).std(axis=1, ddof=1)


def mean_bias(sigma_hat, sigma_star) -> float:
    """Average of ``sigma_hat - sigma_star``; positive when sigma_star is too low."""
    sigma_hat, sigma_star = _pair(sigma_hat, sigma_star)
    return float(np.mean(sigma_hat - sigma_star))


def rve_score(sigma_hat, sigma_star) -> float:
    """Share of the variation of ``sigma_hat`` explained once the mean bias is removed."""
    sigma_hat, sigma_star = _pair(sigma_hat, sigma_star)
    den = np.sum((sigma_hat - sigma_hat.mean()) ** 2)
    if den == 0:
        raise UndefinedRVEError("reference sigma is constant")
    bias = np.mean(sigma_hat - sigma_star)
    return float(1.0 - np.sum((sigma_hat - bias - sigma_star) ** 2) / den)


def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ContractError("sigma series must be 1D, of equal length >= 2")
    return a, b


@dataclass
class WindowedEstimates:
    """Per-window estimates and per-slide diagnostics of one streaming run.

    ``non_right_isolated[k]`` is ``m - l`` for slide ``k`` or -1 when the
    bound was not found. ``slide_seconds`` is empty unless timing was asked.
    """

    sigma_star: np.ndarray
    mad: np.ndarray
    lambdas: np.ndarray
    non_right_isolated: np.ndarray
    rewritten: np.ndarray
    incremental: np.ndarray
    slide_seconds: np.ndarray

    @property
    def right_isolation_lengths(self) -> list:
        return [int(v) for v in self.non_right_isolated if v >= 0]

    @property
    def incremental_slides(self) -> int:
        return int(np.count_nonzero(self.incremental))


def windowed_estimates(y, t, m: int, cfg: SelectorConfig = SelectorConfig(), timed: bool = False,
                       **state_kwargs) -> WindowedEstimates:
    """Run the streaming restoration over every window of the series.

    Besides the residual sigma, MAD and selected lambda of each window this
    records the non right-isolated length and rewritten-boundary count of
    every slide.
    """
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    n = y.size
    if not 2 <= m <= n:
        raise ContractError(f"window length {m} must lie in [2, {n}]")
    state = StreamState.from_samples(y[:m], t[:m], **state_kwargs)
    count = n - m + 1
    sig = np.empty(count)
    mad = np.empty(count)
    lams = np.empty(count)
    iso = np.full(count - 1, -1, dtype=np.int64)
    rewritten = np.zeros(count - 1, dtype=np.int64)
    inc = np.zeros(count - 1, dtype=bool)
    secs = []
    for i in range(count):
        if i:
            t0 = time.perf_counter()
            slide_update(state, (y[i + m - 1], t[i + m - 1]))
            if timed:
                secs.append(time.perf_counter() - t0)
            b = state.last_bounds
            if b is not None and b.l is not None:
                iso[i - 1] = m - b.l
            rewritten[i - 1] = state.last_rewritten
            inc[i - 1] = state.last_update == "incremental"
        lam, seg = restore_current(state, cfg)
        sig[i] = window_residual_sigma(state.window, seg.to_signal())
        mad[i] = mad_sigma(state.window.y)
        lams[i] = lam
    return WindowedEstimates(sig, mad, lams, iso, rewritten, inc, np.asarray(secs))


@dataclass
class ExperimentConfig:
    noise_model: int = 1
    m: int = 400
    n: int = 2000
    dt: float = 1.0
    repetitions: int = 20
    base_seed: int = 0
    q: int = 10
    cutting_policy: str = "quantile"
    steps: tuple = DEFAULT_STEPS

    def __post_init__(self):
        errors = []
        if self.noise_model not in (1, 2, 3, 4):
            errors.append("noise_model must be 1, 2, 3 or 4")
        if not 4 <= self.m <= self.n:
            errors.append("m must satisfy 4 <= m <= n")
        if self.repetitions < 1:
            errors.append("repetitions must be positive")
        if self.q < 1:
            errors.append("q must be positive")
        if self.dt <= 0:
            errors.append("dt must be positive")
        if errors:
            raise ContractError("; ".join(errors))
        self.steps = tuple(tuple(float(v) for v in s) for s in self.steps)


SUMMARY_METRICS = (
    "rve_ours", "rve_mad", "rve_mad_consistent",
    "bias_ours", "bias_mad", "bias_mad_consistent", "median_lambda",
)


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    rows: list
    isolation_lengths: list

    def metric(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def summary(self) -> dict:
        quant = {}
        for name in SUMMARY_METRICS:
            vals = self.metric(name)
            qs = np.quantile(vals, [0.0, 0.25, 0.5, 0.75, 1.0])
            quant[name] = dict(zip(("min", "q25", "median", "q75", "max"), map(float, qs)))
            quant[name]["mean"] = float(vals.mean())
        iso = np.asarray(self.isolation_lengths, dtype=int)
        counts, edges = np.histogram(iso, bins=20, range=(0, self.config.m)) if iso.size else ([], [])
        cfg = asdict(self.config)
        cfg["steps"] = [list(s) for s in self.config.steps]
        return {
            "config": cfg,
            "metrics": quant,
            "ours_beats_mad": int(np.sum(self.metric("rve_ours") > self.metric("rve_mad"))),
            "ours_beats_mad_consistent": int(
                np.sum(self.metric("rve_ours") > self.metric("rve_mad_consistent"))
            ),
            "non_right_isolated_length": {
                "max": int(iso.max()) if iso.size else 0,
                "mean": float(iso.mean()) if iso.size else 0.0,
                "hist_counts": [int(c) for c in counts],
                "hist_edges": [float(e) for e in edges],
            },
        }


def run_repetition(cfg: ExperimentConfig, rep: int) -> tuple[dict, list]:
    seed = cfg.base_seed + rep
    trace = add_noise(generate_signal(cfg.steps, cfg.n, cfg.dt), NoiseModel.preset(cfg.noise_model), seed)
    sigma_hat = reference_sigma(trace, cfg.m)
    est = windowed_estimates(trace.y, trace.t, cfg.m, SelectorConfig(q=cfg.q), policy=cfg.cutting_policy)
    row = {
        "repetition": rep,
        "seed": seed,
        "noise_model": cfg.noise_model,
        "m": cfg.m,
        "rve_ours": rve_score(sigma_hat, est.sigma_star),
        "rve_mad": rve_score(sigma_hat, est.mad),
        "bias_ours": mean_bias(sigma_hat, est.sigma_star),
        "bias_mad": mean_bias(sigma_hat, est.mad),
        # differences of iid noise have std sqrt(2) sigma, so the scaled MAD reads 2 sigma
        "rve_mad_consistent": rve_score(sigma_hat, est.mad / 2.0),
        "bias_mad_consistent": mean_bias(sigma_hat, est.mad / 2.0),
        "median_lambda": float(np.median(est.lambdas)),
        "incremental_fraction": est.incremental_slides / max(1, cfg.n - cfg.m),
    }
    return row, est.right_isolation_lengths


def run_experiment(config: Optional[ExperimentConfig] = None) -> ExperimentReport:
    cfg = config or ExperimentConfig()
    rows, iso = [], []
    for rep in range(cfg.repetitions):
        row, lengths = run_repetition(cfg, rep)
        rows.append(row)
        iso.extend(lengths)
    return ExperimentReport(cfg, rows, iso)


def stationary_trace(n: int, seed: int = 0, noise_sigma: float = 1.0,
                     steps: Sequence = DEFAULT_STEPS) -> SimulatedTrace:
    """Step signal with constant-variance Gaussian noise over ``n`` samples."""
    base = generate_signal(steps, 2000, 1.0)
    # tile the step pattern so any horizon stays piecewise constant
    u = np.resize(base.u_net, n)
    y = u + noise_sigma * make_rng(seed).standard_normal(n)
    return SimulatedTrace(u, y, np.arange(n, dtype=float))


def bench_window(m: int, n_slides: int = 400, seed: int = 0, q: int = 10, noise_sigma: float = 1.0,
                 steps: Sequence = DEFAULT_STEPS, **state_kwargs) -> WindowedEstimates:
    if n_slides < 1:
        raise ContractError("n_slides must be positive")
    trace = stationary_trace(m + n_slides, seed, noise_sigma, steps)
    return windowed_estimates(trace.y, trace.t, m, SelectorConfig(q=q), timed=True, **state_kwargs)


def summarize_bench(m: int, est: WindowedEstimates) -> dict:
    secs = est.slide_seconds
    iso = est.right_isolation_lengths
    return {
        "m": m,
        "slides": int(secs.size),
        "mean_slide_seconds": float(secs.mean()),
        "median_slide_seconds": float(np.median(secs)),
        "mean_rewritten": float(np.mean(est.rewritten)),
        "max_rewritten": int(np.max(est.rewritten)),
        "mean_non_right_isolated": float(np.mean(iso)) if iso else 0.0,
        "max_non_right_isolated": int(max(iso)) if iso else 0,
        "incremental_fraction": est.incremental_slides / max(1, secs.size),
    }


def run_bench(ms: Sequence[int] = (100, 200, 400), n_slides: int = 400, seed: int = 0,
              q: int = 10, noise_sigma: float = 1.0, steps: Sequence = DEFAULT_STEPS) -> list[dict]:
    """Per-slide wall time and rewritten boundaries on a stationary trace."""
    return [summarize_bench(m, bench_window(m, n_slides, seed, q, noise_sigma, steps)) for m in ms]
