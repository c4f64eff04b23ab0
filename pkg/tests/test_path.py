import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_force_merge_lambda, tv_cvxpy, tv_dual_bvls
from wintv.core import ContractError, MergePath, WindowSamples, extremum_count, solution_at_lambda
from wintv.path import (
    SelectorConfig,
    compute_merge_path,
    g_curve,
    merge_events,
    plateau_lambda,
    select_lambda,
)
from wintv.sim import generate_signal, make_rng

# quarter-integers keep sums exact so shifted data keeps its ties
quarters = st.lists(st.integers(-40, 40), min_size=2, max_size=14).map(lambda v: np.array(v) / 4.0)
floats = st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=14).map(np.array)


def _w(y):
    return WindowSamples.uniform(np.asarray(y, dtype=float))


class TestMergePath:
    def test_two_points(self):
        np.testing.assert_allclose(compute_merge_path(_w([0.0, 2.0])).lambdas, [2.0])

    def test_three_points_and_order(self):
        path = compute_merge_path(_w([0.0, 2.0, 1.0]))
        np.testing.assert_allclose(path.lambdas, [2.0, 2.0 / 3.0])
        np.testing.assert_array_equal(path.event_order, [1, 0])

    def test_three_points_against_dual_oracle(self):
        y, tau = np.array([0.0, 2.0, 1.0]), np.ones(3)
        path = compute_merge_path(_w(y))
        for lam in (0.5, 1.0, 1.9, 2.1):
            u = tv_dual_bvls(y, tau, lam)
            merged = np.abs(np.diff(u)) < 1e-9
            np.testing.assert_array_equal(merged, path.lambdas <= lam)

    def test_grid_search_merge_values(self):
        y = np.array([0.3, 1.7, -0.4, 0.9, 0.1])
        tau = np.array([1.0, 1.0, 0.5, 2.0, 1.0])
        t = np.concatenate(([0.0], np.cumsum(tau[1:])))
        path = compute_merge_path(WindowSamples(y, t, tau))
        top = path.max_lambda * 1.2
        for b in range(y.size - 1):
            found = brute_force_merge_lambda(y, tau, b, top, n_grid=601)
            assert abs(found - path.lambdas[b]) <= top / 600 + 1e-9

    def test_constant_window(self):
        np.testing.assert_array_equal(compute_merge_path(_w([3.0, 3.0, 3.0])).lambdas, [0.0, 0.0])

    def test_cvxpy_agrees_on_small_case(self):
        y = np.array([1.0, -1.0, 2.5, 2.0, 0.0, 0.4])
        w = _w(y)
        path = compute_merge_path(w)
        for lam in (0.3, 1.1, 4.0):
            u = solution_at_lambda(w, path, lam).to_signal()
            np.testing.assert_allclose(u, tv_cvxpy(y, w.tau, lam), atol=1e-6)

    @given(quarters, st.integers(-20, 20))
    def test_shift_invariance(self, y, c):
        a = compute_merge_path(_w(y))
        b = compute_merge_path(_w(y + c / 4.0))
        np.testing.assert_allclose(b.lambdas, a.lambdas, rtol=1e-9, atol=1e-9)
        np.testing.assert_array_equal(b.g_drops, a.g_drops)

    @given(floats, st.floats(0.1, 10.0))
    def test_scaling(self, y, a):
        p = compute_merge_path(_w(y))
        q = compute_merge_path(_w(a * y))
        np.testing.assert_allclose(q.lambdas, a * p.lambdas, rtol=1e-9, atol=1e-9)

    @given(floats)
    def test_segments_never_split(self, y):
        w = _w(y)
        path = compute_merge_path(w)
        grid = np.concatenate(([0.0], np.sort(path.lambdas), [path.max_lambda + 1.0]))
        K = [solution_at_lambda(w, path, lam).n_segments for lam in grid]
        assert all(a >= b for a, b in zip(K, K[1:]))

    @given(floats)
    def test_event_invariants(self, y):
        ev = merge_events(_w(y))
        assert len(ev) == y.size - 1
        lams = [e.lam for e in ev]
        assert all(a <= b for a, b in zip(lams, lams[1:]))
        for e in ev:
            assert e.g_after <= e.g_before + 1
            assert abs(e.g_before - e.g_after) <= 2
            assert e.g_after >= 0

    @given(floats)
    def test_drop_matches_extremum_counts(self, y):
        w = _w(y)
        path = compute_merge_path(w)
        order = path.event_order
        lam = path.lambdas[order]
        drops = path.g_drops[order]
        prev = 0.0
        k = 0
        while k < lam.size:
            j = k
            while j + 1 < lam.size and lam[j + 1] <= lam[k] * (1 + 1e-12):
                j += 1
            if lam[k] > 0:
                below = extremum_count(solution_at_lambda(w, path, 0.5 * (prev + lam[k])))
                at = extremum_count(solution_at_lambda(w, path, lam[j]))
                assert below - at == drops[k : j + 1].sum()
            prev = lam[j]
            k = j + 1


class TestGCurve:
    def test_three_points(self):
        w = _w([0.0, 2.0, 1.0])
        steps = g_curve(compute_merge_path(w), w)
        assert steps[0] == (0.0, 1)
        assert steps[1][1] == 0
        assert steps[1][0] == pytest.approx(2.0 / 3.0)
        assert len(steps) == 2

    def test_monotone(self):
        w = _w([0.0, 1.0, 1.5, 4.0])
        assert g_curve(compute_merge_path(w), w) == [(0.0, 0)]

    def test_two_points(self):
        w = _w([1.0, 0.0])
        assert g_curve(compute_merge_path(w), w) == [(0.0, 0)]


class TestSelector:
    def test_monotone_gives_zero(self):
        w = _w([0.0, 1.0, 3.0, 3.5])
        assert select_lambda(compute_merge_path(w), w) == 0.0

    def test_external_pass_through(self):
        w = _w([0.0, 1.0, 0.2])
        cfg = SelectorConfig(kind="external", selector=lambda path, win: 3.25)
        assert select_lambda(compute_merge_path(w), w, cfg) == 3.25

    def test_fixed(self):
        w = _w([0.0, 1.0, 0.2])
        assert select_lambda(compute_merge_path(w), w, SelectorConfig(kind="fixed", fixed_lambda=0.7)) == 0.7

    def test_empty_path(self):
        with pytest.raises(ContractError):
            select_lambda(MergePath(np.empty(0)), _w([0.0, 1.0]))

    @pytest.mark.parametrize("kw", [{"q": 0}, {"kind": "nope"}, {"kind": "external"}, {"kind": "fixed", "fixed_lambda": -1.0}])
    def test_config_validation(self, kw):
        with pytest.raises(ContractError):
            SelectorConfig(**kw)

    def test_plateau_rule_on_synthetic_curve(self):
        # fast decay of noise extremums, then a flat stretch with 2 left
        lam = np.array([0.0, 0.1, 0.2, 0.5, 1.0, 2.0, 3.0, 50.0, 60.0])
        g = np.array([20, 16, 12, 8, 4, 2, 2, 1, 0])
        assert plateau_lambda(lam, g, 10) == 2.0

    def test_noise_merged_step_survives(self):
        # the default selector against the squared-error optimum on a step window
        u = generate_signal().u_net[:400]
        ratios = []
        for seed in range(8):
            y = u + make_rng(seed).standard_normal(u.size)
            w = _w(y)
            path = compute_merge_path(w)
            lam = select_lambda(path, w)
            grid = np.unique(path.lambdas)
            err = [np.sum((solution_at_lambda(w, path, g).to_signal() - u) ** 2) for g in grid]
            ratios.append(lam / grid[int(np.argmin(err))])
            seg = solution_at_lambda(w, path, lam)
            rest = seg.to_signal()
            # the 0 -> 6 step at t = 150 may be staircased but must stay
            assert rest[170:].mean() - rest[:130].mean() > 5.0
            assert extremum_count(seg) <= 2
        assert 0.1 <= np.median(ratios) <= 10.0
