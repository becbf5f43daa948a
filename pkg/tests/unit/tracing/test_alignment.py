"""
单调时间对齐测试

小规模距离矩阵上与穷举结果比较，真实轨道上检查精确可解的情形。
"""

import math

import numpy as np
import pytest

from shadowlab.chains import build_perturbed_chain, chain_from_orbit
from shadowlab.errors import GridTooCoarseError
from shadowlab.flow import integrate
from shadowlab.tracing import (
    TraceBudget,
    align_normal,
    align_strong,
    align_weak,
    band_alignment,
    build_grid,
    classify,
    verify_trace,
    weak_alignment,
    witness_from_path,
)
from shadowlab.tracing.alignment import strictly_increasing


def brute_weak(D):
    N, M = D.shape
    best = math.inf

    def walk(a, b, cost):
        nonlocal best
        cost = max(cost, D[a, b])
        if a == N - 1:
            best = min(best, cost)
            return
        for da, db in ((1, 0), (0, 1), (1, 1)):
            if a + da < N and b + db < M:
                walk(a + da, b + db, cost)

    walk(0, 0, -math.inf)
    return best


def brute_band(D, tau, s, eps_rep):
    N, M = D.shape
    best = math.inf

    def walk(a, b, cost):
        nonlocal best
        if a == N - 1:
            best = min(best, cost)
            return
        dt = tau[a + 1] - tau[a]
        for nb in range(b, M):
            slope = (s[nb] - s[b]) / dt
            if 1.0 - eps_rep <= slope <= 1.0 + eps_rep:
                step = max([D[a + 1, nb], *D[a, b + 1 : nb]])
                walk(a + 1, nb, max(cost, step))

    walk(0, 0, D[0, 0])
    return best


def random_problem(seed, N=4, M=6):
    rng = np.random.default_rng(seed)
    D = rng.random((N, M))
    tau = np.concatenate([[0.0], np.cumsum(rng.uniform(0.5, 1.5, N - 1))])
    s = np.concatenate([[0.0], np.cumsum(rng.uniform(0.2, 0.8, M - 1))])
    return D, tau, s


def path_is_monotone(path):
    return all(
        (a1 - a0, b1 - b0) in {(1, 0), (0, 1), (1, 1)}
        for (a0, b0), (a1, b1) in zip(path, path[1:])
    )


@pytest.mark.parametrize("seed", range(6))
def test_weak_alignment_matches_exhaustive_search(seed):
    D, _, _ = random_problem(seed)
    value, path = weak_alignment(D)
    assert value == pytest.approx(brute_weak(D))
    assert path[0] == (0, 0)
    assert path[-1][0] == D.shape[0] - 1
    assert path_is_monotone(path)
    assert max(D[a, b] for a, b in path) == pytest.approx(value)


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("eps_rep", [0.3, 0.6, 1.5])
def test_band_alignment_matches_exhaustive_search(seed, eps_rep):
    D, tau, s = random_problem(seed)
    value, path = band_alignment(D, tau, s, eps_rep)
    expected = brute_band(D, tau, s, eps_rep)
    if math.isinf(expected):
        assert math.isinf(value)
        assert path == []
    else:
        assert value == pytest.approx(expected)
        assert [a for a, _ in path] == list(range(D.shape[0]))
        assert path[0] == (0, 0)


@pytest.mark.parametrize("seed", range(6))
def test_strong_value_never_below_weak(seed):
    D, tau, s = random_problem(seed, N=5, M=8)
    weak, _ = weak_alignment(D)
    for eps_rep in (0.2, 0.5, 1.0, 3.0):
        strong, _ = band_alignment(D, tau, s, eps_rep)
        assert strong >= weak


@pytest.mark.parametrize("seed", range(6))
def test_unbounded_slopes_recover_weak_value(seed):
    D, tau, s = random_problem(seed, N=5, M=8)
    weak, _ = weak_alignment(D)
    strong, _ = band_alignment(D, tau, s, 1e6)
    assert strong == pytest.approx(weak)


def test_witness_spreads_repeated_matches():
    tau = np.array([0.0, 1.0, 2.0, 3.0])
    s = np.array([0.0, 1.0, 2.0, 3.0])
    g = witness_from_path(tau, s, [(0, 0), (1, 0), (2, 0), (3, 1), (3, 3)])
    # 三个节点共用 s=0，在 [0, 0.5] 内均匀错开
    np.testing.assert_allclose(g.values, [0.0, 1.0 / 6.0, 1.0 / 3.0, 1.0])
    assert classify(g, 0.0).in_rep
    assert not classify(g, 0.0).in_rep_star


def test_identical_orbits_align_exactly(saddle_spec, x0):
    chain = chain_from_orbit(saddle_spec, x0, [1.0])
    traj = integrate(saddle_spec, x0, 1.0)
    grid = build_grid(chain, traj, spacing=0.01, uniform=True)
    np.testing.assert_array_equal(grid.tau, grid.s)
    assert align_weak(chain, traj, grid=grid).error == 0.0
    strong = align_strong(chain, traj, 0.0, grid=grid)
    assert strong.error == 0.0
    assert classify(strong.g, 0.0).in_rep_eps


def test_offset_start_gives_initial_distance(saddle_spec, x0):
    # 沿强稳定方向 e1 偏移，距离按 e^{-2t} 收缩，最大值在 t=0
    h = 0.01
    chain = chain_from_orbit(saddle_spec, x0, [1.0])
    traj = integrate(saddle_spec, x0 + np.array([h, 0.0, 0.0]), 1.5)
    grid = build_grid(chain, traj, spacing=0.01, uniform=True)
    assert align_weak(chain, traj, grid=grid).error == pytest.approx(h, rel=1e-9)
    assert align_strong(chain, traj, 0.0, grid=grid).error == pytest.approx(h, rel=1e-9)


def test_end_slopes_per_class(saddle_spec, x0):
    chain = chain_from_orbit(saddle_spec, x0, [0.5, 0.5])
    traj = integrate(saddle_spec, x0, 1.5)
    grid = build_grid(chain, traj, spacing=0.005)
    weak = align_weak(chain, traj, grid=grid)
    normal = align_normal(chain, traj, grid=grid)
    strong = align_strong(chain, traj, 0.1, grid=grid)
    assert weak.g.left_slope == weak.g.right_slope == 0.0
    assert normal.g.left_slope == normal.g.right_slope == 1.0
    assert normal.error == weak.error
    assert weak.error <= strong.error < 0.05
    assert classify(strong.g, 0.1).in_rep_eps


def test_orbit_grid_contains_chain_nodes(saddle_spec, x0):
    chain = chain_from_orbit(saddle_spec, x0, [0.4, 0.6])
    traj = integrate(saddle_spec, x0, 1.5)
    grid = build_grid(chain, traj, spacing=0.01)
    assert np.all(np.isin(grid.tau, grid.s))
    assert grid.tau[0] == 0.0
    assert grid.tau[-1] == pytest.approx(1.0)
    assert grid.distances.shape == (len(grid.tau), len(grid.s))
    assert grid.modulus <= 0.02


def test_strong_alignment_reports_infeasible_band(saddle_spec, x0):
    chain = chain_from_orbit(saddle_spec, x0, [1.0])
    traj = integrate(saddle_spec, x0, 0.5)
    grid = build_grid(chain, traj, spacing=0.01, uniform=True)
    result = align_strong(chain, traj, 0.0, grid=grid)
    assert math.isinf(result.error)
    assert result.g is None
    assert result.path == []


def test_coarse_grid_is_rejected(saddle_spec, x0):
    chain = chain_from_orbit(saddle_spec, x0, [1.0])
    traj = integrate(saddle_spec, x0, 1.5)
    with pytest.raises(GridTooCoarseError) as info:
        align_weak(chain, traj, spacing=1.0, max_dt=1.0, eps=1e-3)
    assert info.value.modulus > 1e-3 / 4.0


@pytest.mark.parametrize("kwargs", [{"min_nodes": 1}, {"spacing": 0.0}, {"max_dt": -1.0}])
def test_build_grid_rejects_bad_parameters(saddle_spec, x0, kwargs):
    chain = chain_from_orbit(saddle_spec, x0, [1.0])
    traj = integrate(saddle_spec, x0, 1.5)
    params = {"spacing": 0.01, **kwargs}
    with pytest.raises(ValueError):
        build_grid(chain, traj, **params)


def test_strong_alignment_rejects_negative_eps_rep(saddle_spec, x0):
    chain = chain_from_orbit(saddle_spec, x0, [1.0])
    traj = integrate(saddle_spec, x0, 1.5)
    with pytest.raises(ValueError):
        align_strong(chain, traj, -0.1)


def test_strictly_increasing_drops_near_duplicates():
    times = np.array([0.0, 0.5, 0.5 + 1e-16, 2.48686901, 2.48686901, 1.0])
    out = strictly_increasing(times, 1e-12)
    np.testing.assert_array_equal(out, [0.0, 0.5, 1.0, 2.48686901])


@pytest.mark.parametrize("durations", [[1.98686901, 1.0], [0.7310, 0.4142, 0.5503], [0.3 + 0.6, 0.1 + 0.2, 1.0]])
def test_multi_leg_grid_is_strictly_increasing(saddle_spec, x0, durations):
    chain = build_perturbed_chain(saddle_spec, x0, durations, noise=1e-3, seed=5)
    traj = integrate(saddle_spec, x0, 1.5 * chain.total_time)
    grid = build_grid(chain, traj, spacing=0.01)
    assert np.all(np.diff(grid.tau) > 0)
    assert np.all(np.diff(grid.s) > 0)
    junctions = chain.clock.partial_sums
    np.testing.assert_array_equal(grid.tau[np.searchsorted(grid.tau, junctions)], junctions)
    for result in (align_weak(chain, traj, grid=grid), align_strong(chain, traj, 0.1, grid=grid)):
        assert np.all(np.diff(result.g.breakpoints) > 0)


def test_multi_leg_chain_verifies_without_breakpoint_errors(saddle_spec, x0):
    chain = build_perturbed_chain(saddle_spec, x0, [1.98686901, 1.0], noise=1e-3, seed=5)
    budget = TraceBudget(refine_depth=0)
    for trace_class in ("weak", "strong"):
        verdict = verify_trace(chain, 0.05, trace_class, candidates=[x0], eps_rep=0.1, budget=budget)
        assert verdict.traced
        assert np.all(np.diff(verdict.grid_times) > 0)


def test_zero_band_equals_identity_value(saddle_spec, x0):
    chain = build_perturbed_chain(saddle_spec, x0, [0.5, 0.5], noise=2e-3, seed=3)
    traj = integrate(saddle_spec, x0 + np.array([0.0, 0.0, 1e-3]), 1.5)
    grid = build_grid(chain, traj, spacing=0.005)
    columns = np.searchsorted(grid.s, grid.tau)
    np.testing.assert_array_equal(grid.s[columns], grid.tau)
    identity = float(np.max(grid.distances[np.arange(len(grid.tau)), columns]))
    strong = align_strong(chain, traj, 0.0, grid=grid)
    assert strong.error == identity
    assert [b for _, b in strong.path] == list(columns)
