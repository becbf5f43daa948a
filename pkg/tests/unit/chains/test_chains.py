"""
链引擎测试：时钟、求值、缺陷校验、读写与构造器
"""

import numpy as np
import pytest

from shadowlab.chains import (
    ChainClock,
    FiniteChain,
    approach_time,
    build_adversarial_chain,
    build_perturbed_chain,
    build_three_leg_chain,
    chain_eval,
    chain_from_orbit,
    chain_sample,
    chain_summary,
    chain_window,
    find_side_approach_point,
    jump_sizes,
    load_chain,
    read_chain_records,
    resolve_branch,
    save_chain,
    validate_chain,
)
from shadowlab.errors import DomainError, GeometryError, NotSingularApproachError
from shadowlab.flow import flow_map
from shadowlab.geometry import AttractorSample, SideVerdict, build_singular_sections
from shadowlab.models import linear


def test_clock_partial_sums_and_segment_index():
    clock = ChainClock.from_durations([1.0, 2.0, 0.5])
    np.testing.assert_allclose(clock.partial_sums, [0.0, 1.0, 3.0, 3.5])
    assert clock.total == 3.5
    idx = clock.segment_index(np.array([0.0, 0.99, 1.0, 3.0, 3.5]))
    # t = S_{k+1} 归入最后一段
    assert idx.tolist() == [0, 0, 1, 2, 2]


@pytest.mark.parametrize(
    "points, durations, kwargs",
    [
        ([[0.0, 0.0, 0.0]], [1.0, 1.0], {}),
        ([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]], [1.0, 0.2], {"T": 0.5}),
        ([[0.0, 0.0, 0.0]], [1.0], {"T": -1.0}),
    ],
)
def test_create_rejects_inconsistent_chains(saddle_spec, points, durations, kwargs):
    with pytest.raises(ValueError):
        FiniteChain.create(saddle_spec, points, durations, delta=0.1, **kwargs)


def test_create_rejects_negative_delta(saddle_spec):
    with pytest.raises(ValueError):
        FiniteChain.create(saddle_spec, [[0.1, 0.1, 0.1]], [1.0], delta=-0.1)


def test_chain_from_orbit_has_no_jumps(cycle_spec):
    chain = chain_from_orbit(cycle_spec, [1.0, 0.0, 0.5], [0.5, 0.7, 0.4])
    assert chain.k == 2
    assert chain.T == pytest.approx(0.4)
    np.testing.assert_array_equal(jump_sizes(chain), np.zeros(2))
    assert validate_chain(chain).passed


def test_chain_eval_follows_each_segment(saddle_spec, x0):
    points = [x0, [0.2, -0.1, 0.05]]
    chain = FiniteChain.create(saddle_spec, points, [1.0, 1.0], delta=1.0)
    np.testing.assert_array_equal(chain_eval(chain, 0.0), x0)
    # 接合点取后一段的起点
    np.testing.assert_array_equal(chain_eval(chain, 1.0), points[1])
    np.testing.assert_allclose(chain(1.5), flow_map(saddle_spec, points[1], 0.5), rtol=1e-6)
    np.testing.assert_allclose(chain(2.0), chain.segments[1].endpoint, atol=1e-12)
    with pytest.raises(DomainError):
        chain_sample(chain, [2.5])


def test_validate_chain_flags_large_jumps(saddle_spec, x0):
    end = flow_map(saddle_spec, x0, 1.0)
    points = [x0, end + np.array([0.05, 0.0, 0.0]), [0.0, 0.0, 0.1]]
    chain = FiniteChain.create(saddle_spec, points, [1.0, 1.0, 1.0], delta=0.06)
    report = validate_chain(chain)
    assert not report.passed
    assert report.failing == [1]
    assert report.defects[0] == pytest.approx(0.05, abs=1e-6)
    assert report.to_dict()["passed"] is False
    assert report.max_defect > 0.06


def test_chain_window_keeps_segments(cycle_spec):
    chain = chain_from_orbit(cycle_spec, [1.0, 0.0, 0.5], [0.5, 0.5, 0.5, 0.5])
    window = chain_window(chain, 1, 2)
    assert window.k == 1
    np.testing.assert_array_equal(window.points, chain.points[1:3])
    assert window.metadata["window"] == [1, 2]
    with pytest.raises(ValueError):
        chain_window(chain, 2, 5)


def test_save_and_load_chain(tmp_path, saddle_spec, x0):
    chain = build_perturbed_chain(saddle_spec, x0, [0.5, 0.5, 0.5], noise=0.01, seed=7)
    path = save_chain(chain, tmp_path / "chains" / "perturbed.chain")
    loaded = load_chain(path)
    np.testing.assert_array_equal(loaded.points, chain.points)
    np.testing.assert_array_equal(loaded.durations, chain.durations)
    assert loaded.delta == chain.delta
    assert loaded.T == chain.T
    assert loaded.seed == 7
    assert loaded.spec.name == "saddle"
    assert loaded.metadata["builder"] == "perturbed"


@pytest.mark.parametrize("content", ["# delta=0.1\n", "# delta=0.1\n1.0 2.0 3.0\n"])
def test_read_chain_records_rejects_bad_files(tmp_path, content):
    path = tmp_path / "bad.chain"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(ValueError):
        read_chain_records(path)


def test_perturbed_chain_is_seeded(saddle_spec, x0):
    first = build_perturbed_chain(saddle_spec, x0, [0.5] * 4, noise=0.01, seed=3)
    second = build_perturbed_chain(saddle_spec, x0, [0.5] * 4, noise=0.01, seed=3)
    np.testing.assert_array_equal(first.points, second.points)
    assert first.delta == pytest.approx(0.02)
    assert np.all(jump_sizes(first) <= 0.01 + 1e-12)
    assert validate_chain(first).passed
    summary = chain_summary(first)
    assert summary["k"] == 3
    assert summary["seed"] == 3


def test_perturbed_chain_rejects_negative_noise(saddle_spec, x0):
    with pytest.raises(ValueError):
        build_perturbed_chain(saddle_spec, x0, [1.0], noise=-0.1)


def test_approach_time_on_stable_manifold(saddle_spec):
    t = approach_time(saddle_spec, [1.0, 1.0, 0.0], np.zeros(3), 0.1)
    assert t > 0.0
    assert np.linalg.norm(flow_map(saddle_spec, [1.0, 1.0, 0.0], t)) == pytest.approx(0.1, abs=1e-6)


def test_approach_time_gives_up_after_budget(saddle_spec):
    with pytest.raises(NotSingularApproachError):
        approach_time(saddle_spec, [0.0, 0.0, 0.5], np.zeros(3), 0.1, budget=5.0)


def test_adversarial_builders_validate_arguments(saddle_spec):
    with pytest.raises(ValueError):
        build_adversarial_chain(saddle_spec, [1, 1, 0], np.zeros(3), "x", 0.1, 1.0, branches=None)
    with pytest.raises(ValueError):
        build_adversarial_chain(saddle_spec, [1, 1, 0], np.zeros(3), "l", 0.0, 1.0, branches=None)
    with pytest.raises(ValueError):
        build_three_leg_chain(
            saddle_spec, [1, 1, 0], 0.5, [1, 1, 0], np.zeros(3), 0.1, 1.0, branches=None
        )


@pytest.mark.parametrize(
    "branch, accumulated, expected",
    [("auto", "l", "r"), ("auto", "r", "l"), ("l", None, "l"), ("l", "r", "l"), ("r", "l", "r")],
)
def test_resolve_branch(branch, accumulated, expected):
    assert resolve_branch(branch, accumulated) == expected


def test_resolve_branch_refuses_the_accumulated_branch():
    with pytest.raises(GeometryError):
        resolve_branch("auto", None)
    with pytest.raises(GeometryError):
        resolve_branch("r", "r")
    with pytest.raises(ValueError):
        resolve_branch("x", "l")


def test_adversarial_chain_refuses_the_accumulated_branch(saddle_spec):
    with pytest.raises(GeometryError):
        build_adversarial_chain(saddle_spec, [1, 1, 0], np.zeros(3), "r", 0.1, 1.0, branches=None, accumulated="r")


# 线性 Lorenz 型鞍点：弱稳定 e2、不稳定 e3，上截面 l* 在 (0, 1, 0) 附近
@pytest.fixture(scope="module")
def lorenz_like_saddle():
    spec = linear(np.diag([-6.0, -0.5, 4.0]))
    sections = build_singular_sections(
        spec, np.zeros(3), offset=1.0, extents=(0.5, 0.5), horizon=5.0, leaf_grid=2, leaf_nodes=1
    )
    return spec, sections


def _shell_sample(center, one_sided, n=400, seed=0):
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((n, 3))
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    if one_sided:
        directions[:, 2] = np.abs(directions[:, 2])
    radii = np.exp(rng.uniform(np.log(1e-3), np.log(4e-2), n))
    return AttractorSample(points=center + directions * radii[:, None], times=np.arange(n, dtype=float))


def test_side_approach_picks_the_one_sided_node(lorenz_like_saddle):
    spec, sections = lorenz_like_saddle
    node = sections.top.point(sections.top.l_star, 0.0)
    sample = _shell_sample(node, one_sided=True)
    approach = find_side_approach_point(spec, sections, sample, delta=0.5, T=1.0, eps=0.05)
    np.testing.assert_allclose(approach.p, node)
    assert approach.side.verdict is SideVerdict.SIDE
    # 样本只在 z > 0 一侧，该侧沿 +e3 离开
    assert approach.accumulated == "r"
    assert approach.is_side_point
    assert approach.approach_time >= 1.0
    assert resolve_branch("auto", approach.accumulated) == "l"
    assert approach.to_dict()["is_side_point"] is True


def test_side_approach_falls_back_to_a_bi_side_node(lorenz_like_saddle):
    spec, sections = lorenz_like_saddle
    node = sections.top.point(sections.top.l_star, 0.0)
    sample = _shell_sample(node, one_sided=False)
    approach = find_side_approach_point(spec, sections, sample, delta=0.5, T=1.0, eps=0.05)
    assert approach.side.verdict is SideVerdict.BI_SIDE
    assert approach.accumulated is None
    assert not approach.is_side_point
