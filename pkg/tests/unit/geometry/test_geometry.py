"""
截面几何测试：吸引子样本、稳定方向、单侧/双侧分类与横截矩形
"""

import numpy as np
import pytest

from shadowlab.errors import GeometryError
from shadowlab.geometry import (
    AttractorSample,
    CrossSection,
    SideVerdict,
    build_singular_sections,
    check_transversality,
    bi_side_invariance_audit,
    classify_side,
    estimate_stable_direction,
    exit_side,
    line_angle_deg,
    load_point_cloud,
    locate_l_star,
    radius_halving_audit,
    radius_schedule,
    sample_attractor,
    save_point_cloud,
)
from shadowlab.geometry.sides import decide_side
from shadowlab.models import linear

E1, E2, E3 = np.eye(3)


@pytest.fixture
def saddle_section():
    # 平面 x=1 上的矩形，横叶方向为不稳定方向 e3
    return CrossSection(
        name="t",
        center=np.array([1.0, 0.0, 0.0]),
        normal=E1.copy(),
        axes=np.vstack([E3, E2]),
        half_extent=np.array([0.5, 0.5]),
    )


class TestAttractorSample:
    def test_neighbourhood_queries(self):
        points = np.array([[0.0, 0.0, 0.0], [0.1, 0.0, 0.0], [1.0, 1.0, 1.0]])
        sample = AttractorSample(points=points, times=[0.0, 1.0, 2.0])
        assert len(sample) == 3
        assert sample.count_within(np.zeros(3), 0.5) == 2
        assert sample.indices_within(np.zeros(3), 0.5).tolist() == [0, 1]
        np.testing.assert_allclose(sample.nearest_distance([[0.0, 0.3, 0.0]]), [0.3])
        queries = np.array([[0.1, 0.0, 0.0005], [0.5, 0.5, 0.5], [0.1, 0.0005, 0.0]])
        assert sample.snap(queries, 1e-3).tolist() == [1]

    def test_empty_sample(self):
        sample = AttractorSample(points=np.zeros((0, 3)), times=[])
        assert sample.count_within(np.zeros(3), 1.0) == 0
        assert np.isinf(sample.nearest_distance(np.zeros(3))[0])
        assert sample.snap(np.zeros((1, 3)), 1.0).tolist() == []

    def test_limit_cycle_sample_lies_on_the_circle(self, cycle_spec):
        sample = sample_attractor(cycle_spec, [0.5, 0.0, 0.2], transient=20.0, duration=2 * np.pi, count=100, seed=4)
        radii = np.linalg.norm(sample.points[:, :2], axis=1)
        np.testing.assert_allclose(radii, 1.0, atol=1e-6)
        assert np.max(np.abs(sample.points[:, 2])) < 1e-6
        assert sample.metadata["seed"] == 4
        assert sample.trajectory.T == pytest.approx(2 * np.pi)

    @pytest.mark.parametrize("kwargs", [{"transient": -1.0}, {"duration": 0.0}, {"count": 0}])
    def test_sample_attractor_rejects_bad_parameters(self, cycle_spec, kwargs):
        with pytest.raises(ValueError):
            sample_attractor(cycle_spec, [1.0, 0.0, 0.0], **kwargs)

    def test_point_cloud_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        sample = AttractorSample(
            points=rng.random((20, 3)), times=np.linspace(0.0, 5.0, 20), metadata={"duration": 5.0}
        )
        path = save_point_cloud(sample, tmp_path / "cloud.bin")
        loaded = load_point_cloud(path)
        np.testing.assert_array_equal(loaded.points, sample.points)
        np.testing.assert_allclose(loaded.times, sample.times)
        assert loaded.metadata["count"] == 20

    def test_point_cloud_rejects_corrupt_files(self, tmp_path):
        bad_magic = tmp_path / "bad.bin"
        bad_magic.write_bytes(b"XXXX\x00\x00\x00\x00")
        with pytest.raises(ValueError):
            load_point_cloud(bad_magic)

        sample = AttractorSample(points=np.ones((4, 3)), times=np.arange(4.0))
        path = save_point_cloud(sample, tmp_path / "cut.bin")
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValueError):
            load_point_cloud(path)


class TestStableDirection:
    def test_saddle_strongest_contraction(self, saddle_spec, x0):
        estimate = estimate_stable_direction(saddle_spec, x0, horizon=1.0)
        assert estimate.converged
        assert line_angle_deg(estimate.direction, E2) < 1e-3
        assert estimate.contrast == pytest.approx(np.exp(2.0), rel=1e-5)

    def test_line_angle_ignores_orientation(self):
        assert line_angle_deg(E1, -E1) == pytest.approx(0.0, abs=1e-6)
        assert line_angle_deg(E1, E2) == pytest.approx(90.0)

    def test_rejects_nonpositive_horizon(self, saddle_spec, x0):
        with pytest.raises(ValueError):
            estimate_stable_direction(saddle_spec, x0, horizon=0.0)


class TestSides:
    def test_radius_schedule_halves(self):
        assert radius_schedule(0.1, 3) == [0.1, 0.05, 0.025]

    @pytest.mark.parametrize(
        "counts, expected",
        [
            ([[0, 0], [0, 0]], (SideVerdict.NEITHER, None)),
            ([[6, 0], [5, 0]], (SideVerdict.SIDE, 1)),
            ([[0, 7], [0, 5]], (SideVerdict.SIDE, -1)),
            ([[5, 5], [6, 6]], (SideVerdict.BI_SIDE, None)),
            ([[5, 1], [3, 0]], (SideVerdict.INCONCLUSIVE, None)),
        ],
    )
    def test_decide_side(self, counts, expected):
        assert decide_side(counts, threshold=5) == expected

    @staticmethod
    def _offsets(x, direction, signs):
        rs = np.linspace(0.001, 0.009, 10)
        return np.array([x + sign * r * direction for sign in signs for r in rs])

    def test_one_sided_and_two_sided_samples(self, saddle_spec):
        # x 处流方向为 e3，稳定方向取 e1，分割平面法向为 e1×e3 = −e2
        x = np.array([0.0, 0.0, 0.5])
        one_sided = AttractorSample(points=self._offsets(x, E2, [1]), times=np.arange(10.0))
        result = classify_side(saddle_spec, x, one_sided, eps=0.08, stable_direction=E1)
        np.testing.assert_allclose(result.normal, -E2)
        assert result.verdict is SideVerdict.SIDE
        assert result.component == -1
        assert result.counts == [[0, 10]] * 4

        two_sided = AttractorSample(points=self._offsets(x, E2, [1, -1]), times=np.arange(20.0))
        result = classify_side(saddle_spec, x, two_sided, eps=0.08, stable_direction=E1)
        assert result.verdict is SideVerdict.BI_SIDE
        assert result.to_dict()["verdict"] == "bi-side"

    def test_point_away_from_sample_is_neither(self, saddle_spec):
        sample = AttractorSample(points=np.ones((5, 3)), times=np.arange(5.0))
        result = classify_side(saddle_spec, [0.0, 0.0, 0.5], sample, eps=0.1, stable_direction=E1)
        assert result.verdict is SideVerdict.NEITHER
        assert result.normal is None

    def test_stable_direction_along_flow_is_inconclusive(self, saddle_spec):
        x = np.array([0.0, 0.0, 0.5])
        sample = AttractorSample(points=[x + 0.001 * E1], times=[0.0])
        result = classify_side(saddle_spec, x, sample, eps=0.1, stable_direction=E3)
        assert result.verdict is SideVerdict.INCONCLUSIVE

    @staticmethod
    def _split_sample(x, near, far):
        # 估计的稳定方向为 e2，x 处分割平面法向为 ±e1
        points = np.vstack([x + near[:, None] * E1, x - far[:, None] * E1])
        return AttractorSample(points=points, times=np.arange(float(len(points))))

    def test_bi_side_audit_counts_every_lost_bi_side(self, saddle_spec):
        x = np.array([0.0, 0.0, 0.5])
        sample = self._split_sample(x, np.linspace(0.001, 0.009, 10), np.linspace(0.001, 0.009, 10))
        audit = bi_side_invariance_audit(saddle_spec, [x], sample, eps=0.08, times=(1.0,))
        # X_1(x) 离开样本，结论为 neither，也算违例
        assert audit["checked"] == 1
        assert audit["violations"] == 1
        assert audit["by_verdict"] == {"neither": 1}
        assert audit["details"][0]["verdicts"] == {"1.0": "neither"}

    def test_radius_halving_keeps_side_verdicts(self, saddle_spec):
        x = np.array([0.0, 0.0, 0.5])
        sample = self._split_sample(x, np.linspace(0.001, 0.009, 10), np.zeros(0))
        audit = radius_halving_audit(saddle_spec, [x], sample, eps=0.08, halvings=1)
        assert audit["checked"] == 1
        assert audit["violations"] == 0
        assert audit["details"][0]["verdicts"] == ["side", "side"]

    def test_radius_halving_reports_bi_side_turning_side(self, saddle_spec):
        x = np.array([0.0, 0.0, 0.5])
        # 负侧样本只在 (ε/2, ε] 内
        sample = self._split_sample(x, np.linspace(0.001, 0.009, 10), np.linspace(0.045, 0.075, 5))
        audit = radius_halving_audit(saddle_spec, [x], sample, eps=0.08, halvings=1, n_radii=1)
        assert audit["details"][0]["verdicts"] == ["bi-side", "side"]
        assert audit["bi_side_to_side"] == 1
        assert audit["violations"] == 0


class TestSections:
    def test_rectangle_coordinates(self, saddle_section):
        p = saddle_section.point(0.2, -0.1)
        np.testing.assert_allclose(p, [1.0, -0.1, 0.2])
        np.testing.assert_allclose(saddle_section.coordinates(p), [0.2, -0.1, 0.0])
        assert saddle_section.distance([2.0, 0.0, 0.0]) == pytest.approx(1.0)
        assert saddle_section.distance([1.0, 0.0, 0.8]) == pytest.approx(0.3)
        assert saddle_section.component(saddle_section.point(-0.1, 0.0)) == "l"
        assert saddle_section.component(saddle_section.point(0.1, 0.0)) == "r"
        assert len(saddle_section.grid(3)) == 9

    def test_transversality(self, saddle_spec, saddle_section):
        # 平面 x=1 上 ⟨X, e1⟩ = −2
        assert check_transversality(saddle_spec, saddle_section, floor=1.0) == pytest.approx(2.0)
        with pytest.raises(GeometryError):
            check_transversality(saddle_spec, saddle_section, floor=3.0)

    def test_exit_side_follows_unstable_coordinate(self, saddle_spec):
        sigma = np.zeros(3)
        assert exit_side(saddle_spec, np.array([1.0, 0.0, 0.5]), sigma, E3, 1.0, 3.0) == 1
        assert exit_side(saddle_spec, np.array([1.0, 0.0, -0.5]), sigma, E3, 1.0, 3.0) == -1
        assert exit_side(saddle_spec, np.array([1.0, 0.0, 0.0]), sigma, E3, 1.0, 3.0) == 0

    def test_l_star_is_the_stable_manifold(self, saddle_spec, saddle_section):
        u_star = locate_l_star(saddle_spec, saddle_section, np.zeros(3), E3, exit_radius=1.0, horizon=3.0)
        assert u_star == 0.0

    def test_l_star_requires_a_bracket(self, saddle_spec, saddle_section):
        shifted = CrossSection(
            name="b",
            center=np.array([1.0, 0.0, 0.3]),
            normal=E1.copy(),
            axes=np.vstack([E3, E2]),
            half_extent=np.array([0.2, 0.2]),
        )
        with pytest.raises(GeometryError):
            locate_l_star(saddle_spec, shifted, np.zeros(3), E3, exit_radius=1.0, horizon=3.0)

    def test_singular_sections_need_lorenz_like_point(self, saddle_spec, lorenz_spec):
        with pytest.raises(GeometryError):
            build_singular_sections(saddle_spec, np.zeros(3))
        with pytest.raises(GeometryError):
            build_singular_sections(lorenz_spec, np.zeros(3), offset=0.0)

    def test_l_star_must_reach_the_gamma_ball(self):
        # 线性 Lorenz 型鞍点：l* 为 z=0，沿弱稳定方向以速率 0.5 趋向 σ
        spec = linear(np.diag([-3.0, -0.5, 1.0]))
        kwargs = dict(offset=1.0, extents=(0.5, 0.5), horizon=5.0, leaf_grid=2, leaf_nodes=1)
        pair = build_singular_sections(spec, np.zeros(3), gamma=0.5, **kwargs)
        assert abs(pair.top.l_star) < 1e-6
        assert abs(pair.bottom.l_star) < 1e-6
        with pytest.raises(GeometryError, match="B_γ"):
            build_singular_sections(spec, np.zeros(3), gamma=1e-3, **kwargs)
