"""
模型目录与一维映射预言机测试
"""

import math

import numpy as np
import pytest

from shadowlab.errors import ConfigurationError
from shadowlab.models import (
    LorenzMapOracle,
    is_lorenz_like,
    itinerary_cylinder,
    lorenz,
    lorenz_like_frame,
    make_model,
    oracle_fixed_point,
    oracle_iterate,
    singularity_spectrum,
)
from shadowlab.models.oracle import SQRT2


class TestCatalog:
    def test_make_model_accepts_hyphenated_names(self):
        spec = make_model("limit-cycle", a=2.0)
        assert spec.name == "limit_cycle"
        assert spec.params == {"a": 2.0}

    @pytest.mark.parametrize(
        "name, params",
        [
            ("nope", {}),
            ("lorenz", {"foo": 1.0}),
            ("lorenz", {"rho": 0.5}),
            ("saddle", {"lu": -1.0}),
            ("linear", {"matrix": [[1.0, 0.0], [0.0, 1.0]]}),
        ],
    )
    def test_make_model_rejects_bad_input(self, name, params):
        with pytest.raises(ConfigurationError):
            make_model(name, **params)

    def test_lorenz_origin_is_lorenz_like(self, lorenz_spec):
        origin, c_plus, c_minus = lorenz_spec.singularities
        assert is_lorenz_like(lorenz_spec, origin)
        # C± 处的特征值含复数对
        assert not is_lorenz_like(lorenz_spec, c_plus)
        assert not is_lorenz_like(lorenz_spec, c_minus)

    def test_saddle_fails_the_expansion_condition(self, saddle_spec):
        # λu + λs = 1 − 2 < 0
        assert not is_lorenz_like(saddle_spec, np.zeros(3))

    def test_lorenz_frame_matches_spectrum(self, lorenz_spec):
        values, _ = singularity_spectrum(lorenz_spec, np.zeros(3))
        frame = lorenz_like_frame(lorenz_spec, np.zeros(3))
        np.testing.assert_allclose(frame["eigenvalues"], values.real)
        assert frame["eigenvalues"][1] == pytest.approx(-8.0 / 3.0)
        J = lorenz_spec.jacobian(np.zeros(3))
        for key, value in zip(("strong_stable", "weak_stable", "unstable"), values.real):
            v = frame[key]
            assert np.linalg.norm(v) == pytest.approx(1.0)
            np.testing.assert_allclose(J @ v, value * v, atol=1e-10)

    def test_lorenz_c_plus_location(self):
        spec = lorenz(rho=28.0, beta=8.0 / 3.0)
        c = math.sqrt(8.0 / 3.0 * 27.0)
        np.testing.assert_allclose(spec.singularities[1], [c, c, 27.0])


class TestOracle:
    @pytest.mark.parametrize("c, alpha", [(1.0, 0.5), (2.5, 0.8), (1.8, 0.0)])
    def test_rejects_parameters_outside_the_expanding_range(self, c, alpha):
        with pytest.raises(ConfigurationError):
            LorenzMapOracle(c=c, alpha=alpha)

    def test_one_sided_limits_at_the_discontinuity(self):
        oracle = LorenzMapOracle()
        assert oracle.f(0.0, side=-1) == 1.0
        assert oracle.f(0.0, side=1) == -1.0
        with pytest.raises(ValueError):
            oracle(0.0)

    def test_derivative_is_uniformly_expanding(self):
        oracle = LorenzMapOracle(c=1.8, alpha=0.8)
        xs = np.linspace(-1.0, 1.0, 201)
        xs = xs[xs != 0.0]
        assert min(oracle.derivative(float(x)) for x in xs) >= SQRT2 - 1e-12
        assert oracle.derivative(0.0) == math.inf

    def test_iterate_records_itinerary(self):
        oracle = LorenzMapOracle()
        it = oracle_iterate(oracle, 0.3, 5)
        assert len(it.values) == 6
        assert len(it.symbols) == 5
        assert it.word()[0] == "+"
        assert not it.boundary
        for x, fx in zip(it.values, it.values[1:]):
            assert fx == pytest.approx(oracle.f(x))

    def test_iterate_stops_on_the_boundary(self):
        it = oracle_iterate(LorenzMapOracle(), 0.0, 5)
        assert it.boundary
        assert it.boundary_step == 0
        assert it.values == []

    def test_iterate_rejects_points_outside_the_interval(self):
        with pytest.raises(ValueError):
            oracle_iterate(LorenzMapOracle(), 1.5, 3)

    def test_fixed_points_of_the_tent_like_map(self):
        oracle = LorenzMapOracle(c=2.0, alpha=1.0)
        assert oracle_fixed_point(oracle, 1) == pytest.approx(1.0)
        assert oracle_fixed_point(oracle, -1) == pytest.approx(-1.0)

    def test_fixed_point_absent_on_both_branches(self):
        # c=1.8, α=0.8 时两支上 f(x) − x 都不变号
        oracle = LorenzMapOracle(c=1.8, alpha=0.8)
        assert oracle_fixed_point(oracle, 1) is None
        assert oracle_fixed_point(oracle, -1) is None

    def test_single_symbol_cylinder_is_a_half_interval(self):
        lo, hi = itinerary_cylinder(LorenzMapOracle(), [1], subdivisions=64)
        assert 0.0 < lo < hi
        assert hi == 1.0
