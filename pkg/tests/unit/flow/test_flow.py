"""
流核心测试：积分、负时间流映射、轨道截取与切映射
"""

import numpy as np
import pytest
from scipy.linalg import expm

from shadowlab.errors import DomainError, EscapedError
from shadowlab.flow import (
    fundamental_matrix,
    flow_map,
    integrate,
    jacobian_check,
    orbit_window,
    propagate_frame,
    singularity_residuals,
    step_doubling_error,
)
from shadowlab.models import linear


def test_integrate_linear_saddle_matches_closed_form(saddle_spec):
    traj = integrate(saddle_spec, [1.0, 1.0, 1.0], 1.0)
    expected = np.array([np.exp(-2.0), np.exp(-3.0), np.exp(1.0)])
    assert traj.T == 1.0
    np.testing.assert_allclose(traj.endpoint, expected, rtol=1e-7)


def test_integrate_zero_time_returns_single_node(saddle_spec, x0):
    traj = integrate(saddle_spec, x0, 0.0)
    assert len(traj) == 1
    np.testing.assert_array_equal(traj.endpoint, x0)
    np.testing.assert_array_equal(traj.sample([0.0])[0], x0)


def test_integrate_rejects_negative_time(saddle_spec, x0):
    with pytest.raises(ValueError):
        integrate(saddle_spec, x0, -1.0)


def test_integrate_reports_escape(saddle_spec):
    # 不稳定方向 e^t 增长，t≈9.2 超过 1e4
    with pytest.raises(EscapedError) as info:
        integrate(saddle_spec, [0.0, 0.0, 1.0], 20.0)
    assert 0.0 < info.value.last_time < 20.0


def test_flow_map_negative_time_uses_reversed_field(saddle_spec):
    x = np.array([1.0, 1.0, 1.0])
    back = flow_map(saddle_spec, x, -0.5)
    np.testing.assert_allclose(back, [np.exp(1.0), np.exp(1.5), np.exp(-0.5)], rtol=1e-7)
    np.testing.assert_allclose(flow_map(saddle_spec, back, 0.5), x, rtol=1e-7)


def test_orbit_window_returns_both_directions(saddle_spec, x0):
    backward, forward = orbit_window(saddle_spec, x0, 0.3, 0.7)
    assert backward.T == pytest.approx(0.3)
    assert forward.T == pytest.approx(0.7)
    np.testing.assert_array_equal(backward.x0, forward.x0)


def test_sample_at_nodes_is_exact(cycle_spec):
    traj = integrate(cycle_spec, [1.0, 0.0, 0.5], 2.0)
    np.testing.assert_array_equal(traj.sample(traj.times), traj.states)


def test_sample_outside_range_raises(saddle_spec, x0):
    traj = integrate(saddle_spec, x0, 1.0)
    with pytest.raises(DomainError):
        traj.sample([1.5])
    with pytest.raises(DomainError):
        traj.flow_at(-0.1)


def test_segment_view_starts_at_interior_state(cycle_spec):
    traj = integrate(cycle_spec, [1.0, 0.0, 0.5], 3.0)
    seg = traj.segment(0.4, 1.9)
    assert seg.T == pytest.approx(1.5)
    np.testing.assert_allclose(seg.x0, traj.flow_at(0.4), atol=1e-12)
    np.testing.assert_allclose(seg.flow_at(1.0), traj.flow_at(1.4), atol=1e-12)
    with pytest.raises(DomainError):
        traj.segment(2.0, 1.0)


def test_jacobian_check_on_catalog_models(lorenz_spec, saddle_spec, cycle_spec):
    for spec in (lorenz_spec, saddle_spec, cycle_spec):
        assert jacobian_check(spec, n=20, seed=1) < 1e-6


def test_singularity_residuals_vanish(lorenz_spec):
    residuals = singularity_residuals(lorenz_spec)
    assert len(residuals) == 3
    assert np.all(residuals < 1e-12)


def test_fundamental_matrix_of_linear_field_is_matrix_exponential():
    A = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, -0.5]])
    spec = linear(A)
    traj = integrate(spec, [1.0, 0.0, 1.0], 1.0)
    phi = fundamental_matrix(spec, traj)[0]
    np.testing.assert_allclose(phi, expm(A), rtol=1e-6, atol=1e-8)


def test_propagate_frame_is_linear_in_initial_vectors(saddle_spec, x0):
    traj = integrate(saddle_spec, x0, 1.0)
    v = np.array([1.0, 1.0, 1.0])
    single = propagate_frame(saddle_spec, traj, v)
    double = propagate_frame(saddle_spec, traj, 2.0 * v)
    assert single.k == 1
    np.testing.assert_allclose(double.final(), 2.0 * single.final(), rtol=1e-12)
    np.testing.assert_allclose(single.final()[0], [np.exp(-2.0), np.exp(-3.0), np.exp(1.0)], rtol=1e-6)


def test_propagate_frame_rejects_bad_frames(saddle_spec, x0):
    traj = integrate(saddle_spec, x0, 0.5)
    with pytest.raises(ValueError):
        propagate_frame(saddle_spec, traj, np.eye(3))
    with pytest.raises(ValueError):
        propagate_frame(saddle_spec, traj, np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]))


def test_step_doubling_consistency(saddle_spec, x0):
    assert step_doubling_error(saddle_spec, x0, 2.0) < 10.0
