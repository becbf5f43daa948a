"""
重参数化测试
"""

import numpy as np
import pytest

from shadowlab.tracing import Reparametrization, classify, rep_eval


def test_identity_and_linear():
    identity = Reparametrization.identity()
    np.testing.assert_allclose(identity(np.array([-2.0, 0.0, 3.5])), [-2.0, 0.0, 3.5])
    assert Reparametrization.linear(2.0)(1.5) == 3.0


def test_eval_interpolates_and_extrapolates():
    g = Reparametrization.from_pairs([(0.0, 0.0), (1.0, 2.0), (3.0, 3.0)], left_slope=0.5, right_slope=4.0)
    assert rep_eval(g, 0.5) == pytest.approx(1.0)
    assert rep_eval(g, 2.0) == pytest.approx(2.5)
    assert rep_eval(g, -2.0) == pytest.approx(-1.0)
    assert rep_eval(g, 4.0) == pytest.approx(7.0)
    np.testing.assert_allclose(g.segment_slopes(), [0.5, 2.0, 0.5, 4.0])


@pytest.mark.parametrize(
    "breakpoints, values, left, right",
    [
        ([0.0, 0.0], [0.0, 1.0], 1.0, 1.0),
        ([0.0, 1.0], [0.0], 1.0, 1.0),
        ([0.0, 1.0], [0.0, 1.0], -1.0, 1.0),
    ],
)
def test_rejects_malformed_functions(breakpoints, values, left, right):
    with pytest.raises(ValueError):
        Reparametrization(np.array(breakpoints), np.array(values), left, right)


def test_classes_are_nested():
    g = Reparametrization.from_pairs([(0.0, 0.0), (1.0, 1.05), (2.0, 2.0)])
    classes = classify(g, 0.1)
    assert classes.in_rep and classes.in_rep_star and classes.in_rep_eps
    assert not classify(g, 0.01).in_rep_eps
    assert classify(g, 0.01).in_rep_star


def test_flat_end_is_rep_but_not_rep_star():
    g = Reparametrization.from_pairs([(0.0, 0.0), (1.0, 1.0)], right_slope=0.0)
    classes = classify(g, 5.0)
    assert classes.in_rep
    assert not classes.in_rep_star
    assert not classes.in_rep_eps


def test_non_monotone_or_unanchored_functions_fail():
    decreasing = Reparametrization.from_pairs([(0.0, 0.0), (1.0, 1.0), (2.0, 0.5)])
    assert not classify(decreasing, 10.0).in_rep
    shifted = Reparametrization.from_pairs([(0.0, 0.5), (1.0, 1.5)])
    assert not classify(shifted, 10.0).in_rep
    no_zero = Reparametrization.from_pairs([(0.5, 0.5), (1.0, 1.0)])
    assert not classify(no_zero, 10.0).in_rep


def test_boundary_slope_counts_as_inside():
    g = Reparametrization.from_pairs([(0.0, 0.0), (10.0, 11.0)])
    assert classify(g, 0.1).in_rep_eps


def test_classify_rejects_negative_eps():
    with pytest.raises(ValueError):
        classify(Reparametrization.identity(), -0.1)


def test_dict_round_trip():
    g = Reparametrization.from_pairs([(0.0, 0.0), (1.0, 2.0)], left_slope=0.25, right_slope=3.0)
    restored = Reparametrization.from_dict(g.to_dict())
    np.testing.assert_array_equal(restored.breakpoints, g.breakpoints)
    np.testing.assert_array_equal(restored.values, g.values)
    assert restored.left_slope == 0.25
    assert restored.right_slope == 3.0
