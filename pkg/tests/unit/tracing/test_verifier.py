"""
追踪验证器测试
"""

import numpy as np
import pytest

from shadowlab.chains import build_perturbed_chain, chain_from_orbit
from shadowlab.geometry import AttractorSample
from shadowlab.models import limit_cycle
from shadowlab.tracing import (
    TraceBudget,
    TraceClass,
    TraceVerdict,
    delta_sweep,
    implication_audit,
    parse_trace_class,
    recheck_certificate,
    verdict_class_ok,
    verify_trace,
)


@pytest.fixture
def small_budget():
    return TraceBudget(refine_depth=2, refine_points=4)


@pytest.fixture
def orbit_chain(saddle_spec, x0):
    return chain_from_orbit(saddle_spec, x0, [0.5, 0.5])


@pytest.mark.parametrize("trace_class", ["weak", "normal", "strong"])
def test_true_orbit_is_traced_with_certificate(orbit_chain, x0, small_budget, trace_class):
    verdict = verify_trace(
        orbit_chain, 0.05, trace_class, candidates=[x0], eps_rep=0.1, budget=small_budget, seed=0
    )
    assert verdict.traced
    assert verdict.state == "traced"
    assert verdict.achieved_error <= 0.05
    assert verdict.refinement_depth == 2
    assert verdict.candidate_count == 1 + 2 * 4
    assert verdict_class_ok(verdict)
    assert verdict.witness_in_class
    assert recheck_certificate(orbit_chain, verdict) <= 0.05 + verdict.modulus + 1e-6


def test_distant_candidate_is_not_traced(orbit_chain, x0):
    budget = TraceBudget(refine_depth=0)
    verdict = verify_trace(orbit_chain, 0.05, candidates=[-x0], budget=budget)
    assert not verdict.traced
    assert verdict.state == "not-traced"
    assert verdict.achieved_error >= np.linalg.norm(2 * x0) - 1e-9
    assert not verdict.inconclusive


def test_perturbed_chain_on_saddle_is_traced(saddle_spec, x0, small_budget):
    chain = build_perturbed_chain(saddle_spec, x0, [0.5, 0.5, 0.5], noise=0.005, seed=11)
    verdict = verify_trace(chain, 0.05, candidates=[x0], budget=small_budget, seed=1)
    assert verdict.traced
    assert verdict.delta == pytest.approx(0.01)


def test_verdict_round_trip(orbit_chain, x0, small_budget):
    verdict = verify_trace(orbit_chain, 0.05, "strong", candidates=[x0], eps_rep=0.1, budget=small_budget, seed=0)
    data = verdict.to_dict()
    assert data["class"] == "strong"
    restored = TraceVerdict.from_dict(data)
    assert restored.trace_class is TraceClass.STRONG
    assert restored.state == verdict.state
    assert restored.witness_in_class is verdict.witness_in_class
    np.testing.assert_array_equal(restored.best_z, verdict.best_z)
    np.testing.assert_array_equal(restored.grid_times, verdict.grid_times)
    assert recheck_certificate(orbit_chain, restored) == pytest.approx(recheck_certificate(orbit_chain, verdict))


def test_witness_outside_class_revokes_traced(orbit_chain, x0, small_budget, monkeypatch):
    import shadowlab.tracing.verifier as verifier

    monkeypatch.setattr(verifier, "verdict_class_ok", lambda verdict: False)
    verdict = verify_trace(orbit_chain, 0.05, "normal", candidates=[x0], budget=small_budget, seed=0)
    assert verdict.achieved_error <= 0.05
    assert not verdict.witness_in_class
    assert not verdict.traced
    assert verdict.state != "traced"


def test_missing_witness_fails_checks(orbit_chain):
    verdict = TraceVerdict(
        eps=0.1,
        trace_class=TraceClass.WEAK,
        best_z=None,
        best_g=None,
        achieved_error=float("inf"),
        traced=False,
        candidate_count=0,
    )
    assert not verdict_class_ok(verdict)
    assert recheck_certificate(orbit_chain, verdict) == float("inf")
    assert verdict.to_dict()["achieved_error"] is None


def test_attractor_sample_supplies_candidates(cycle_spec):
    chain = chain_from_orbit(cycle_spec, [1.0, 0.0, 0.0], [1.0])
    angles = np.linspace(0.0, 2.0 * np.pi, 50, endpoint=False)
    points = np.column_stack([np.cos(angles), np.sin(angles), np.zeros_like(angles)])
    sample = AttractorSample(points=points, times=angles)
    verdict = verify_trace(chain, 0.05, sample=sample, budget=TraceBudget(refine_depth=0, subsample=10))
    assert verdict.traced
    assert verdict.candidate_source.startswith("attractor-sample")


@pytest.mark.parametrize(
    "kwargs",
    [
        {"eps": 0.0, "candidates": [[0.0, 0.0, 0.0]]},
        {"eps": 0.1},
        {"eps": 0.1, "candidates": [[0.0, 0.0, 0.0]], "trace_class": "bogus"},
    ],
)
def test_verify_trace_rejects_bad_arguments(orbit_chain, kwargs):
    with pytest.raises(ValueError):
        verify_trace(orbit_chain, **kwargs)


def test_parse_trace_class():
    assert parse_trace_class("normal") is TraceClass.NORMAL
    assert parse_trace_class(TraceClass.WEAK) is TraceClass.WEAK
    with pytest.raises(ValueError):
        parse_trace_class("medium")


def test_implication_audit_is_monotone(saddle_spec, x0):
    chain = build_perturbed_chain(saddle_spec, x0, [0.5, 0.5], noise=0.01, seed=2)
    candidates = [x0, x0 + np.array([0.01, 0.0, 0.0]), x0 + np.array([0.0, 0.0, 0.01])]
    audit = implication_audit(chain, 0.05, candidates, eps_rep=0.1)
    assert len(audit.rows) == 3
    assert audit.violations == 0
    for row in audit.rows:
        assert row.weak == row.normal
    assert audit.to_dict()["violations"] == 0


def test_implication_audit_allows_grid_slack_for_identity_class(saddle_spec, x0):
    chain = build_perturbed_chain(saddle_spec, x0, [0.5, 0.5], noise=0.01, seed=2)
    audit = implication_audit(chain, 0.05, [x0, x0 + np.array([0.01, 0.0, 0.0])], eps_rep=0.0)
    assert audit.violations == 0
    assert all(row.slack > 0 for row in audit.rows)


def test_delta_sweep_estimates_largest_traced_delta(saddle_spec, x0, small_budget):
    def builder(delta):
        return build_perturbed_chain(saddle_spec, x0, [0.5, 0.5], noise=delta / 2.0, seed=5)

    sweep = delta_sweep(
        saddle_spec, 0.05, 0.5, [0.02, 0.002], builder, candidates=[x0], budget=small_budget, seed=0
    )
    assert [row.delta for row in sweep.rows] == [0.02, 0.002]
    assert all(row.all_traced for row in sweep.rows)
    assert sweep.delta_estimate == 0.02
    assert sweep.to_dict()["delta_estimate"] == 0.02


@pytest.mark.parametrize("deltas", [[], [0.01, 0.01], [0.001, 0.01]])
def test_delta_sweep_rejects_bad_schedules(saddle_spec, x0, deltas):
    with pytest.raises(ValueError):
        delta_sweep(saddle_spec, 0.05, 0.5, deltas, lambda d: chain_from_orbit(saddle_spec, x0, [0.5]))


def test_delta_sweep_rejects_foreign_chains(saddle_spec):
    other = limit_cycle()
    with pytest.raises(ValueError):
        delta_sweep(
            saddle_spec, 0.05, 0.5, [0.01], lambda d: chain_from_orbit(other, [1.0, 0.0, 0.0], [0.5]),
            candidates=[[1.0, 0.0, 0.0]],
        )


def test_restricted_search_uses_only_sample_points(orbit_chain, x0):
    far = np.array([[-0.5, -0.5, -0.1], [-0.4, -0.5, -0.1], [-0.5, -0.4, -0.1]])
    sample = AttractorSample(points=far, times=[0.0, 1.0, 2.0])
    restricted = TraceBudget(refine_depth=2, refine_points=8, restrict_to_attractor=True)
    verdict = verify_trace(orbit_chain, 0.05, sample=sample, budget=restricted, seed=0)
    assert not verdict.traced
    assert verdict.candidate_source.endswith("restricted)")
    assert any(np.array_equal(verdict.best_z, p) for p in far)

    open_budget = TraceBudget(refine_depth=0)
    verdict = verify_trace(orbit_chain, 0.05, sample=sample, budget=open_budget, seed=0)
    assert verdict.traced
    np.testing.assert_array_equal(verdict.best_z, x0)


def test_restricted_refinement_snaps_to_sample_points():
    from shadowlab.tracing.verifier import refinement_cloud

    points = np.array([[0.0, 0.0, 0.0], [0.05, 0.0, 0.0], [5.0, 5.0, 5.0]])
    sample = AttractorSample(points=points, times=[0.0, 0.5, 1.0])
    budget = TraceBudget(refine_points=16, restrict_to_attractor=True, resolution=1.0)
    cloud = refinement_cloud(np.zeros(3), 0.05, 0, budget, np.random.default_rng(0), sample)
    assert 1 <= len(cloud) <= 2
    for candidate in cloud:
        assert any(np.array_equal(candidate.z, p) for p in points[:2])
        assert candidate.sample_time in (0.0, 0.5)

    budget = TraceBudget(refine_points=16, restrict_to_attractor=True, resolution=1e-9)
    assert refinement_cloud(np.zeros(3), 0.05, 0, budget, np.random.default_rng(0), sample) == []
