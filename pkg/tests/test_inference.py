import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from rootest.basis import ContinuousBasis
from rootest.estimator import solve
from rootest.inference import (ALPHA_LEVELS, InferenceError, RealStateChart, SingularChartError, chi2_cdf,
                               chi2_quantile, chi2_sf, confidence_cone, covariance, fisher_matrix_closed_form,
                               fisher_matrix_quadrature, homogeneity_test, state_equality_test)
from rootest.sampling import random_state, sample_coordinate
from rootest.state import StateVector


@pytest.mark.parametrize("dof", [1, 2, 3, 4, 7, 20, 100, 511])
def test_chi2_sf_vs_scipy(dof):
    q = np.concatenate([np.linspace(0.01, 3 * dof + 40, 60), [dof, dof + 1e-3]])
    for v in q:
        assert chi2_sf(v, dof) == pytest.approx(stats.chi2.sf(v, dof), rel=1e-10, abs=1e-300)
        assert chi2_cdf(v, dof) == pytest.approx(stats.chi2.cdf(v, dof), rel=1e-10, abs=1e-14)


def test_quantile_values():
    assert chi2_quantile(1, 0.05) == pytest.approx(3.84146, abs=1e-4)
    assert chi2_quantile(2, 0.05) == pytest.approx(-2 * math.log(0.05), abs=1e-12)
    assert chi2_quantile(4, 0.05) == pytest.approx(stats.chi2.isf(0.05, 4), rel=1e-12)


@given(st.integers(1, 600), st.sampled_from([0.5, 0.1, 0.05, 0.01, 0.001, 1e-6]))
@settings(max_examples=120, deadline=None)
def test_quantile_round_trip(dof, alpha):
    q = chi2_quantile(dof, alpha)
    assert chi2_sf(q, dof) == pytest.approx(alpha, abs=1e-9)


def test_quantile_domain():
    with pytest.raises(InferenceError):
        chi2_quantile(0, 0.05)
    with pytest.raises(InferenceError):
        chi2_quantile(3, 1.0)


def test_survival_at_four():
    assert chi2_sf(4.0, 4) == pytest.approx(0.40600584970983811, rel=1e-12)


def test_fisher_closed_form_cases():
    np.testing.assert_allclose(fisher_matrix_closed_form(RealStateChart([0.0]), 1).entries, [[4.0]])
    np.testing.assert_allclose(fisher_matrix_closed_form(RealStateChart([0.6, 0.0]), 1).entries,
                               [[6.25, 0], [0, 4]], atol=1e-14)


def test_singular_chart():
    with pytest.raises(SingularChartError):
        RealStateChart([1.0, 0.0]).c0
    with pytest.raises(SingularChartError):
        fisher_matrix_closed_form(RealStateChart([0.6, 0.8]), 10)


@pytest.mark.parametrize("seed", range(8))
def test_fisher_quadrature_matches_closed_form(seed):
    rng = np.random.default_rng(seed)
    s = int(rng.integers(2, 9))
    c = random_state(s, seed, real=True).coefficients.real
    chart = RealStateChart.from_state(StateVector(c))
    closed = fisher_matrix_closed_form(chart, 37).entries
    assert np.all(np.linalg.eigvalsh(closed) > 0)
    for scale in (0.5, 1.0, 3.0):
        quad = fisher_matrix_quadrature(chart, ContinuousBasis(s, scale), 37)
        np.testing.assert_allclose(quad, closed, rtol=1e-10, atol=1e-10)
    at_origin = fisher_matrix_quadrature(RealStateChart(np.zeros(s - 1)), ContinuousBasis(s), 5)
    np.testing.assert_allclose(at_origin, 20 * np.eye(s - 1), atol=1e-12)


def test_covariance_real():
    cov = covariance(StateVector([1, 0, 0, 0]), 1)
    np.testing.assert_allclose(cov.entries, np.diag([0, 0.25, 0.25, 0.25]))
    sv = random_state(6, 3, real=True)
    cov = covariance(sv, 200).entries
    ev, vec = np.linalg.eigh(cov)
    assert abs(ev[0]) < 1e-15
    assert abs(abs(vec[:, 0] @ sv.coefficients.real) - 1) < 1e-12
    np.testing.assert_allclose(ev[1:], 1 / 800, rtol=1e-10)
    assert np.trace(cov) == pytest.approx(5 / 800)


def test_covariance_complex_embedding():
    sv = random_state(5, 2)
    cov = covariance(sv, 100)
    assert cov.embedding == "complex"
    ev = np.linalg.eigvalsh(cov.entries)
    assert np.sum(np.abs(ev) < 1e-14) == 2
    np.testing.assert_allclose(ev[2:], 1 / 400, rtol=1e-10)


def test_cone_half_angle():
    cone = confidence_cone(StateVector([1, 0]), 100, 0.05, 1)
    assert cone.half_angle == pytest.approx(math.asin(math.sqrt(3.841458820694124 / 400)), abs=1e-10)
    assert cone.half_angle == pytest.approx(0.0981557, abs=1e-7)
    tighter = confidence_cone(StateVector([1, 0]), 10**9, 0.05, 1)
    assert tighter.half_angle < 3.2e-5 * math.sqrt(3.84146)
    angles = [confidence_cone(StateVector([1, 0]), 100, a, 3).half_angle for a in ALPHA_LEVELS]
    assert all(x < y for x, y in zip(angles, angles[1:]))


def test_cone_membership_and_degenerate():
    axis = StateVector([1, 0])
    cone = confidence_cone(axis, 100, 0.05, 1)
    inside = StateVector([math.cos(0.09), math.sin(0.09)])
    outside = StateVector([math.cos(0.11), math.sin(0.11)])
    assert cone.contains(inside) and not cone.contains(outside)
    wide = confidence_cone(axis, 1, 0.05, 3)
    assert wide.degenerate and wide.contains(StateVector([0, 1]))


def test_equality_test_values():
    a = StateVector([1, 0])
    rep = state_equality_test(a, a, 1000, 4)
    assert rep.statistic == 0 and rep.p_value == 1.0
    b = StateVector([math.sqrt(0.999), math.sqrt(0.001)])
    rep = state_equality_test(a, b, 1000, 4)
    assert rep.statistic == pytest.approx(4.0, rel=1e-9)
    assert rep.p_value == pytest.approx(0.406, abs=1e-3)
    assert rep.reject_at == {a_: False for a_ in ALPHA_LEVELS}
    assert state_equality_test(a, StateVector([0, 1]), 1000, 1).reject_at[0.001]
    with pytest.raises(InferenceError):
        state_equality_test(a, StateVector([1, 0, 0]), 10, 1)


def test_homogeneity_limits():
    a = StateVector([1, 0])
    b = StateVector([math.sqrt(0.999), math.sqrt(0.001)])
    assert homogeneity_test(a, 10, a, 20, 1).statistic == 0
    far = homogeneity_test(a, 1000, b, 10**12, 4)
    assert far.statistic == pytest.approx(state_equality_test(a, b, 1000, 4).statistic, rel=1e-8)
    assert "Monte Carlo" in far.note
    with pytest.raises(InferenceError):
        homogeneity_test(a, 0, b, 10, 1)


def test_homogeneity_null_mean():
    b = ContinuousBasis(3)
    truth = random_state(3, 12, real=True, basis_tag=b.tag)
    stat = []
    for t in range(400):
        e1 = solve(b, [sample_coordinate(truth, b, 1500, 2 * t + 1)]).estimate
        e2 = solve(b, [sample_coordinate(truth, b, 2500, 2 * t + 2)]).estimate
        stat.append(homogeneity_test(e1, 1500, e2, 2500, 2).statistic)
    assert abs(np.mean(stat) - 2) < 0.15 * 2
