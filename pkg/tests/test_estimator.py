import math

import numpy as np
import pytest

from rootest.basis import ContinuousBasis, dft_unitary
from rootest.estimator import (EstimationConfig, EstimationError, LikelihoodError, log_likelihood, r_matrix,
                               select_order, solve, solve_register)
from rootest.sampling import (CoordinateSample, MomentumSample, RegisterCounts, random_state, sample_coordinate,
                              sample_momentum, sample_register)
from rootest.state import StateVector, fidelity


def test_register_loglik_values():
    b = dft_unitary(2)
    assert log_likelihood(StateVector([1, 0]), b, RegisterCounts([5, 0], [0, 0])) == 0.0
    ll = log_likelihood(StateVector(np.array([1, 1]) / math.sqrt(2)), b, RegisterCounts([1, 1], [0, 0]))
    assert ll == pytest.approx(2 * math.log(0.5), abs=1e-14)


def test_continuous_loglik_single_point():
    b = ContinuousBasis(1)
    x = 0.37
    ll = log_likelihood(StateVector([1.0]), b, CoordinateSample([x]))
    assert ll == pytest.approx(math.log(math.exp(-x * x) / math.sqrt(math.pi)), abs=1e-14)


def test_zero_density_raises():
    b = ContinuousBasis(2)
    with pytest.raises(LikelihoodError, match="coordinate point #1"):
        log_likelihood(StateVector([0, 1]), b, CoordinateSample([0.5, 0.0]))
    with pytest.raises(LikelihoodError, match="direct state 1"):
        log_likelihood(StateVector([1, 0]), dft_unitary(2), RegisterCounts([2, 1], [0, 0]))
    # a floor makes it finite
    assert np.isfinite(log_likelihood(StateVector([0, 1]), b, CoordinateSample([0.5, 0.0]), density_floor=1e-12))


def test_r_matrix_trivial_and_identity():
    b1 = ContinuousBasis(1)
    np.testing.assert_allclose(r_matrix(StateVector([1.0]), b1, CoordinateSample([0.2])).entries, [[1.0]])
    b = ContinuousBasis(6)
    sv = random_state(6, 5, basis_tag=b.tag)
    samples = [sample_coordinate(sv, b, 300, 1), sample_momentum(sv, b, 200, 2)]
    r = r_matrix(sv, b, samples)
    assert r.is_hermitian()
    c = sv.coefficients
    assert abs(np.vdot(c, r.entries @ c).real - 500) < 1e-8 * 500
    rb = r_matrix(random_state(8, 1), dft_unitary(8), sample_register(random_state(8, 1), dft_unitary(8), 50, 70, 3))
    assert rb.is_hermitian()


@pytest.mark.parametrize("s", [2, 7, 64, 1024])
def test_register_direct_only_closed_form(s):
    b = dft_unitary(s)
    counts = sample_register(random_state(s, s), b, 5 * s, 0, seed=s + 1)
    res = solve_register(b, counts)
    assert res.converged and res.phases_unidentified
    np.testing.assert_allclose(np.abs(res.estimate.coefficients), np.sqrt(counts.direct / counts.n), atol=1e-12)


def test_register_three_one():
    res = solve_register(dft_unitary(2), RegisterCounts([3, 1], [0, 0]))
    np.testing.assert_allclose(np.abs(res.estimate.coefficients), [math.sqrt(0.75), 0.5], atol=1e-12)
    assert res.phases_unidentified


def test_register_conjugate_only():
    b = dft_unitary(16)
    counts = sample_register(random_state(16, 4), b, 0, 400, seed=2)
    res = solve_register(b, counts)
    expect = StateVector.from_unnormalized(b.adjoint(np.sqrt(counts.conjugate / counts.m)))
    assert fidelity(res.estimate, expect) == pytest.approx(1.0, abs=1e-12)
    assert res.phases_unidentified


def test_register_stationary_basis_state():
    res = solve_register(dft_unitary(2), RegisterCounts([100, 0], [50, 50]))
    np.testing.assert_allclose(res.estimate.coefficients, [1, 0], atol=1e-10)
    assert res.converged and not res.phases_unidentified


def test_lambda_equals_total():
    b = ContinuousBasis(5)
    sv = random_state(5, 2, basis_tag=b.tag)
    for samples in ([sample_coordinate(sv, b, 800, 1)], [sample_momentum(sv, b, 600, 2)],
                    [sample_coordinate(sv, b, 800, 3), sample_momentum(sv, b, 600, 4)]):
        res = solve(b, samples)
        assert res.converged
        assert abs(res.lam / res.n_total - 1) < 1e-8
    rb = dft_unitary(16)
    res = solve_register(rb, sample_register(random_state(16, 3), rb, 2000, 2000, 5))
    assert abs(res.lam / res.n_total - 1) < 1e-8


def test_loglik_monotone_and_gauge():
    b = ContinuousBasis(4)
    sv = random_state(4, 7, basis_tag=b.tag)
    res = solve(b, [sample_coordinate(sv, b, 500, 1), sample_momentum(sv, b, 500, 2)])
    trace = np.array(res.loglik_trace)
    assert np.all(np.diff(trace) >= -1e-12 * np.abs(trace[1:]))
    c = res.estimate.coefficients
    k = int(np.argmax(np.abs(c)))
    assert c[k].imag == 0 and c[k].real > 0


@pytest.mark.parametrize("space", ["coordinate", "momentum"])
def test_recovers_real_root(space):
    # single-space fits assume a real root in the observed space; for
    # momentum data that is c_j = i^j d_j with d real
    b = ContinuousBasis(4, 1.4)
    d = random_state(4, 21, real=True).coefficients
    if space == "coordinate":
        sv, draw = StateVector(d, b.tag), sample_coordinate
    else:
        sv, draw = StateVector(d * np.array([1, 1j, -1, -1j]), b.tag), sample_momentum
    res = solve(b, [draw(sv, b, 20_000, 3)])
    assert res.converged
    assert 4 * 20_000 * (1 - fidelity(res.estimate, sv)) < 20


def test_recovers_complex_state_from_both_spaces():
    b = ContinuousBasis(5)
    sv = random_state(5, 31, basis_tag=b.tag)
    res = solve(b, [sample_coordinate(sv, b, 5000, 1), sample_momentum(sv, b, 5000, 2)])
    assert res.converged and not res.phases_unidentified
    assert fidelity(res.estimate, sv) > 0.99


def test_root_search_escapes_local_maximum():
    # this sample leaves the plain fixed point at a poor local maximum
    b = ContinuousBasis(5)
    sv = random_state(5, 0, real=True, basis_tag=b.tag)
    smp = sample_coordinate(sv, b, 2000, 10)
    plain = solve(b, [smp], EstimationConfig(root_search=False))
    searched = solve(b, [smp])
    anchored = solve(b, [smp], init=sv)
    assert searched.log_likelihood > plain.log_likelihood + 100
    assert searched.log_likelihood == pytest.approx(anchored.log_likelihood, abs=1e-6)


def test_nonconvergence_is_diagnostic():
    b = ContinuousBasis(5)
    sv = random_state(5, 3, basis_tag=b.tag)
    res = solve(b, [sample_coordinate(sv, b, 500, 1), sample_momentum(sv, b, 500, 2)],
                EstimationConfig(max_iterations=2))
    assert not res.converged and res.iterations <= 2


def test_deterministic():
    b = ContinuousBasis(5)
    sv = random_state(5, 3, basis_tag=b.tag)
    samples = [sample_coordinate(sv, b, 400, 1), sample_momentum(sv, b, 400, 2)]
    a, c = solve(b, samples), solve(b, samples)
    np.testing.assert_array_equal(a.estimate.coefficients, c.estimate.coefficients)


def test_domain_errors():
    b = ContinuousBasis(5)
    with pytest.raises(EstimationError):
        solve(b, [CoordinateSample([0.1, 0.2])])
    with pytest.raises(EstimationError):
        EstimationConfig(damping=0)
    with pytest.raises(EstimationError):
        solve_register(dft_unitary(3), RegisterCounts([1, 1], [0, 0]))
    with pytest.raises(EstimationError, match="cannot identify"):
        solve_register(dft_unitary(3), RegisterCounts([1, 1, 0], [0, 0, 0]))
    with pytest.raises(EstimationError):
        solve(b, [MomentumSample([0.1]), "x"])


def test_result_json_fields():
    res = solve_register(dft_unitary(2), RegisterCounts([3, 1], [2, 2]))
    doc = res.to_json(dft_unitary(2))
    assert {"estimate", "lambda", "loglik", "iterations", "residual", "converged"} <= set(doc)


def test_select_order_prefers_small_sizes():
    hits = 0
    for seed in range(10):
        smp = sample_coordinate(StateVector([1.0]), ContinuousBasis(1), 3000, seed)
        rep = select_order([smp], range(1, 9))
        hits += rep.chosen <= 3
        assert rep.penalty.endswith("(experimental)")
    assert hits >= 9


def test_select_order_single_candidate():
    smp = sample_coordinate(StateVector([1.0]), ContinuousBasis(1), 100, 1)
    assert select_order([smp], [4]).chosen == 4


def test_select_order_skips_nonconverged():
    smp = sample_coordinate(random_state(3, 1, real=True), ContinuousBasis(3), 500, 1)
    rep = select_order([smp], [1, 3], config=EstimationConfig(max_iterations=1))
    with pytest.raises(EstimationError):
        select_order([smp], [3], config=EstimationConfig(max_iterations=1, root_search=False))
    assert rep.chosen == 1
    assert any(not row["converged"] for row in rep.rows)
