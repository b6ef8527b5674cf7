import math

import numpy as np
import pytest

from rootest.basis import BasisError, ContinuousBasis
from rootest.ehrenfest import (POTENTIALS, EhrenfestProblem, Potential, check, gradient_matrix_element,
                               hamiltonian_eigencheck, hamiltonian_matrix, harmonic_frequencies, heisenberg_residual,
                               position_matrix, position_matrix_element)


def harmonic(s=20, w=None, mass=1.0):
    return EhrenfestProblem(ContinuousBasis(s), POTENTIALS["harmonic"],
                            harmonic_frequencies(s) if w is None else w, mass)


def test_position_elements():
    b = ContinuousBasis(6)
    assert position_matrix_element(b, 0, 0) == pytest.approx(0, abs=1e-15)
    assert position_matrix_element(b, 0, 1) == pytest.approx(1 / math.sqrt(2), abs=1e-14)
    assert position_matrix_element(b, 0, 3) == pytest.approx(0, abs=1e-15)
    with pytest.raises(BasisError):
        position_matrix_element(b, 0, 6)


def test_position_matrix_is_ladder():
    s = 12
    x = position_matrix(ContinuousBasis(s))
    ladder = np.diag(np.sqrt(np.arange(1, s) / 2), 1)
    np.testing.assert_allclose(x, ladder + ladder.T, atol=1e-13)


def test_gradient_elements():
    p = harmonic(8)
    for k, j in [(0, 1), (2, 3), (4, 1)]:
        assert gradient_matrix_element(p, k, j) == pytest.approx(position_matrix_element(p.basis, k, j), abs=1e-14)
    const = EhrenfestProblem(ContinuousBasis(5), Potential("const", lambda x: 3 + 0 * x, lambda x: 0 * x),
                             np.ones(5))
    assert gradient_matrix_element(const, 1, 2) == 0
    quartic = EhrenfestProblem(ContinuousBasis(5), POTENTIALS["quartic"], np.ones(5))
    # <0|x^3|1> from the ladder: (x^3)_{01} = 3 / (2 sqrt 2)
    assert gradient_matrix_element(quartic, 0, 1) == pytest.approx(4 * 3 / (2 * math.sqrt(2)), abs=1e-13)


def test_harmonic_satisfies_quantization():
    rep = check(harmonic(20))
    assert rep.max_residual < 1e-10
    assert rep.hamiltonian_deviation < 1e-8
    assert rep.passed
    r = rep.residual_matrix
    np.testing.assert_allclose(r, r.T, atol=1e-14)


def test_wrong_frequencies():
    s = 6
    res = heisenberg_residual(harmonic(s, 2.0 * np.arange(s)))
    assert res[0, 1] == pytest.approx(3 / math.sqrt(2), abs=1e-13)


@pytest.mark.parametrize("j", [0, 7, 19])
def test_single_frequency_perturbation_detected(j):
    w = harmonic_frequencies(20)
    w[j] += 1e-3
    assert np.max(np.abs(heisenberg_residual(harmonic(20, w)))) > 1e-4


def test_free_particle_fails():
    p = EhrenfestProblem(ContinuousBasis(10), POTENTIALS["free"], np.full(10, 0.5))
    rep = check(p)
    assert np.max(np.abs(rep.residual_matrix)) == 0.0  # equal frequencies, zero force: both sides vanish
    assert not rep.passed  # but the Hermite basis is not the free Hamiltonian's eigenbasis
    p2 = EhrenfestProblem(ContinuousBasis(10), POTENTIALS["free"], harmonic_frequencies(10))
    assert check(p2).max_residual > 0.1


def test_hamiltonian_shift_and_mismatch():
    p = harmonic(12)
    h0 = hamiltonian_matrix(p)
    shifted = EhrenfestProblem(p.basis, POTENTIALS["harmonic"].shifted(0.75), p.frequencies + 0.75)
    np.testing.assert_allclose(hamiltonian_matrix(shifted) - h0, 0.75 * np.eye(12), atol=1e-12)
    assert hamiltonian_eigencheck(shifted) < 1e-8
    wrong = harmonic(12, harmonic_frequencies(12) * 1.5)
    assert hamiltonian_eigencheck(wrong) >= 0.5


def test_mass_and_scale():
    # m w^2 = 1 with a = (m w)^(-1/2) keeps the scaled Hermite functions as eigenfunctions
    m, w = 4.0, 0.5
    b = ContinuousBasis(15, 1 / math.sqrt(m * w))
    pot = Potential("mw", lambda x: 0.5 * m * w**2 * x**2, lambda x: m * w**2 * x)
    rep = check(EhrenfestProblem(b, pot, w * (np.arange(15) + 0.5), m))
    assert rep.passed


def test_problem_validation():
    with pytest.raises(ValueError):
        EhrenfestProblem(ContinuousBasis(3), POTENTIALS["harmonic"], [0.5, 1.5])
    with pytest.raises(ValueError):
        harmonic(3, mass=0.0)
    with pytest.raises(ValueError):
        harmonic(2, [np.nan, 1.0])


def test_report_json():
    doc = check(harmonic(5)).to_json()
    assert set(doc) >= {"max_residual", "residual_matrix", "hamiltonian_deviation", "pass", "tolerance"}
    assert doc["pass"] is True
