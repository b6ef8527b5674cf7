"""Quantization check for root expansions with harmonic time dependence.

Take ``psi(x, t) = sum_j c_j exp(-i w_j t) phi_j(x)`` and demand the
averaged Newton law ``m d^2<x>/dt^2 = -<dU/dx>``. Both sides are sums of
``c_j c_k^* exp(-i (w_j - w_k) t)`` terms. For the law to hold at every
instant and for every choice of amplitudes, each matrix element must match::

    m (w_j - w_k)^2 <k|x|j> = <k|dU/dx|j>

so checking this matrix equation checks the averaged law for every state
in the span at once. The companion check builds the Hamiltonian
``-(1/2m) d^2/dx^2 + U`` in the basis and compares it with ``diag(w)``
(hbar = 1).
"""

from dataclasses import dataclass

import numpy as np

from .basis import BasisError, ContinuousBasis

HAMILTONIAN_BUFFER = 2


@dataclass(frozen=True)
class Potential:
    name: str
    value: callable
    gradient: callable

    def shifted(self, offset):
        return Potential(f"{self.name}+{offset!r}", lambda x: self.value(x) + offset, self.gradient)


POTENTIALS = {
    "harmonic": Potential("harmonic", lambda x: 0.5 * x**2, lambda x: x),
    "quartic": Potential("quartic", lambda x: x**4, lambda x: 4.0 * x**3),
    "free": Potential("free", lambda x: np.zeros_like(x), lambda x: np.zeros_like(x)),
}


def harmonic_frequencies(size):
    return np.arange(size) + 0.5


@dataclass(frozen=True, eq=False)
class EhrenfestProblem:
    basis: ContinuousBasis
    potential: Potential
    frequencies: np.ndarray
    mass: float = 1.0

    def __post_init__(self):
        w = np.array(self.frequencies, dtype=float).ravel()
        if w.size != self.basis.size:
            raise ValueError(f"{w.size} frequencies for a basis of {self.basis.size} functions")
        if not np.all(np.isfinite(w)):
            raise ValueError("frequencies must be finite")
        if not self.mass > 0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        object.__setattr__(self, "frequencies", w)


@dataclass
class EhrenfestReport:
    max_residual: float
    residual_matrix: np.ndarray
    hamiltonian_deviation: float
    tolerance: float
    hamiltonian_tolerance: float

    @property
    def passed(self):
        return self.max_residual < self.tolerance and self.hamiltonian_deviation < self.hamiltonian_tolerance

    def to_json(self):
        return {"max_residual": self.max_residual, "residual_matrix": self.residual_matrix.tolist(),
                "hamiltonian_deviation": self.hamiltonian_deviation, "pass": self.passed,
                "tolerance": self.tolerance, "hamiltonian_tolerance": self.hamiltonian_tolerance}


def _operator_matrix(basis, weight_fn):
    x, w = basis.quadrature()
    phi = basis.phi(x)
    return (phi.T * (w * weight_fn(x))) @ phi


def _check(basis, k, j):
    for idx in (k, j):
        if not 0 <= idx < basis.size:
            raise BasisError(f"index {idx} out of range for basis of size {basis.size}")


def position_matrix(basis):
    return _operator_matrix(basis, lambda x: x)


def gradient_matrix(problem):
    return _operator_matrix(problem.basis, problem.potential.gradient)


def position_matrix_element(basis, k, j):
    """<k|x|j> by Gauss-Hermite quadrature."""
    _check(basis, k, j)
    return float(position_matrix(basis)[k, j])


def gradient_matrix_element(problem, k, j):
    _check(problem.basis, k, j)
    return float(gradient_matrix(problem)[k, j])


def heisenberg_residual(problem):
    """``m (w_j - w_k)^2 <k|x|j> - <k|dU/dx|j>`` for all k, j."""
    w = problem.frequencies
    gap2 = (w[None, :] - w[:, None]) ** 2
    return problem.mass * gap2 * position_matrix(problem.basis) - gradient_matrix(problem)


def hamiltonian_matrix(problem):
    """``H_kj = int phi_k (-(1/2m) phi_j'' + U phi_j) dx``.

    Uses ``h_j'' = (y^2 - (2j + 1)) h_j`` for Hermite functions, so
    ``phi_j'' = a^-2 ((x/a)^2 - (2j + 1)) phi_j``.
    """
    basis = problem.basis
    x, w = basis.quadrature()
    phi = basis.phi(x)
    a = basis.scale
    order = 2 * np.arange(basis.size) + 1
    second = ((x / a) ** 2)[:, None] - order[None, :]
    second = second * phi / a**2
    h = (phi.T * w) @ (-second / (2.0 * problem.mass) + problem.potential.value(x)[:, None] * phi)
    return 0.5 * (h + h.T)


def hamiltonian_eigencheck(problem, buffer=HAMILTONIAN_BUFFER):
    """Max deviation of H from diag(w) on the leading ``s - buffer`` block."""
    h = hamiltonian_matrix(problem)
    keep = max(1, problem.basis.size - buffer)
    dev = h[:keep, :keep] - np.diag(problem.frequencies[:keep])
    return float(np.max(np.abs(dev)))


def check(problem, tolerance=1e-10, hamiltonian_tolerance=1e-8):
    res = heisenberg_residual(problem)
    return EhrenfestReport(float(np.max(np.abs(res))), res, hamiltonian_eigencheck(problem),
                           tolerance, hamiltonian_tolerance)
