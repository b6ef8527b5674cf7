"""Fisher information, covariance, confidence cones and chi-square tests.

In the real root parametrization (``c_0`` eliminated by normalization) the
Fisher matrix of ``n`` observations is ``4n (delta_ij + c_i c_j / c_0^2)``
whatever the basis, and the extended covariance of the estimator is
``(E - rho) / 4n``. Consequently ``4n (1 - |<c_hat, c>|^2)`` is
asymptotically chi-square with ``s - 1`` degrees of freedom.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .state import StateVector, density_matrix, fidelity

ALPHA_LEVELS = (0.1, 0.05, 0.01, 0.001)
_TERM_TOL = 1e-14
_MAX_TERMS = 10000


class InferenceError(ValueError):
    pass


class SingularChartError(InferenceError):
    pass


# -- chi-square distribution ----------------------------------------------


def _lower_series(a, x):
    """Regularized lower incomplete gamma P(a, x) by its power series."""
    term = total = 1.0 / a
    for k in range(1, _MAX_TERMS):
        term *= x / (a + k)
        total += term
        if abs(term) < abs(total) * _TERM_TOL:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _upper_fraction(a, x):
    """Regularized upper incomplete gamma Q(a, x), modified Lentz."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for k in range(1, _MAX_TERMS):
        an = -k * (k - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _TERM_TOL:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def chi2_sf(q, dof):
    """P(X > q) for X ~ chi-square(dof)."""
    if dof <= 0:
        raise InferenceError(f"dof must be positive, got {dof}")
    if q <= 0:
        return 1.0
    a, x = 0.5 * dof, 0.5 * q
    if x < a + 1.0:
        return max(0.0, 1.0 - _lower_series(a, x))
    return _upper_fraction(a, x)


def chi2_cdf(q, dof):
    if q <= 0:
        return 0.0
    a, x = 0.5 * dof, 0.5 * q
    if x < a + 1.0:
        return _lower_series(a, x)
    return 1.0 - _upper_fraction(a, x)


def chi2_quantile(dof, alpha):
    """Upper-tail quantile: the ``q`` with ``chi2_sf(q, dof) == alpha``."""
    if dof < 1:
        raise InferenceError(f"dof must be >= 1, got {dof}")
    if not 0.0 < alpha < 1.0:
        raise InferenceError(f"alpha must lie in (0, 1), got {alpha}")
    hi = dof + 10.0 * math.sqrt(2.0 * dof) + 50.0
    while chi2_sf(hi, dof) > alpha:
        hi *= 2.0
    return brentq(lambda q: chi2_sf(q, dof) - alpha, 0.0, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


# -- Fisher information and covariance -------------------------------------


@dataclass(frozen=True, eq=False)
class RealStateChart:
    """Free real coefficients ``c_1..c_{s-1}``; ``c_0`` follows from the norm."""

    free_params: np.ndarray

    def __post_init__(self):
        v = np.array(self.free_params, dtype=float).ravel()
        v.setflags(write=False)
        object.__setattr__(self, "free_params", v)

    @property
    def c0_squared(self):
        return 1.0 - float(np.dot(self.free_params, self.free_params))

    @property
    def c0(self):
        c0sq = self.c0_squared
        if c0sq < 1e-12:
            raise SingularChartError(f"c0^2 = {c0sq!r} < 1e-12; chart is singular")
        return math.sqrt(c0sq)

    @property
    def size(self):
        return self.free_params.size + 1

    def coefficients(self):
        return np.concatenate([[self.c0], self.free_params])

    @classmethod
    def from_state(cls, state):
        c = np.asarray(state.coefficients)
        if np.max(np.abs(c.imag)) > 1e-12:
            raise InferenceError("the real chart needs a real-coefficient state")
        c = c.real * (1.0 if c[0].real >= 0 else -1.0)
        return cls(c[1:])


@dataclass(frozen=True, eq=False)
class FisherMatrix:
    entries: np.ndarray
    sample_size: int


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    entries: np.ndarray
    sample_size: int
    embedding: str = "real"


def fisher_matrix_closed_form(chart, n):
    c0sq = chart.c0 ** 2
    c = chart.free_params
    return FisherMatrix(4.0 * n * (np.eye(c.size) + np.outer(c, c) / c0sq), n)


def fisher_matrix_quadrature(chart, basis, n):
    """``4n int dpsi/dc_i dpsi/dc_j dx`` on the basis quadrature.

    ``dpsi/dc_i = phi_i - (c_i / c_0) phi_0`` on the real chart.
    """
    if isinstance(chart, StateVector):
        chart = RealStateChart.from_state(chart)
    if chart.size != basis.size:
        raise InferenceError(f"chart has {chart.size} coefficients, basis {basis.size}")
    x, w = basis.quadrature()
    phi = basis.phi(x)
    grad = phi[:, 1:] - np.outer(phi[:, 0], chart.free_params / chart.c0)
    return 4.0 * n * (grad.T * w) @ grad


def covariance(state, n):
    """Asymptotic covariance ``(E - rho) / 4n`` of the estimated state.

    Real states give the ``s x s`` matrix. Complex states use the ``2s``
    real embedding ``(Re c, Im c)`` with the normalization and global-phase
    directions projected out; this is the isotropic reference and assumes
    every remaining direction is equally well measured.
    """
    c = np.asarray(state.coefficients)
    if np.max(np.abs(c.imag)) <= 1e-12:
        rho = density_matrix(state).entries.real
        return CovarianceMatrix((np.eye(c.size) - rho) / (4.0 * n), n, "real")
    v = np.concatenate([c.real, c.imag])
    w = np.concatenate([-c.imag, c.real])
    proj = np.eye(2 * c.size) - np.outer(v, v) - np.outer(w, w)
    return CovarianceMatrix(proj / (4.0 * n), n, "complex")


# -- cones and tests -------------------------------------------------------


@dataclass
class ConfidenceCone:
    axis: StateVector
    half_angle: float
    alpha: float
    dof: int
    n_total: int
    quantile: float
    degenerate: bool = False

    def contains(self, state):
        """True when ``state`` lies inside the cone (sin^2 of the angle within bound)."""
        if self.degenerate:
            return True
        return 1.0 - fidelity(self.axis, state) <= self.quantile / (4.0 * self.n_total)

    def to_json(self):
        return {"axis": self.axis.to_json(), "half_angle": self.half_angle, "alpha": self.alpha,
                "dof": self.dof, "n_total": self.n_total, "quantile": self.quantile,
                "degenerate": self.degenerate}


def confidence_cone(estimate, n_total, alpha, dof):
    q = chi2_quantile(dof, alpha)
    bound = q / (4.0 * n_total)
    if bound >= 1.0:
        return ConfidenceCone(estimate, math.pi / 2, alpha, dof, n_total, q, degenerate=True)
    return ConfidenceCone(estimate, math.asin(math.sqrt(bound)), alpha, dof, n_total, q)


@dataclass
class TestReport:
    statistic: float
    dof: int
    p_value: float
    reject_at: dict = field(default_factory=dict)
    test: str = ""
    note: str = ""

    # keep pytest from collecting this class
    __test__ = False

    def to_json(self):
        return {"test": self.test, "statistic": self.statistic, "dof": self.dof, "p_value": self.p_value,
                "alpha": list(ALPHA_LEVELS),
                "reject_at": {str(k): v for k, v in self.reject_at.items()}, "note": self.note}


def _report(stat, dof, test, note=""):
    p = chi2_sf(stat, dof)
    return TestReport(stat, dof, p, {a: p < a for a in ALPHA_LEVELS}, test, note)


def _pair_fidelity(a, b):
    if a.size != b.size:
        raise InferenceError(f"length mismatch: {a.size} vs {b.size}")
    return fidelity(a, b)


def state_equality_test(estimate, reference, n_total, dof):
    """H0: the sample comes from ``reference``; T = 4 n (1 - F)."""
    stat = 4.0 * n_total * (1.0 - _pair_fidelity(estimate, reference))
    return _report(max(stat, 0.0), dof, "state_equality")


def homogeneity_test(estimate_1, n_1, estimate_2, n_2, dof):
    """H0: both samples come from one population.

    T = 4 (n1 n2 / (n1 + n2)) (1 - F); constructed two-sample extension,
    calibrated by Monte Carlo rather than derived.
    """
    if n_1 <= 0 or n_2 <= 0:
        raise InferenceError(f"sample sizes must be positive, got {n_1} and {n_2}")
    weight = n_1 * n_2 / (n_1 + n_2)
    stat = 4.0 * weight * (1.0 - _pair_fidelity(estimate_1, estimate_2))
    return _report(max(stat, 0.0), dof, "homogeneity", "constructed, Monte Carlo calibrated")
