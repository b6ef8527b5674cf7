"""State vectors, densities in both spaces, fidelity and the pure density matrix."""

import warnings
from dataclasses import dataclass

import numpy as np

from .basis import ContinuousBasis, DiscreteBasis, basis_from_dict

# |norm^2 - 1| above this is a user error, below _NORM_TOL it is exact enough
_NORM_REJECT = 1e-6
_NORM_TOL = 1e-12
# drift this small is rounding; rescaling would only perturb the last bits
_NORM_EXACT = 4 * np.finfo(float).eps
_TIE_TOL = 1e-12


class StateError(ValueError):
    pass


def gauge_fix(c):
    """Rotate the global phase so the largest-magnitude entry is real and >= 0.

    Ties (within 1e-12 relative) go to the lowest index, so the choice is
    stable under rounding and the map is idempotent.
    """
    c = np.asarray(c, dtype=complex)
    mag = np.abs(c)
    k = int(np.argmax(mag >= mag.max() * (1.0 - _TIE_TOL)))
    if c[k] == 0:
        return c.copy()
    out = c * (np.conj(c[k]) / abs(c[k]))
    out[k] = abs(c[k])
    return out


@dataclass(frozen=True, eq=False)
class StateVector:
    """Unit-norm, gauge-fixed complex coefficient vector.

    Inputs within 1e-6 of unit norm are renormalized (with a warning if the
    drift exceeds 1e-12); anything farther is rejected.
    """

    coefficients: np.ndarray
    basis_tag: str = None

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=complex).ravel()
        if c.size == 0:
            raise StateError("empty state vector")
        if not np.all(np.isfinite(c)):
            raise StateError("state vector has non-finite entries")
        norm2 = float(np.vdot(c, c).real)
        drift = abs(norm2 - 1.0)
        if drift > _NORM_REJECT:
            raise StateError(f"state norm^2 = {norm2!r} is not 1 (tolerance {_NORM_REJECT})")
        if drift > _NORM_TOL:
            warnings.warn(f"renormalizing state with norm^2 drift {drift:.3e}", RuntimeWarning, stacklevel=3)
        if drift > _NORM_EXACT:
            c = c / np.sqrt(norm2)
        c = gauge_fix(c)
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def from_unnormalized(cls, c, basis_tag=None):
        c = np.asarray(c, dtype=complex).ravel()
        n = np.linalg.norm(c)
        if n == 0:
            raise StateError("cannot normalize the zero vector")
        c = c / n
        # one more pass keeps the drift at rounding level
        return cls(c / np.sqrt(np.vdot(c, c).real), basis_tag)

    @property
    def size(self):
        return self.coefficients.size

    @property
    def is_real(self):
        return bool(np.all(self.coefficients.imag == 0))

    def to_json(self, basis=None):
        d = {"s": self.size,
             "re": [float(v) for v in self.coefficients.real],
             "im": [float(v) for v in self.coefficients.imag]}
        if basis is not None:
            d["basis"] = basis.to_dict()
        elif self.basis_tag is not None:
            d["basis"] = {"tag": self.basis_tag}
        return d

    @classmethod
    def from_json(cls, d):
        re = np.asarray(d["re"], dtype=float)
        im = np.asarray(d["im"], dtype=float)
        if re.size != d["s"] or im.size != d["s"]:
            raise StateError(f"state JSON declares s={d['s']} but has {re.size} real and {im.size} imaginary parts")
        tag = None
        b = d.get("basis")
        if b:
            tag = b["tag"] if "tag" in b else basis_from_dict(b).tag
        return cls(re + 1j * im, tag)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray

    @property
    def trace(self):
        return complex(np.trace(self.entries))

    def eigvalsh(self):
        return np.linalg.eigvalsh(self.entries)


def _check_bound(state, basis):
    if state.size != basis.size:
        raise StateError(f"state has {state.size} coefficients but basis has {basis.size} functions")
    if state.basis_tag is not None and state.basis_tag != basis.tag:
        raise StateError(f"state is bound to {state.basis_tag}, not {basis.tag}")


def psi_at(state, basis, x):
    _check_bound(state, basis)
    x = np.asarray(x, dtype=float)
    return (basis.phi(x.ravel()) @ state.coefficients).reshape(x.shape)


def psi_tilde_at(state, basis, p):
    _check_bound(state, basis)
    p = np.asarray(p, dtype=float)
    return (basis.phi_tilde(p.ravel()) @ state.coefficients).reshape(p.shape)


def density_at(state, basis: ContinuousBasis, x):
    """Coordinate density |psi(x)|^2; vectorized over ``x``."""
    out = np.abs(psi_at(state, basis, x)) ** 2
    return float(out) if out.ndim == 0 else out


def momentum_density_at(state, basis: ContinuousBasis, p):
    out = np.abs(psi_tilde_at(state, basis, p)) ** 2
    return float(out) if out.ndim == 0 else out


def conjugate_amplitudes(state, basis: DiscreteBasis):
    """Amplitudes ``U c`` in the conjugate measurement basis."""
    _check_bound(state, basis)
    return basis.forward(state.coefficients)


def fidelity(a, b):
    """|<a, b>|^2 for two state vectors (or raw coefficient arrays)."""
    ca = a.coefficients if isinstance(a, StateVector) else np.asarray(a)
    cb = b.coefficients if isinstance(b, StateVector) else np.asarray(b)
    if ca.shape != cb.shape:
        raise StateError(f"length mismatch: {ca.size} vs {cb.size}")
    return min(1.0, abs(np.vdot(ca, cb)) ** 2)


def density_matrix(state):
    c = state.coefficients
    return DensityMatrix(np.outer(c, c.conj()))
