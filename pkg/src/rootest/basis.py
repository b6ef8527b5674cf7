"""Orthonormal basis systems and their conjugate-space counterparts.

Continuous case: scaled Hermite functions ``phi_j(x) = a**-0.5 h_j(x / a)``
whose Fourier transforms (unitary convention, ``exp(-ipx) / sqrt(2 pi)``)
are ``(-i)**j a**0.5 h_j(p a)``.

Discrete case: a register of ``s`` states with a unitary ``U`` mapping
amplitudes to the conjugate measurement basis (the DFT by default).
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal

from . import _kernels


class BasisError(ValueError):
    """Bad basis construction or out-of-range index."""


@lru_cache(maxsize=64)
def _gauss_hermite(order):
    # Golub-Welsch: Jacobi matrix of the physicists' Hermite weight exp(-x^2)
    off = np.sqrt(np.arange(1, order) / 2.0)
    nodes = eigh_tridiagonal(np.zeros(order), off, eigvals_only=True)
    nodes = 0.5 * (nodes - nodes[::-1])  # exact symmetry
    # weights from the Christoffel function; the eigenvector route loses
    # relative accuracy in the tails
    fweights = _kernels.christoffel(nodes, order)
    nodes.setflags(write=False)
    fweights.setflags(write=False)
    return nodes, fweights


def gauss_hermite(order):
    """Nodes ``y`` and weights ``w`` with sum w f(y) ~ int f(y) exp(-y^2) dy."""
    if order < 2:
        raise BasisError(f"quadrature order must be >= 2, got {order}")
    nodes, fweights = _gauss_hermite(int(order))
    return nodes.copy(), fweights * np.exp(-nodes**2)


@dataclass(frozen=True)
class ContinuousBasis:
    """Scaled Chebyshev-Hermite functions phi_0 .. phi_{size-1}.

    ``quadrature_order`` of 0 picks ``max(64, 2 * size + 1)``.
    """

    size: int
    scale: float = 1.0
    quadrature_order: int = 0

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 1:
            raise BasisError(f"basis size must be a positive integer, got {self.size}")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise BasisError(f"scale must be positive, got {self.scale}")
        if self.quadrature_order == 0:
            object.__setattr__(self, "quadrature_order", max(64, 2 * int(self.size) + 1))
        if self.quadrature_order < 2:
            raise BasisError(f"quadrature order must be >= 2, got {self.quadrature_order}")
        object.__setattr__(self, "size", int(self.size))
        object.__setattr__(self, "scale", float(self.scale))

    @property
    def tag(self):
        return f"hermite(s={self.size},a={self.scale!r})"

    def phi(self, x):
        """All basis functions at ``x``; shape ``(len(x), size)``."""
        x = np.asarray(x, dtype=float)
        return _kernels.hermite_table(x / self.scale, self.size) / np.sqrt(self.scale)

    def phi_tilde(self, p):
        """All conjugate (momentum-space) functions at ``p``; complex, ``(len(p), size)``."""
        p = np.asarray(p, dtype=float)
        tab = _kernels.hermite_table(p * self.scale, self.size) * np.sqrt(self.scale)
        return tab * _phase_ladder(self.size)

    def quadrature(self):
        """Points ``x`` and weights ``W`` with sum W f(x) ~ int f(x) dx.

        Exact when ``f`` is a polynomial of degree < 2 * order times
        ``exp(-(x/a)^2)``, which covers every product of two basis functions.
        """
        nodes, fweights = _gauss_hermite(self.quadrature_order)
        return self.scale * nodes, self.scale * fweights

    def integrate(self, f):
        x, w = self.quadrature()
        return np.tensordot(w, f(x), axes=(0, 0))

    def to_dict(self):
        return {"kind": "hermite", "size": self.size, "scale": self.scale,
                "quadrature_order": self.quadrature_order}


def _phase_ladder(size):
    # (-i)^j computed exactly: cycles 1, -i, -1, i
    return np.array([1, -1j, -1, 1j])[np.arange(size) % 4]


@dataclass(frozen=True, eq=False)
class DiscreteBasis:
    """Register of ``dimension`` states with conjugate-measurement unitary."""

    dimension: int
    unitary: np.ndarray = field(repr=False, default=None)
    is_dft: bool = False

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise BasisError(f"dimension must be a positive integer, got {self.dimension}")
        u = self.unitary
        if u is None:
            u = _dft_matrix(int(self.dimension))
            object.__setattr__(self, "is_dft", True)
        u = np.array(u, dtype=complex)
        if u.shape != (self.dimension, self.dimension):
            raise BasisError(f"unitary must be {self.dimension}x{self.dimension}, got {u.shape}")
        if np.max(np.abs(u @ u.conj().T - np.eye(self.dimension))) > 1e-12:
            raise BasisError("matrix is not unitary to 1e-12")
        u.setflags(write=False)
        object.__setattr__(self, "unitary", u)
        object.__setattr__(self, "dimension", int(self.dimension))

    @property
    def size(self):
        return self.dimension

    @property
    def tag(self):
        kind = "dft" if self.is_dft else "custom"
        return f"register(s={self.dimension},{kind})"

    def forward(self, c):
        """Conjugate amplitudes ``U c``."""
        if self.is_dft:
            return np.fft.ifft(c) * np.sqrt(self.dimension)
        return self.unitary @ c

    def adjoint(self, v):
        """``U^dagger v``."""
        if self.is_dft:
            return np.fft.fft(v) / np.sqrt(self.dimension)
        return self.unitary.conj().T @ v

    def to_dict(self):
        d = {"kind": "register", "dimension": self.dimension}
        if self.is_dft:
            d["unitary"] = "dft"
        else:
            d["unitary"] = {"re": self.unitary.real.tolist(), "im": self.unitary.imag.tolist()}
        return d


def _dft_matrix(s):
    jk = np.outer(np.arange(s), np.arange(s)) % s
    return np.exp(2j * np.pi * jk / s) / np.sqrt(s)


def basis_from_dict(d):
    kind = d.get("kind")
    if kind == "hermite":
        return ContinuousBasis(d["size"], d.get("scale", 1.0), d.get("quadrature_order", 0))
    if kind == "register":
        u = d.get("unitary", "dft")
        if u == "dft":
            return dft_unitary(d["dimension"])
        return DiscreteBasis(d["dimension"], np.array(u["re"]) + 1j * np.array(u["im"]))
    raise BasisError(f"unknown basis kind {kind!r}")


def _check_index(basis, j):
    if not 0 <= j < basis.size:
        raise BasisError(f"index {j} out of range for basis of size {basis.size}")


def eval_phi(basis, j, x):
    """phi_j(x); ``x`` may be scalar or array."""
    _check_index(basis, j)
    x = np.asarray(x, dtype=float)
    tab = _kernels.hermite_table(x / basis.scale, j + 1)[:, j] / np.sqrt(basis.scale)
    return tab.reshape(x.shape) if x.ndim else float(tab[0])


def eval_phi_tilde(basis, j, p):
    """Fourier transform of phi_j at momentum ``p``."""
    _check_index(basis, j)
    p = np.asarray(p, dtype=float)
    tab = _kernels.hermite_table(p * basis.scale, j + 1)[:, j] * np.sqrt(basis.scale)
    val = tab * _phase_ladder(j + 1)[j]
    return val.reshape(p.shape) if p.ndim else complex(val[0])


def quadrature_nodes(basis):
    """Gauss-Hermite nodes and weights of the basis, in coordinate units.

    The weight function is ``exp(-(x/a)^2)``; for ``a = 1`` these are the
    textbook Gauss-Hermite nodes and weights.
    """
    nodes, weights = gauss_hermite(basis.quadrature_order)
    return basis.scale * nodes, basis.scale * weights


def dft_unitary(dimension):
    if int(dimension) != dimension or dimension < 1:
        raise BasisError(f"dimension must be >= 1, got {dimension}")
    return DiscreteBasis(int(dimension))
