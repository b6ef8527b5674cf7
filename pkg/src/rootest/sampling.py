"""Synthetic observations from a known state in both complementing spaces."""

from dataclasses import dataclass, field

import numpy as np

from .basis import ContinuousBasis, DiscreteBasis
from .state import StateVector, conjugate_amplitudes, density_at, momentum_density_at

GRID_POINTS = 2**14


class SamplingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class _Sample:
    points: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).ravel()
        if not np.all(np.isfinite(pts)):
            raise SamplingError("sample contains non-finite points")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.size


@dataclass(frozen=True, eq=False)
class CoordinateSample(_Sample):
    space: str = field(default="coordinate", init=False)


@dataclass(frozen=True, eq=False)
class MomentumSample(_Sample):
    space: str = field(default="momentum", init=False)


@dataclass(frozen=True, eq=False)
class RegisterCounts:
    direct: np.ndarray
    conjugate: np.ndarray

    def __post_init__(self):
        for name in ("direct", "conjugate"):
            v = np.array(getattr(self, name)).ravel()
            if v.size and not np.issubdtype(v.dtype, np.integer):
                if not np.all(v == np.round(v)):
                    raise SamplingError(f"{name} counts must be integers")
            v = v.astype(np.int64)
            bad = np.flatnonzero(v < 0)
            if bad.size:
                raise SamplingError(f"{name} count at index {bad[0]} is negative ({v[bad[0]]})")
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        if self.direct.size != self.conjugate.size:
            raise SamplingError(f"direct has {self.direct.size} entries, conjugate {self.conjugate.size}")

    @property
    def n(self):
        return int(self.direct.sum())

    @property
    def m(self):
        return int(self.conjugate.sum())

    def to_json(self):
        return {"direct": self.direct.tolist(), "conjugate": self.conjugate.tolist()}


def random_state(s, seed=None, real=False, basis_tag=None):
    """Haar-random state (or uniformly random real direction when ``real``)."""
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(s)
    if not real:
        c = c + 1j * rng.standard_normal(s)
    return StateVector.from_unnormalized(c, basis_tag)


def grid_half_width(basis):
    # classical turning point of the highest function plus a 6-unit margin
    return np.sqrt(2.0 * (2 * basis.size + 1)) + 6.0


def grid_cdf(state, basis, space="coordinate"):
    """Uniform grid, normalized CDF on it, and the raw trapezoid mass.

    The mass should be 1 to within 1e-10; a smaller value means the grid
    misses probability.
    """
    if space == "coordinate":
        half = basis.scale * grid_half_width(basis)
        grid = np.linspace(-half, half, GRID_POINTS)
        dens = density_at(state, basis, grid)
    elif space == "momentum":
        half = grid_half_width(basis) / basis.scale
        grid = np.linspace(-half, half, GRID_POINTS)
        dens = momentum_density_at(state, basis, grid)
    else:
        raise SamplingError(f"unknown space {space!r}")
    step = grid[1] - grid[0]
    cdf = np.empty_like(grid)
    cdf[0] = 0.0
    np.cumsum(0.5 * (dens[1:] + dens[:-1]) * step, out=cdf[1:])
    mass = cdf[-1]
    return grid, cdf / mass, mass


def _draw(state, basis, count, seed, space):
    if count < 1:
        raise SamplingError(f"need at least one observation, got {count}")
    grid, cdf, mass = grid_cdf(state, basis, space)
    if mass < 1.0 - 1e-10:
        raise SamplingError(f"grid captures only {mass!r} of the {space} probability")
    u = np.random.default_rng(seed).random(count)
    return np.interp(u, cdf, grid)


def sample_coordinate(state, basis: ContinuousBasis, n, seed=None):
    """``n`` inverse-CDF draws from |psi(x)|^2."""
    return CoordinateSample(_draw(state, basis, n, seed, "coordinate"), basis.scale)


def sample_momentum(state, basis: ContinuousBasis, m, seed=None):
    return MomentumSample(_draw(state, basis, m, seed, "momentum"), basis.scale)


def sample_register(state, basis: DiscreteBasis, n, m, seed=None):
    """Multinomial counts in the register basis and in the conjugate basis."""
    if n < 0 or m < 0 or n + m < 1:
        raise SamplingError(f"need n, m >= 0 with n + m >= 1, got n={n}, m={m}")
    rng = np.random.default_rng(seed)
    p = np.abs(state.coefficients) ** 2
    q = np.abs(conjugate_amplitudes(state, basis)) ** 2
    direct = rng.multinomial(n, p / p.sum())
    conj = rng.multinomial(m, q / q.sum())
    return RegisterCounts(direct, conj)
