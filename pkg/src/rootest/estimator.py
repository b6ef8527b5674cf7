"""Maximum-likelihood state estimation from mutually complementing samples.

The likelihood equation ``R(c) c = lambda c`` is solved by the damped
fixed-point map::

    c <- normalize((1 - tau) c + tau R(c) c / (n + m))

with backtracking on ``tau`` so that the log-likelihood never decreases.
At any stationary point ``lambda = c^dagger R c = n + m``.

Near the optimum the undamped map (``tau = 1``) reflects deviations,
``delta -> -delta``, because the observed information on the tangent space
is about ``4 (n + m)``. ``tau = 1/2`` cancels that, so it is the default.
"""

import itertools
import math
from functools import lru_cache
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from numpy.polynomial import hermite as npherm

from . import _kernels
from .basis import ContinuousBasis, DiscreteBasis
from .sampling import CoordinateSample, MomentumSample, RegisterCounts, grid_half_width
from .state import StateVector, gauge_fix

_MONOTONE_SLACK = 1e-12
_RESTORE_AFTER = 5
_MIN_DAMPING = 1e-12
_ROOT_SEARCH_MAX_SIZE = 32
_ROOT_SEARCH_ROUNDS = 50
_SPLIT_WIDTHS = (1.0, 2.0, 4.0)
_MERGE_WIDTHS = (0.5, 1.0, 2.0)
_SPLIT_SPANS = (0.5, 1.0, 2.0, 3.0)  # absolute half-widths, units of the basis scale
_SHIFT_FACTORS = (0.6, 0.8, 1.25)
_PAIR_GRID = 9  # real positions a complex pair may be moved to
_QUICK_ITERATIONS = 30
_REFINE_TOP = 4


class EstimationError(ValueError):
    pass


class LikelihoodError(EstimationError):
    pass


@dataclass(frozen=True)
class EstimationConfig:
    max_iterations: int = 10000
    tolerance_loglik: float = 1e-10
    tolerance_residual: float = 1e-8
    damping: float = 0.5
    density_floor: float = 1e-12
    init_phase_jitter: float = 0.05
    seed: int = 0
    # real-chart escape moves between local maxima (single-space continuous data)
    root_search: bool = True
    # extra random starts; the highest-likelihood converged fit wins
    restarts: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise EstimationError("max_iterations must be >= 1")
        if not (self.tolerance_loglik > 0 and self.tolerance_residual > 0):
            raise EstimationError("tolerances must be positive")
        if not 0 < self.damping <= 1:
            raise EstimationError(f"damping must lie in (0, 1], got {self.damping}")
        if self.density_floor < 0:
            raise EstimationError("density_floor must be >= 0")
        if self.restarts < 0:
            raise EstimationError("restarts must be >= 0")


@dataclass(frozen=True, eq=False)
class RMatrix:
    entries: np.ndarray

    def is_hermitian(self, tol=1e-10):
        e = self.entries
        return bool(np.max(np.abs(e - e.conj().T)) <= tol * max(1.0, np.max(np.abs(e))))


@dataclass(eq=False)
class EstimationResult:
    estimate: StateVector
    lam: float
    log_likelihood: float
    iterations: int
    residual: float
    floor_hits: int
    converged: bool
    phases_unidentified: bool = False
    n: int = 0
    m: int = 0
    loglik_trace: list = field(default_factory=list, repr=False)
    search_moves: int = 0

    @property
    def n_total(self):
        return self.n + self.m

    def to_json(self, basis=None):
        return {
            "estimate": self.estimate.to_json(basis),
            "lambda": float(self.lam),
            "loglik": float(self.log_likelihood),
            "iterations": int(self.iterations),
            "residual": float(self.residual),
            "converged": bool(self.converged),
            "floor_hits": int(self.floor_hits),
            "phases_unidentified": bool(self.phases_unidentified),
            "n": self.n,
            "m": self.m,
        }


# -- data models -----------------------------------------------------------


def _split_samples(samples):
    if isinstance(samples, (CoordinateSample, MomentumSample)):
        samples = [samples]
    xs, ps = [], []
    for smp in samples:
        if isinstance(smp, CoordinateSample):
            xs.append(smp.points)
        elif isinstance(smp, MomentumSample):
            ps.append(smp.points)
        else:
            raise EstimationError(f"not a continuous sample: {type(smp).__name__}")
    x = np.concatenate(xs) if xs else np.empty(0)
    p = np.concatenate(ps) if ps else np.empty(0)
    return x, p


def _floored(dens, floor):
    if dens.size == 0:
        return dens, 0
    cut = floor * dens.max()
    hits = int(np.count_nonzero(dens < cut))
    return np.maximum(dens, cut), hits


class _ContinuousModel:
    def __init__(self, basis, samples, floor):
        self.basis = basis
        self.x, self.p = _split_samples(samples)
        self.n, self.m = self.x.size, self.p.size
        self.total = self.n + self.m
        self.floor = floor
        self.phi = basis.phi(self.x)
        self.phit = basis.phi_tilde(self.p)

    def _densities(self, c):
        psi = self.phi @ c
        psit = self.phit @ c
        return psi, psit, np.abs(psi) ** 2, np.abs(psit) ** 2

    def terms(self, c):
        """(ln L, R c, floor hits) at ``c``."""
        psi, psit, P, Pt = self._densities(c)
        P, h1 = _floored(P, self.floor)
        Pt, h2 = _floored(Pt, self.floor)
        loglik = float(np.sum(np.log(P)) + np.sum(np.log(Pt)))
        rc = self.phi.T @ (psi / P) + self.phit.conj().T @ (psit / Pt)
        return loglik, rc, h1 + h2

    def r_matrix(self, c):
        _, _, P, Pt = self._densities(c)
        P, _ = _floored(P, self.floor)
        Pt, _ = _floored(Pt, self.floor)
        r = (self.phi.T / P) @ self.phi + (self.phit.conj().T / Pt) @ self.phit
        return 0.5 * (r + r.conj().T)

    def check_zero(self, c):
        _, _, P, Pt = self._densities(c)
        for name, pts, dens in (("coordinate", self.x, P), ("momentum", self.p, Pt)):
            bad = np.flatnonzero(dens == 0)
            if bad.size:
                k = bad[0]
                raise LikelihoodError(f"{name} point #{k} (value {pts[k]!r}) has zero density")


class _RegisterModel:
    def __init__(self, basis, counts, floor):
        if counts.direct.size != basis.dimension:
            raise EstimationError(
                f"counts have {counts.direct.size} entries but the register has {basis.dimension} states")
        self.basis = basis
        self.nvec = counts.direct.astype(float)
        self.mvec = counts.conjugate.astype(float)
        self.n, self.m = counts.n, counts.m
        self.total = self.n + self.m
        self.floor = floor

    def _floored(self, dens, weights):
        seen = weights > 0
        if not seen.any():
            return np.maximum(dens, np.finfo(float).tiny), 0
        cut = self.floor * dens[seen].max()
        hits = int(np.count_nonzero(seen & (dens < cut)))
        return np.maximum(dens, max(cut, np.finfo(float).tiny)), hits

    def terms(self, c):
        ct = self.basis.forward(c)
        P, h1 = self._floored(np.abs(c) ** 2, self.nvec)
        Q, h2 = self._floored(np.abs(ct) ** 2, self.mvec)
        loglik = float(self.nvec @ np.log(P) + self.mvec @ np.log(Q))
        rc = self.nvec * c / P + self.basis.adjoint(self.mvec * ct / Q)
        return loglik, rc, h1 + h2

    def r_matrix(self, c):
        ct = self.basis.forward(c)
        P, _ = self._floored(np.abs(c) ** 2, self.nvec)
        Q, _ = self._floored(np.abs(ct) ** 2, self.mvec)
        u = self.basis.unitary
        r = np.diag(self.nvec / P) + (u.conj().T * (self.mvec / Q)) @ u
        return 0.5 * (r + r.conj().T)

    def check_zero(self, c):
        ct = self.basis.forward(c)
        for name, w, dens in (("direct", self.nvec, np.abs(c) ** 2), ("conjugate", self.mvec, np.abs(ct) ** 2)):
            bad = np.flatnonzero((w > 0) & (dens == 0))
            if bad.size:
                raise LikelihoodError(f"{name} state {bad[0]} has {int(w[bad[0]])} counts but zero probability")


class _ChartModel:
    """Single-space continuous data on the real chart ``c = frame * d``.

    ``frame`` is 1 for coordinate data and ``i^j`` for momentum data, which
    makes the design table real.
    """

    def __init__(self, model, frame):
        self.parent = model
        self.basis = model.basis
        self.n, self.m, self.total = model.n, model.m, model.total
        self.floor = model.floor
        self.frame = frame
        tab = model.phi if model.m == 0 else model.phit * frame
        self.table = np.ascontiguousarray(np.real(tab))

    def terms(self, d):
        return _kernels.chart_terms(self.table, np.real(d), self.floor)


def _model(basis, samples, floor):
    if isinstance(basis, DiscreteBasis):
        if not isinstance(samples, RegisterCounts):
            raise EstimationError("a register basis needs RegisterCounts")
        return _RegisterModel(basis, samples, floor)
    if isinstance(basis, ContinuousBasis):
        return _ContinuousModel(basis, samples, floor)
    raise EstimationError(f"unsupported basis {type(basis).__name__}")


def _coeffs(state, basis):
    if state.size != basis.size:
        raise EstimationError(f"state has {state.size} coefficients but basis has {basis.size}")
    return np.asarray(state.coefficients)


def log_likelihood(state, basis, samples, density_floor=0.0):
    """ln L of the observations; continuous samples or register counts.

    With ``density_floor == 0`` an observation at zero density raises
    ``LikelihoodError`` naming the point.
    """
    model = _model(basis, samples, density_floor)
    c = _coeffs(state, basis)
    if density_floor == 0:
        model.check_zero(c)
    return model.terms(c)[0]


def r_matrix(state, basis, samples, density_floor=0.0):
    model = _model(basis, samples, density_floor)
    c = _coeffs(state, basis)
    if density_floor == 0:
        model.check_zero(c)
    return RMatrix(model.r_matrix(c))


# -- fixed-point iteration -------------------------------------------------


@dataclass
class _Run:
    c: np.ndarray
    loglik: float
    iterations: int
    residual: float
    floor_hits: int
    converged: bool
    trace: list


def _normalize(c):
    return c / np.linalg.norm(c)


def _iterate(model, c, cfg):
    total = model.total
    tol_res = cfg.tolerance_residual
    c = _normalize(c)
    L, rc, hits = model.terms(c)
    trace = [L]
    tau = cfg.damping
    streak = 0
    rel_change = np.inf
    resid = np.inf
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        resid = np.linalg.norm(rc - total * c) / total
        if resid < tol_res and rel_change < cfg.tolerance_loglik:
            converged = True
            break
        while True:
            cand = _normalize((1.0 - tau) * c + (tau / total) * rc)
            L_new, rc_new, hits_new = model.terms(cand)
            ok = L_new >= L - _MONOTONE_SLACK * max(1.0, abs(L))
            if ok or tau < _MIN_DAMPING:
                break
            tau *= 0.5
            streak = 0
        if not ok:
            break  # no ascent left at machine precision
        rel_change = abs(L_new - L) / max(1.0, abs(L))
        c, L, rc, hits = cand, L_new, rc_new, hits_new
        trace.append(L)
        streak += 1
        if streak >= _RESTORE_AFTER:
            tau = cfg.damping
    else:
        resid = np.linalg.norm(rc - total * c) / total
        converged = resid < tol_res and rel_change < cfg.tolerance_loglik
    return _Run(c, L, it, float(resid), hits, converged, trace)


def _better(a, b):
    """Prefer converged runs, then the higher likelihood."""
    if a is None:
        return b
    if b.converged != a.converged:
        return b if b.converged else a
    return b if b.loglik > a.loglik + 1e-9 * max(1.0, abs(a.loglik)) else a


# -- starting points -------------------------------------------------------


def _histogram_root(points):
    """Bin centers, widths and sqrt of the histogram density."""
    nbins = max(8, int(math.ceil(math.sqrt(points.size))))
    dens, edges = np.histogram(points, bins=nbins, density=True)
    return 0.5 * (edges[1:] + edges[:-1]), np.diff(edges), np.sqrt(dens)


def _continuous_start(model):
    basis = model.basis
    if model.n > 0:
        ctr, width, root = _histogram_root(model.x)
        c = basis.phi(ctr).T @ (root * width)
    else:
        ctr, width, root = _histogram_root(model.p)
        c = basis.phi_tilde(ctr).conj().T @ (root * width)
    if np.linalg.norm(c) == 0:
        c = np.zeros(basis.size, dtype=complex)
        c[0] = 1.0
    return _normalize(np.asarray(c, dtype=complex))


def _register_start(model):
    if model.n > 0:
        return _normalize(np.sqrt(model.nvec / model.n).astype(complex))
    return _normalize(model.basis.adjoint(np.sqrt(model.mvec / model.m)))


def _jitter(c, amount, rng):
    return c * np.exp(1j * rng.uniform(-amount, amount, c.size))


# -- real-chart root search ------------------------------------------------


def _hermite_norms(size):
    j = np.arange(size)
    return np.exp(-0.5 * (j * math.log(2.0) + np.array([math.lgamma(k + 1) for k in j]) + 0.5 * math.log(math.pi)))


class _RootMoves:
    """Candidate starts that jump between real-chart local maxima.

    A real psi is ``Q(y) exp(-y^2/2)`` with ``Q`` a polynomial. Local maxima
    of the likelihood differ in how density dips are realized: a sign change
    at a real root of ``Q``, two nearby real roots, or a complex pair close
    to the real axis. The moves flip signs at real roots, split complex
    pairs into real pairs, and merge adjacent real roots into complex pairs.
    """

    def __init__(self, size):
        self.size = size
        self.norms = _hermite_norms(size)
        half = grid_half_width(ContinuousBasis(size))
        self.grid = np.linspace(-half, half, 8193)
        self.step = self.grid[1] - self.grid[0]
        self.table = _kernels.hermite_table(self.grid, size)

    def _from_roots(self, roots):
        b = np.real(npherm.hermfromroots(roots))
        d = np.zeros(self.size)
        d[: b.size] = b / self.norms[: b.size]
        nrm = np.linalg.norm(d)
        return d / nrm if nrm > 0 and np.all(np.isfinite(d)) else None

    def __call__(self, d):
        b = d * self.norms
        nz = np.flatnonzero(np.abs(b) > 1e-14 * np.abs(b).max())
        if nz.size == 0 or nz[-1] == 0:
            return []
        roots = npherm.hermroots(b[: nz[-1] + 1])
        tol = 1e-9 * np.maximum(1.0, np.abs(roots))
        is_real = np.abs(np.imag(roots)) < tol
        real = np.sort(np.real(roots[is_real]))
        upper = [z for z, r in zip(roots, is_real) if not r and np.imag(z) > 0]
        others = [z for z, r in zip(roots, is_real) if not r]
        out = []
        for z in upper:
            rest = [w for w in others if not (np.isclose(w, z) or np.isclose(w, np.conj(z)))] + list(real)
            for k in _SPLIT_WIDTHS:
                out.append(rest + [z.real - k * z.imag, z.real + k * z.imag])
            for h in _SPLIT_SPANS:
                out.append(rest + [z.real - h, z.real + h])
        if upper:
            turn = math.sqrt(2 * self.size + 1)
            spots = np.linspace(-turn, turn, _PAIR_GRID)
            for z in upper:
                rest = [w for w in others if not (np.isclose(w, z) or np.isclose(w, np.conj(z)))] + list(real)
                out.extend(rest + [u, v] for u, v in itertools.combinations(spots, 2))
        if len(upper) > 1:
            out.append(list(real) + [x for z in upper for x in (z.real - abs(z), z.real + abs(z))])
        for i, r in enumerate(real):
            rest = list(np.delete(real, i)) + others
            for f in _SHIFT_FACTORS:
                out.append(rest + [r * f])
        for i in range(real.size - 1):
            mid, half = 0.5 * (real[i] + real[i + 1]), 0.5 * (real[i + 1] - real[i])
            rest = list(np.delete(real, [i, i + 1])) + others
            for k in _MERGE_WIDTHS:
                out.append(rest + [mid + 1j * k * half, mid - 1j * k * half])
        cands = [v for v in (self._from_roots(r) for r in out) if v is not None]
        psi = self.table @ d
        inside = real[np.abs(real) < self.grid[-1]]
        for k in range(1, inside.size + 1):
            for subset in itertools.combinations(inside, k):
                sign = np.ones_like(self.grid)
                for z in subset:
                    sign[self.grid > z] *= -1.0
                v = self.table.T @ (psi * sign) * self.step
                nrm = np.linalg.norm(v)
                if nrm > 0:
                    cands.append(v / nrm)
        return cands


@lru_cache(maxsize=8)
def _root_moves(size):
    return _RootMoves(size)


def _root_search(chart, run, cfg):
    """Greedy hill-climb over root moves; returns the best run and move count.

    Every candidate gets a few cheap iterations; the most promising are
    screened with loose tolerances and only a winner is refined to the
    configured ones.
    """
    moves = _root_moves(chart.basis.size)
    quick = replace(cfg, max_iterations=min(cfg.max_iterations, _QUICK_ITERATIONS))
    screen = replace(cfg, tolerance_residual=1e-5, tolerance_loglik=1e-8,
                     max_iterations=min(cfg.max_iterations, 500))
    margin = 1e-7 * max(1.0, abs(run.loglik))
    accepted = 0
    for _ in range(_ROOT_SEARCH_ROUNDS):
        improved = False
        probes = [_iterate(chart, cand, quick) for cand in moves(run.c)]
        probes.sort(key=lambda r: -r.loglik)
        for probe in probes[:_REFINE_TOP]:
            trial = _iterate(chart, probe.c, screen)
            if trial.loglik <= run.loglik + margin:
                continue
            trial = _iterate(chart, trial.c, cfg)
            if trial.converged and trial.loglik > run.loglik + margin:
                run = trial
                accepted += 1
                improved = True
                break
        if not improved:
            break
    return run, accepted


# -- public solvers --------------------------------------------------------


def _finish(model, run, cfg, phases_unidentified, moves):
    est = StateVector.from_unnormalized(gauge_fix(run.c), model.basis.tag)
    c = np.asarray(est.coefficients)
    loglik, rc, hits = model.terms(c)
    lam = float(np.vdot(c, rc).real)
    resid = float(np.linalg.norm(rc - model.total * c) / model.total)
    return EstimationResult(
        estimate=est, lam=lam, log_likelihood=loglik, iterations=run.iterations,
        residual=resid, floor_hits=hits, converged=run.converged and resid < cfg.tolerance_residual,
        phases_unidentified=phases_unidentified, n=model.n, m=model.m,
        loglik_trace=run.trace, search_moves=moves)


def _solve(model, cfg, init, start_fn, frame):
    rng = np.random.default_rng(cfg.seed)
    c = np.asarray(_coeffs(init, model.basis), dtype=complex) if init is not None else start_fn(model)
    unidentified = model.n == 0 or model.m == 0
    chart = None
    if frame is not None:
        d = gauge_fix(c) / frame
        if np.max(np.abs(d.imag)) <= 1e-12:
            chart = _ChartModel(model, frame)
    if chart is None:
        if model.n > 0 and model.m > 0 and cfg.init_phase_jitter > 0:
            c = _jitter(c, cfg.init_phase_jitter, rng)
        best = _iterate(model, c, cfg)
        for _ in range(cfg.restarts):
            z = rng.standard_normal(model.basis.size) + 1j * rng.standard_normal(model.basis.size)
            best = _better(best, _iterate(model, z, cfg))
        return _finish(model, best, cfg, unidentified, 0)

    best = _iterate(chart, np.real(d), cfg)
    moves = 0
    if cfg.root_search and model.basis.size <= _ROOT_SEARCH_MAX_SIZE:
        best, moves = _root_search(chart, best, cfg)
    for _ in range(cfg.restarts):
        best = _better(best, _iterate(chart, rng.standard_normal(model.basis.size), cfg))
    best.c = best.c * frame
    return _finish(model, best, cfg, unidentified, moves)


def solve(basis, samples, config=None, init=None):
    """Estimate the state from continuous samples (or dispatch to the register solver).

    ``samples`` is a coordinate sample, a momentum sample, or a sequence of
    them. With a single observation space the estimate is kept on the real
    chart (up to the ``(-i)^j`` frame for momentum data), where local maxima
    are escaped by root moves; with both spaces it is fully complex.
    """
    if isinstance(basis, DiscreteBasis):
        return solve_register(basis, samples, config, init)
    cfg = config or EstimationConfig()
    model = _ContinuousModel(basis, samples, cfg.density_floor)
    if model.total < basis.size:
        raise EstimationError(f"{model.total} observations cannot identify {basis.size} coefficients")
    frame = None
    if model.m == 0:
        frame = np.ones(basis.size, dtype=complex)
    elif model.n == 0:
        frame = np.array([1, 1j, -1, -1j])[np.arange(basis.size) % 4]
    return _solve(model, cfg, init, _continuous_start, frame)


def solve_register(basis, counts, config=None, init=None):
    """Estimate a register state from direct and conjugate-basis counts.

    With ``m == 0`` the answer is ``sqrt(n_i / n)`` and phases are flagged
    as unidentified; with ``n == 0`` it is ``U^dagger sqrt(m_j / m)``.
    """
    cfg = config or EstimationConfig()
    model = _RegisterModel(basis, counts, cfg.density_floor)
    if model.total < basis.size:
        raise EstimationError(f"{model.total} observations cannot identify {basis.size} coefficients")
    return _solve(model, cfg, init, _register_start, None)


# -- order selection -------------------------------------------------------


@dataclass
class OrderReport:
    chosen: int
    rows: list
    penalty: str = "bic (experimental)"

    def to_json(self):
        return asdict(self)


def select_order(samples, s_candidates, family=None, config=None):
    """Pick the expansion size by a BIC-penalized log-likelihood.

    ``family`` maps a size to a basis (default: unit-scale Hermite). Each
    real parameter costs ``ln(n + m) / 2``; single-space fits carry ``s - 1``
    real parameters, two-space fits ``2 s - 2``. Non-convergent fits are
    reported but never chosen; ties go to the smaller size.
    """
    cands = sorted(set(int(s) for s in s_candidates))
    if not cands:
        raise EstimationError("no candidate sizes")
    family = family or (lambda s: ContinuousBasis(s))
    rows = []
    best = None
    for s in cands:
        res = solve(family(s), samples, config)
        k = (s - 1) if (res.n == 0 or res.m == 0) else (2 * s - 2)
        score = res.log_likelihood - 0.5 * k * math.log(res.n_total)
        rows.append({"s": s, "loglik": res.log_likelihood, "params": k, "score": score,
                     "converged": res.converged, "iterations": res.iterations})
        if res.converged and (best is None or score > best[1] + 1e-9 * abs(best[1])):
            best = (s, score)
    if best is None:
        raise EstimationError("no candidate size produced a converged fit")
    return OrderReport(best[0], rows)
