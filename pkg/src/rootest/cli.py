"""Command-line interface: ``rootest <command> [options]``.

Exit codes: 0 success, 1 compute failure (non-convergence under
``--strict``), 2 usage or file errors. Results are JSON; density and
amplitude grids are CSV for external plotting.
"""

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy import stats

from . import ehrenfest, inference
from .basis import BasisError, ContinuousBasis, basis_from_dict, dft_unitary
from .estimator import EstimationConfig, EstimationError, solve, solve_register
from .io import (IngestError, ingest_samples, output_dir, read_state, write_counts_json, write_grid_csv,
                 write_json, write_sample_csv)
from .sampling import (CoordinateSample, MomentumSample, RegisterCounts, SamplingError, random_state,
                       sample_coordinate, sample_momentum, sample_register)
from .state import (StateError, StateVector, conjugate_amplitudes, density_at, fidelity, momentum_density_at,
                    psi_at)


class UsageError(Exception):
    pass


class ComputeError(Exception):
    pass


def _log(msg):
    print(msg, file=sys.stderr)


# -- shared helpers --------------------------------------------------------


def _config(args):
    kw = {}
    for name in ("max_iterations", "tolerance_loglik", "tolerance_residual", "damping", "density_floor",
                 "init_phase_jitter", "restarts"):
        v = getattr(args, name, None)
        if v is not None:
            kw[name] = v
    if getattr(args, "no_root_search", False):
        kw["root_search"] = False
    kw["seed"] = args.seed
    try:
        return EstimationConfig(**kw)
    except EstimationError as exc:
        raise UsageError(str(exc)) from None


def _register_size(args):
    if getattr(args, "qubits", None) is not None:
        s = 2 ** args.qubits
        if args.s is not None and args.s != s:
            raise UsageError(f"--s {args.s} disagrees with --qubits {args.qubits}")
        return s
    if args.s is None:
        raise UsageError("register model needs --s or --qubits")
    return args.s


def _truth(args, basis, real):
    if getattr(args, "state", None):
        st = read_state(args.state)
        if st.size != basis.size:
            raise UsageError(f"{args.state}: state has {st.size} coefficients, expected {basis.size}")
        return StateVector(st.coefficients, basis.tag)
    return random_state(basis.size, args.seed, real=real, basis_tag=basis.tag)


def _finish_estimate(result, strict):
    if not result.converged:
        _log(f"warning: no convergence after {result.iterations} iterations (residual {result.residual:.3e})")
        if strict:
            raise ComputeError("estimation did not converge")


def _continuous_truth_required(args):
    return args.real or (args.n == 0 or args.m == 0)


# -- commands --------------------------------------------------------------


def cmd_simulate(args):
    out = output_dir(args.out)
    files = []
    if args.model == "register":
        basis = dft_unitary(_register_size(args))
        truth = _truth(args, basis, args.real)
        counts = sample_register(truth, basis, args.n, args.m, args.seed)
        files.append(str(write_counts_json(out / "counts.json", counts)))
    else:
        if args.s is None:
            raise UsageError("continuous model needs --s")
        basis = ContinuousBasis(args.s, args.scale)
        truth = _truth(args, basis, _continuous_truth_required(args))
        if args.n > 0:
            smp = sample_coordinate(truth, basis, args.n, args.seed)
            files.append(str(write_sample_csv(out / "coordinate.csv", smp)))
        if args.m > 0:
            smp = sample_momentum(truth, basis, args.m, args.seed + 1)
            files.append(str(write_sample_csv(out / "momentum.csv", smp)))
        if not files:
            raise UsageError("need --n or --m > 0")
    files.append(str(write_json(out / "state.json", truth.to_json(basis))))
    summary = {"command": "simulate", "model": args.model, "s": basis.size, "n": args.n, "m": args.m,
               "seed": args.seed, "files": files}
    write_json(out / "simulate.json", summary)
    return 0


def _load_continuous(args):
    samples = []
    scales = set()
    for flag, want in (("coordinate", CoordinateSample), ("momentum", MomentumSample)):
        path = getattr(args, flag)
        if path is None:
            continue
        smp = ingest_samples(path)
        if not isinstance(smp, want):
            raise UsageError(f"{path}: file holds {getattr(smp, 'space', 'register')} data but was given as --{flag}")
        samples.append(smp)
        scales.add(smp.scale)
    if not samples:
        raise UsageError("continuous model needs --coordinate and/or --momentum")
    if args.scale == "auto":
        coord = [s for s in samples if isinstance(s, CoordinateSample)]
        if not coord:
            raise UsageError("--scale auto needs coordinate data")
        scale = float(np.std(coord[0].points) * math.sqrt(2.0))
    elif args.scale is not None:
        scale = float(args.scale)
    else:
        if len(scales) > 1:
            raise UsageError(f"sample files disagree on scale: {sorted(scales)}")
        scale = scales.pop()
    return samples, scale


def cmd_estimate(args):
    out = output_dir(args.out)
    cfg = _config(args)
    if args.model == "register":
        if args.counts is None:
            raise UsageError("register model needs --counts")
        counts = ingest_samples(args.counts)
        if not isinstance(counts, RegisterCounts):
            raise UsageError(f"{args.counts}: expected register counts JSON")
        s = counts.direct.size
        if args.s is not None and args.s != s:
            raise UsageError(f"--s {args.s} but {args.counts} has {s} states")
        basis = dft_unitary(s)
        result = solve_register(basis, counts, cfg)
    else:
        if args.s is None:
            raise UsageError("continuous model needs --s")
        samples, scale = _load_continuous(args)
        basis = ContinuousBasis(args.s, scale)
        try:
            result = solve(basis, samples, cfg)
        except EstimationError as exc:
            raise UsageError(str(exc)) from None
        if args.grid:
            _write_continuous_grid(out / "grid.csv", basis, result.estimate,
                                   read_state(args.truth) if args.truth else None)
    doc = result.to_json(basis)
    doc["command"] = "estimate"
    write_json(out / "estimate.json", doc)
    _finish_estimate(result, args.strict)
    return 0


def _write_continuous_grid(path, basis, est, truth):
    half = basis.scale * (math.sqrt(2.0 * (2 * basis.size + 1)) + 3.0)
    x = np.linspace(-half, half, 801)
    p = x / basis.scale**2
    cols = {"x": x, "density_est": density_at(est, basis, x), "momentum_density_est": momentum_density_at(est, basis, p)}
    psi = psi_at(est, basis, x)
    cols["psi_est_re"], cols["psi_est_im"] = psi.real, psi.imag
    if truth is not None:
        truth = StateVector(truth.coefficients, basis.tag)
        # align the global phase of the estimate for side-by-side plotting
        cols["density_true"] = density_at(truth, basis, x)
        cols["momentum_density_true"] = momentum_density_at(truth, basis, p)
        phase = np.vdot(est.coefficients, truth.coefficients)
        phase = phase / abs(phase) if abs(phase) > 0 else 1.0
        cols["psi_est_re"], cols["psi_est_im"] = (psi * phase).real, (psi * phase).imag
        tpsi = psi_at(truth, basis, x)
        cols["psi_true_re"], cols["psi_true_im"] = tpsi.real, tpsi.imag
    cols["p"] = p
    write_grid_csv(path, cols)


def _analyze_trial(job):
    model, s, scale, truth_c, n, m, seed, cfg = job
    truth = StateVector(truth_c)
    if model == "register":
        basis = dft_unitary(s)
        truth = StateVector(truth_c, basis.tag)
        res = solve_register(basis, sample_register(truth, basis, n, m, seed), cfg)
    else:
        basis = ContinuousBasis(s, scale)
        truth = StateVector(truth_c, basis.tag)
        samples = []
        if n:
            samples.append(sample_coordinate(truth, basis, n, seed))
        if m:
            samples.append(sample_momentum(truth, basis, m, seed + 1_000_003))
        res = solve(basis, samples, cfg)
    return fidelity(res.estimate, truth), bool(res.converged)


def cmd_analyze(args):
    out = output_dir(args.out)
    cfg = _config(args)
    if args.model == "register":
        s = _register_size(args)
        basis = dft_unitary(s)
        truth = _truth(args, basis, args.real)
        single = args.n == 0 or args.m == 0
    else:
        if args.s is None:
            raise UsageError("continuous model needs --s")
        s = args.s
        basis = ContinuousBasis(s, args.scale)
        single = args.n == 0 or args.m == 0
        truth = _truth(args, basis, single or args.real)
    dof = args.dof or ((s - 1) if single else (2 * s - 2))
    n_total = args.n + args.m
    jobs = [(args.model, s, getattr(args, "scale", 1.0), np.asarray(truth.coefficients), args.n, args.m,
             args.seed + 1 + t, cfg) for t in range(args.trials)]
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            results = list(pool.map(_analyze_trial, jobs))
    else:
        results = [_analyze_trial(j) for j in jobs]
    fids = np.array([r[0] for r in results])
    stat = 4.0 * n_total * (1.0 - fids)
    q = inference.chi2_quantile(dof, args.alpha)
    ks = stats.kstest(stat, lambda v: np.array([inference.chi2_cdf(t, dof) for t in np.atleast_1d(v)]))
    doc = {"command": "analyze", "model": args.model, "s": s, "n": args.n, "m": args.m, "trials": args.trials,
           "seed": args.seed, "dof": dof, "alpha": args.alpha,
           "mean_statistic": float(stat.mean()), "expected_mean": dof,
           "coverage": float(np.mean(stat <= q)), "ks_statistic": float(ks.statistic),
           "ks_pvalue": float(ks.pvalue), "converged": int(sum(r[1] for r in results)),
           "mean_fidelity": float(fids.mean()), "statistics": stat.tolist()}
    write_json(out / "analyze.json", doc)
    return 0


def cmd_test(args):
    out = output_dir(args.out)
    est = read_state(args.estimate)
    if args.other:
        if args.n1 is None or args.n2 is None:
            raise UsageError("homogeneity test needs --n1 and --n2")
        other = read_state(args.other)
        report = inference.homogeneity_test(est, args.n1, other, args.n2, args.dof)
    else:
        if args.reference is None or args.n_total is None:
            raise UsageError("equality test needs --reference and --n-total")
        report = inference.state_equality_test(est, read_state(args.reference), args.n_total, args.dof)
    doc = report.to_json()
    if args.cone_alpha is not None:
        n_total = args.n_total if args.n_total is not None else args.n1
        doc["cone"] = inference.confidence_cone(est, n_total, args.cone_alpha, args.dof).to_json()
    write_json(out / "test.json", doc)
    return 0


def cmd_ehrenfest(args):
    out = output_dir(args.out)
    basis = ContinuousBasis(args.s, args.scale)
    pot = ehrenfest.POTENTIALS[args.potential]
    if args.shift:
        pot = pot.shifted(args.shift)
    if args.frequencies == "harmonic":
        w = ehrenfest.harmonic_frequencies(args.s) + args.shift
    else:
        try:
            w = np.array([float(v) for v in args.frequencies.split(",")])
        except ValueError:
            raise UsageError(f"bad --frequencies {args.frequencies!r}") from None
    try:
        problem = ehrenfest.EhrenfestProblem(basis, pot, w, args.mass)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    report = ehrenfest.check(problem, args.tolerance, args.hamiltonian_tolerance)
    doc = report.to_json()
    doc.update({"command": "ehrenfest-check", "potential": pot.name, "mass": args.mass,
                "frequencies": problem.frequencies.tolist()})
    write_json(out / "ehrenfest.json", doc)
    if args.strict and not report.passed:
        raise ComputeError("quantization check failed")
    return 0


def cmd_reproduce(args):
    out = output_dir(args.out)
    s = 2 ** args.qubits
    basis = dft_unitary(s)
    truth = random_state(s, args.seed, basis_tag=basis.tag)
    counts = sample_register(truth, basis, args.n, args.m, args.seed + 1)
    res = solve_register(basis, counts, _config(args))
    est = res.estimate
    # align the global phase with the truth for plotting
    ov = np.vdot(est.coefficients, truth.coefficients)
    est_c = np.asarray(est.coefficients) * (ov / abs(ov) if abs(ov) > 0 else 1.0)
    idx = np.arange(s)
    write_grid_csv(out / "fig12_probabilities.csv", {
        "index": idx,
        "true_direct": np.abs(truth.coefficients) ** 2,
        "est_direct": np.abs(est_c) ** 2,
        "freq_direct": counts.direct / max(counts.n, 1),
        "true_conjugate": np.abs(conjugate_amplitudes(truth, basis)) ** 2,
        "est_conjugate": np.abs(basis.forward(est_c)) ** 2,
        "freq_conjugate": counts.conjugate / max(counts.m, 1),
    })
    write_grid_csv(out / "fig12_amplitudes.csv", {
        "index": idx, "true_re": truth.coefficients.real, "true_im": truth.coefficients.imag,
        "est_re": est_c.real, "est_im": est_c.imag,
    })
    doc = res.to_json(basis)
    doc.update({"command": "reproduce-fig12", "qubits": args.qubits, "seed": args.seed,
                "fidelity": fidelity(est, truth), "fidelity_threshold": 0.99,
                "meets_threshold": fidelity(est, truth) >= 0.99, "truth": truth.to_json(basis)})
    write_json(out / "fig12.json", doc)
    _finish_estimate(res, args.strict)
    return 0


# -- parser ----------------------------------------------------------------


def _scale_arg(v):
    if v == "auto":
        return v
    try:
        f = float(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"scale must be a positive number or 'auto', got {v!r}") from None
    if not f > 0:
        raise argparse.ArgumentTypeError("scale must be positive")
    return f


def _add_estimator_flags(p):
    g = p.add_argument_group("estimator overrides")
    g.add_argument("--max-iterations", type=int)
    g.add_argument("--tolerance-loglik", type=float)
    g.add_argument("--tolerance-residual", type=float)
    g.add_argument("--damping", type=float)
    g.add_argument("--density-floor", type=float)
    g.add_argument("--init-phase-jitter", type=float)
    g.add_argument("--restarts", type=int)
    g.add_argument("--no-root-search", action="store_true")
    p.add_argument("--strict", action="store_true", help="exit 1 when the fit does not converge")


def build_parser():
    parser = argparse.ArgumentParser(prog="rootest", description="Root state estimation from complementing experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=0):
        p.add_argument("--seed", type=int, default=seed)
        p.add_argument("--out", help="output directory (default $ROOTEST_OUTPUT_DIR or .)")

    p = sub.add_parser("simulate", help="draw synthetic samples from a known state")
    p.add_argument("--model", choices=("continuous", "register"), default="continuous")
    p.add_argument("--s", type=int)
    p.add_argument("--qubits", type=int)
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--state", help="true state JSON (default: random from --seed)")
    p.add_argument("--real", action="store_true", help="random true state with real coefficients")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="maximum-likelihood state estimate")
    p.add_argument("--model", choices=("continuous", "register"), default="continuous")
    p.add_argument("--s", type=int)
    p.add_argument("--coordinate")
    p.add_argument("--momentum")
    p.add_argument("--counts")
    p.add_argument("--scale", type=_scale_arg, help="basis scale, or 'auto' (sample std * sqrt 2); default from file")
    p.add_argument("--grid", action="store_true", help="also write grid.csv with density and psi curves")
    p.add_argument("--truth", help="true state JSON to include in grid.csv")
    common(p)
    _add_estimator_flags(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("analyze", help="Monte Carlo check of the chi-square deviation law")
    p.add_argument("--model", choices=("continuous", "register"), default="continuous")
    p.add_argument("--s", type=int)
    p.add_argument("--qubits", type=int)
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--state")
    p.add_argument("--real", action="store_true")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--dof", type=int)
    p.add_argument("--workers", type=int, default=1)
    common(p)
    _add_estimator_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("test", help="chi-square equality or homogeneity test")
    p.add_argument("--estimate", required=True)
    p.add_argument("--reference")
    p.add_argument("--n-total", type=int)
    p.add_argument("--other")
    p.add_argument("--n1", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--dof", type=int, required=True)
    p.add_argument("--cone-alpha", type=float, help="also report the confidence cone at this level")
    common(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("ehrenfest-check", help="check the Heisenberg matrix equation for a potential")
    p.add_argument("--potential", choices=sorted(ehrenfest.POTENTIALS), default="harmonic")
    p.add_argument("--s", type=int, default=20)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--mass", type=float, default=1.0)
    p.add_argument("--shift", type=float, default=0.0, help="constant added to the potential")
    p.add_argument("--frequencies", default="harmonic", help="'harmonic' (j + 1/2) or a comma-separated list")
    p.add_argument("--tolerance", type=float, default=1e-10)
    p.add_argument("--hamiltonian-tolerance", type=float, default=1e-8)
    p.add_argument("--strict", action="store_true", help="exit 1 when the check fails")
    common(p)
    p.set_defaults(func=cmd_ehrenfest)

    p = sub.add_parser("reproduce-fig12", help="quantum-register experiment: truth vs estimate grids")
    p.add_argument("--qubits", type=int, default=8)
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--m", type=int, default=10000)
    common(p, seed=1)
    _add_estimator_flags(p)
    p.set_defaults(func=cmd_reproduce)
    return parser


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ComputeError as exc:
        _log(f"error: {exc}")
        return 1
    except (UsageError, IngestError, BasisError, StateError, SamplingError, EstimationError,
            inference.InferenceError, OSError) as exc:
        _log(f"error: {exc}")
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
