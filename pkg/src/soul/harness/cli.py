"""Command-line entry point: ``python -m soul <subcommand> ...``.

Exit codes: 0 success, 1 validation failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from ..kernel import NonFiniteStateError
from ..optimizer import ReplicateFailure, default_workers, replicate, soul_run, write_trace_csv
from ..schedules import check_fixed_batch, check_increasing_batch
from .config import ConfigError, load_config
from .experiments import build_experiment, evaluate, natural_theta, schedule_warnings

logger = logging.getLogger("soul")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _vec(values) -> str:
    values = np.atleast_1d(values)
    return _fmt(values[0]) if values.size == 1 else "[" + ",".join(_fmt(v) for v in values) + "]"


def _out_dir(cfg, override) -> Path:
    out = Path(override) if override else cfg.resolve(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args):
    cfg = load_config(args.config)
    return cfg


def _warn_schedule(exp) -> None:
    for message in schedule_warnings(exp.schedules):
        print(f"warning: {message}", file=sys.stderr)


# --- subcommands ---------------------------------------------------------------

def cmd_run(args) -> int:
    cfg = _load(args)
    exp = build_experiment(cfg, args.seed)
    _warn_schedule(exp)
    trace = soul_run(exp.model, exp.theta0, exp.x0, exp.schedules, exp.soul_config)
    out = _out_dir(cfg, args.out_dir)
    write_trace_csv(trace, out / "trace.csv")
    theta_hat = natural_theta(exp, trace.theta_hat)
    if theta_hat.size <= 10:
        shown = _vec(theta_hat)
    else:
        np.savetxt(out / "theta_hat.csv", theta_hat[:, None], fmt="%.17g", header="theta_hat", comments="")
        shown = f"{out / 'theta_hat.csv'}"
    if args.evaluate:
        for key, value in evaluate(exp, cfg, trace.theta_hat).items():
            print(f"{key}={value}")
    print(f"theta_hat={shown} wall_time_s={trace.wall_time:.3f}")
    return EXIT_OK


def cmd_replicate(args) -> int:
    cfg = _load(args)
    exp = build_experiment(cfg, args.seed)
    _warn_schedule(exp)
    n = args.n if args.n is not None else cfg.replicates
    start = time.perf_counter()
    results = replicate(exp.model, exp.theta0, exp.x0, exp.schedules, exp.soul_config, n, args.workers)
    wall = time.perf_counter() - start
    out = _out_dir(cfg, args.out_dir)
    ok = [natural_theta(exp, r) for r in results if not isinstance(r, ReplicateFailure)]
    dim = exp.model.dim_theta
    with open(out / "replicates.csv", "w", newline="\n") as fh:
        fh.write(",".join(["replicate"] + [f"theta_hat_{i}" for i in range(dim)]) + "\n")
        for i, r in enumerate(results):
            vals = ["nan"] * dim if isinstance(r, ReplicateFailure) else [_fmt(v) for v in natural_theta(exp, r)]
            fh.write(",".join([str(i)] + vals) + "\n")
    if ok:
        first = np.array([v[0] for v in ok])
        counts, edges = np.histogram(first, bins=args.bins)
        with open(out / "histogram.csv", "w", newline="\n") as fh:
            fh.write("bin_lo,bin_hi,count\n")
            for lo, hi, cnt in zip(edges[:-1], edges[1:], counts):
                fh.write(f"{_fmt(lo)},{_fmt(hi)},{int(cnt)}\n")
        print(f"theta_hat={_vec(np.mean(ok, axis=0))} wall_time_s={wall:.3f}")
    failed = len(results) - len(ok)
    if failed:
        print(f"error: {failed} of {n} replicates failed", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_thme_scan(args) -> int:
    from ..validation.thme import ChainConfig, thme_scan

    cfg = _load(args)
    for key in ("scan_min", "scan_max"):
        if cfg.values[key] is None:
            raise ConfigError(f"missing required key {key!r} for thme-scan", key)
    exp = build_experiment(cfg, args.seed)
    if exp.model.dim_theta != 1:
        raise UsageError("thme-scan needs a scalar theta")
    grid = np.linspace(cfg.scan_min, cfg.scan_max, cfg.scan_points)
    chain = ChainConfig(gamma=cfg.scan_gamma, burnin=cfg.scan_burnin, thin=cfg.scan_thin,
                        n_chains=cfg.scan_chains, seed=exp.soul_config.seed)
    start = time.perf_counter()
    scan = thme_scan(exp.model, grid, cfg.scan_samples, chain, x0=exp.x0)
    wall = time.perf_counter() - start
    out = _out_dir(cfg, args.out_dir)
    scan.to_csv(out / "thme_scan.csv")
    star = "nan" if scan.theta_star is None else _fmt(scan.theta_star)
    print(f"theta_star={star} wall_time_s={wall:.3f}")
    if scan.theta_star is None:
        print("error: fitted quadratic is not concave", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .oracles import gradient_suite, normalizer_quadrature_error

    ok = True
    for res in gradient_suite(args.points, args.seed, tol=args.tol):
        ok &= res.passed
        print(f"{res.name}: max_rel_err={res.max_rel_err:.3e} {'PASS' if res.passed else 'FAIL'}")
    err = normalizer_quadrature_error(np.geomspace(1e-2, 1e9, 23), 4e-5)
    passed = err < 1e-8
    ok &= passed
    print(f"log_normalizer_vs_quadrature: max_rel_err={err:.3e} {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_check_schedule(args) -> int:
    if args.fixed_batch:
        verdict = check_fixed_batch(args.a, args.b)
        lo, hi = verdict.b_interval
        interval = f"({lo:.6g},{hi:.6g})" if lo < hi else "empty (needs a > 5/6)"
        print(f"{'valid' if verdict.valid else 'invalid'}, b∈{interval}")
        return EXIT_OK if verdict.valid else EXIT_FAIL
    verdict = check_increasing_batch(args.a, args.b, args.c)
    if verdict.valid:
        print("valid")
        return EXIT_OK
    print("invalid, violated: " + ", ".join(verdict.violated))
    return EXIT_FAIL


def cmd_drift_check(args) -> int:
    from ..validation.drift import drift_check

    norms = [float(v) for v in args.norms.split(",")]
    points = np.zeros((len(norms), args.dim))
    points[:, 0] = norms
    ok = True
    for gamma in args.gamma:
        report = drift_check(lambda x: -x, (args.m1, args.m2, args.c, args.r1), gamma, points, args.n_mc, args.seed)
        if args.out:
            base = Path(args.out)
            base.mkdir(parents=True, exist_ok=True)
            report.to_csv(base / f"drift_gamma_{gamma:g}.csv")
        for xn, lhs, se, rhs, p in zip(norms, report.lhs, report.stderr, report.rhs, report.passed):
            print(f"gamma={gamma:g} |x|={xn:g} lhs={lhs:.6g} se={se:.3g} rhs={rhs:.6g} {'PASS' if p else 'FAIL'}")
        ok &= report.all_passed
    return EXIT_OK if ok else EXIT_FAIL


def _write_matrix(path, matrix, header) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for row in np.atleast_2d(matrix):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def cmd_gen_data(args) -> int:
    from .generators import gen_audio_problem, gen_random_effects_problem

    cfg = _load(args)
    out = _out_dir(cfg, args.out_dir)
    if cfg.experiment == "audio":
        prob = gen_audio_problem(cfg.problem_seed, ell=cfg.ell, d_notes=cfg.d_notes, d_positions=cfg.d_positions,
                                 p=cfg.p, sigma=cfg.sigma, lam=cfg.lam, sparsity=cfg.sparsity)
        _write_matrix(out / "observation.csv", np.column_stack([prob.sample_idx, prob.observation]), "index,y")
        _write_matrix(out / "signal.csv", prob.truth[:, None], "z")
        _write_matrix(out / "x_true.csv", prob.x_true[:, None], "x")
    elif cfg.experiment == "random_effects":
        prob, beta, x_true = gen_random_effects_problem(
            cfg.problem_seed, d_y=cfg.d_y, p=cfg.p_fixed, d=cfg.d_random, sigma_true=cfg.sigma_true,
            zero_frac=cfg.zero_frac, lam=cfg.huber_lam)
        _write_matrix(out / "covariates.csv", prob.covariates, ",".join(f"v{i}" for i in range(prob.p)))
        _write_matrix(out / "loadings.csv", prob.loadings, ",".join(f"z{i}" for i in range(prob.d)))
        _write_matrix(out / "labels.csv", prob.labels[:, None], "y")
        _write_matrix(out / "beta_true.csv", beta[:, None], "beta")
        _write_matrix(out / "x_true.csv", x_true[:, None], "x")
    else:
        raise UsageError(f"gen-data supports audio and random_effects, not {cfg.experiment}")
    print(f"wrote {cfg.experiment} problem (seed {cfg.problem_seed}) to {out}")
    return EXIT_OK


def _sweep_point(args):
    prob, theta = args
    from ..models.audio import map_reconstruct, mse

    return mse(prob.truth, prob.synthesize(map_reconstruct(prob, theta).x))


def cmd_map_sweep(args) -> int:
    cfg = _load(args)
    if cfg.experiment != "audio":
        raise UsageError("map-sweep needs an audio config")
    exp = build_experiment(cfg)
    prob = exp.extras["problem"]
    grid = np.geomspace(cfg.sweep_min, cfg.sweep_max, cfg.sweep_points)
    jobs = [(prob, float(t)) for t in grid]
    workers = min(args.workers or default_workers(), len(jobs))
    start = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            errors = list(pool.map(_sweep_point, jobs))
    else:
        errors = [_sweep_point(job) for job in jobs]
    out = _out_dir(cfg, args.out_dir)
    _write_matrix(out / "map_sweep.csv", np.column_stack([grid, errors]), "theta,mse")
    best = int(np.argmin(errors))
    print(f"theta_best={_fmt(grid[best])} mse_best={_fmt(errors[best])} wall_time_s={time.perf_counter() - start:.3f}")
    return EXIT_OK


# --- parser --------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="soul", description="Maximum marginal likelihood by Langevin stochastic approximation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_config(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="experiment config file")
        p.add_argument("--out-dir", help="override out_dir from the config")
        p.set_defaults(func=func)
        return p

    p = with_config("run", cmd_run, "run SOUL once and write the trace")
    p.add_argument("--seed", type=int)
    p.add_argument("--evaluate", action="store_true", help="print experiment diagnostics")

    p = with_config("replicate", cmd_replicate, "independent runs and a histogram of estimates")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--bins", type=int, default=20)

    p = with_config("thme-scan", cmd_thme_scan, "marginal likelihood on a theta grid")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("gradcheck", help="check every model gradient against finite differences")
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-5)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("check-schedule", help="test schedule exponents against the convergence conditions")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--c", type=float, default=0.0)
    p.add_argument("--fixed-batch", action="store_true")
    p.set_defaults(func=cmd_check_schedule)

    p = sub.add_parser("drift-check", help="Monte Carlo drift check on a standard Gaussian target")
    p.add_argument("--m1", type=float, default=1.0)
    p.add_argument("--m2", type=float, default=0.5)
    p.add_argument("--c", type=float, default=0.0)
    p.add_argument("--r1", type=float, default=2.0)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--gamma", type=float, nargs="+", default=[0.05, 0.1, 0.5])
    p.add_argument("--norms", default="0,1,2,5,10")
    p.add_argument("--n-mc", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="directory for per-gamma CSV reports")
    p.set_defaults(func=cmd_drift_check)

    with_config("gen-data", cmd_gen_data, "write a synthetic problem to CSV files")

    p = with_config("map-sweep", cmd_map_sweep, "MAP reconstruction error over a log grid of theta")
    p.add_argument("--workers", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NonFiniteStateError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
