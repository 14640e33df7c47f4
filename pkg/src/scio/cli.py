"""Command-line surface.

Exit codes: 0 success, 1 verification failure, 2 usage or input error,
3 solver non-convergence. All randomness goes through --seed (default 0,
never entropy). SCIO_THREADS, when set, is the default worker cap.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .covariance import load_csv, perturb_to_pd, sample_covariance
from .errors import ScioError
from .matrix import read_matrix_text, write_matrix_text
from .oracle import (
    brute_force_column,
    column_objective,
    diamond_covariance,
    irrepresentable_margin,
    star_covariance,
    truth_support_matrix,
)
from .simgen import (
    BenchmarkConfig,
    GraphModelSpec,
    ascii_heatmap,
    run_benchmark,
    sample_gaussian,
    truth_matrix,
    write_pgm,
)
from .solver import (
    SolverConfig,
    estimate_precision,
    precision_to_json,
    solve_column,
)
from .tuning import CVPlan

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_USAGE = 2
EXIT_NO_CONVERGENCE = 3


def _default_threads() -> int:
    env = os.environ.get("SCIO_THREADS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=1e-4, help="solver accuracy (default 1e-4)")
    p.add_argument("--max-sweeps", type=int, default=10_000)
    p.add_argument("--no-warm-start", action="store_true")
    p.add_argument("--no-active-set", action="store_true")


def _solver_config(args) -> SolverConfig:
    return SolverConfig(tol=args.tol, max_sweeps=args.max_sweeps,
                        warm_start=not args.no_warm_start,
                        active_set=not args.no_active_set)


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True, choices=("decay", "sparse", "block"))
    p.add_argument("--decay-base", type=float, default=0.6)
    p.add_argument("--sparse-prob", type=float, default=0.1)
    p.add_argument("--sparse-value", type=float, default=0.5)
    p.add_argument("--block-size", type=int, default=5)
    p.add_argument("--block-offdiag", type=float, default=0.5)


def _model_spec(args, p_block: int) -> GraphModelSpec:
    return GraphModelSpec(kind=args.model, p_block=p_block,
                          decay_base=args.decay_base,
                          sparse_prob=args.sparse_prob,
                          sparse_value=args.sparse_value,
                          block_size=args.block_size,
                          block_offdiag=args.block_offdiag,
                          seed=args.seed)


def _cmd_estimate(args) -> int:
    data = load_csv(args.input, has_header=args.header, delimiter=args.delimiter)
    cfg = _solver_config(args)
    cov = perturb_to_pd(sample_covariance(data))

    if args.cv:
        plan = CVPlan(folds_h=args.cv_folds, grid_n=args.cv_grid_n,
                      grid_upper_a=args.cv_grid_max,
                      split_fraction=args.cv_split_fraction, seed=args.seed)
        est = estimate_precision(data, "cv", cfg, cv_plan=plan, threads=args.threads)
        lam_desc = f"cv over {args.cv_grid_n} grid points"
    elif args.lambda_file:
        lambdas = [float(tok) for tok in
                   open(args.lambda_file).read().split()]
        est = estimate_precision(cov, lambdas, cfg, threads=args.threads)
        lam_desc = f"per-column vector from {args.lambda_file}"
    else:
        if args.lam is None:
            raise ValueError("one of --lambda, --lambda-file, --cv is required")
        est = estimate_precision(cov, args.lam, cfg, threads=args.threads)
        lam_desc = f"fixed {args.lam}"

    if args.output_json:
        with open(args.output_json, "w") as fh:
            fh.write(precision_to_json(est) + "\n")
    if args.output_matrix:
        write_matrix_text(est.omega_hat, args.output_matrix)

    metas = est.per_column_meta
    max_kkt = max(m.kkt_residual for m in metas)
    bad = [m.index_i for m in metas if not m.converged]
    print(f"p={est.dim} n={data.n} lambda={lam_desc}")
    print(f"rho_sigma={cov.rho_applied} rho_omega={est.rho_applied}")
    print(f"max_kkt_residual={max_kkt:.3e} sweeps_total={sum(m.sweeps_used for m in metas)}")
    if bad:
        print(f"non-converged columns: {bad}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def _cmd_cv(args) -> int:
    from .tuning import estimate_with_cv

    data = load_csv(args.input, has_header=args.header, delimiter=args.delimiter)
    cfg = _solver_config(args)
    plan = CVPlan(folds_h=args.cv_folds, grid_n=args.cv_grid_n,
                  grid_upper_a=args.cv_grid_max,
                  split_fraction=args.cv_split_fraction, seed=args.seed)
    collected: list = []
    est = estimate_with_cv(data, plan, cfg, threads=args.threads,
                           collect_cv=collected)
    payload = {
        "p": est.dim,
        "chosen_lambda": [float(x) for x in est.lambda_per_column],
        "rho_applied": est.rho_applied,
        "columns": [
            {
                "column": res.column_i,
                "lambdas": [float(x) for x in res.lambdas],
                "risks": [float(x) for x in res.risks],
                "chosen_index": res.chosen_index,
                "chosen_lambda": res.chosen_lambda,
            }
            for res in collected
        ],
    }
    with open(args.output_json, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")
    if args.output_matrix:
        write_matrix_text(est.omega_hat, args.output_matrix)
    distinct = sorted(set(float(x) for x in est.lambda_per_column))
    print(f"p={est.dim} n={data.n} folds={plan.folds_h} grid_n={plan.grid_n}")
    print(f"distinct chosen lambdas: {len(distinct)}")
    bad = [m.index_i for m in est.per_column_meta if not m.converged]
    if bad:
        print(f"non-converged columns: {bad}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def _cmd_simulate(args) -> int:
    if args.p < 2 or args.p % 2:
        raise ValueError("--p must be even and >= 2 (two equal blocks)")
    spec = _model_spec(args, args.p // 2)
    truth = truth_matrix(spec)
    data = sample_gaussian(truth, args.n, seed=args.seed)
    write_matrix_text(truth, args.out_truth)
    with open(args.out_data, "w") as fh:
        for row in data.rows:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
    print(f"wrote truth ({args.p}x{args.p}) to {args.out_truth}, "
          f"{args.n} observations to {args.out_data}")
    return EXIT_OK


def _cmd_benchmark(args) -> int:
    for p in args.p:
        if p < 2 or p % 2:
            raise ValueError(f"--p values must be even and >= 2, got {p}")
    spec = _model_spec(args, args.p[0] // 2)
    cfg = BenchmarkConfig(model=spec, n_train=args.n_train,
                          n_validate=args.n_validate,
                          p_values=tuple(args.p), replicates=args.reps,
                          grid_n=args.grid_n, selection=args.selection,
                          seed=args.seed,
                          interpret_as_covariance=args.interpret_covariance,
                          solver=_solver_config(args), threads=args.threads)
    result = run_benchmark(cfg)
    print(result.to_table())
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(result.to_json() + "\n")
    if args.heatmap:
        for p in cfg.p_values:
            path = args.heatmap if len(cfg.p_values) == 1 else \
                f"{args.heatmap}.p{p}.pgm"
            write_pgm(path, result.support_frequency[p], args.reps)
    if args.ascii_heatmap:
        for p in cfg.p_values:
            print(f"support frequency, p={p}:")
            print(ascii_heatmap(result.support_frequency[p], args.reps))
    total_failures = sum(result.failures.values())
    if total_failures:
        print(f"warning: {total_failures} replicate(s) failed and were excluded",
              file=sys.stderr)
    return EXIT_OK


def _cmd_check_condition(args) -> int:
    if args.graph:
        if args.rho is None:
            raise ValueError("--rho is required with --graph")
        sigma = diamond_covariance(args.rho) if args.graph == "diamond" \
            else star_covariance(args.rho)
        omega = truth_support_matrix(sigma)
        label = f"{args.graph} graph, rho={args.rho}"
    else:
        if not args.sigma or not args.truth:
            raise ValueError("either --graph or both --sigma and --truth are required")
        sigma = read_matrix_text(args.sigma)
        omega = read_matrix_text(args.truth)
        label = f"{args.sigma} against {args.truth}"
    margin = irrepresentable_margin(sigma, omega)
    verdict = "holds" if margin > 0 else "fails"
    print(f"{label}: incoherence margin = {margin:.6f} ({verdict})")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"margin": margin, "holds": margin > 0}, fh)
            fh.write("\n")
    return EXIT_OK


def _cmd_verify(args) -> int:
    if args.p > 8:
        raise ValueError("--p must be <= 8 (exhaustive oracle bound)")
    if args.p < 2:
        raise ValueError("--p must be >= 2")
    if args.trials < 1:
        raise ValueError("--trials must be >= 1")
    rng = np.random.default_rng(args.seed)
    cfg = SolverConfig(tol=args.tol)
    worst = 0.0
    for t in range(args.trials):
        g = rng.standard_normal((args.p + 3, args.p))
        sigma = g.T @ g / (args.p + 3) + 0.05 * np.eye(args.p)
        sigma = (sigma + sigma.T) / 2.0
        i = int(rng.integers(args.p))
        lam = float(np.exp(rng.uniform(np.log(0.01), np.log(2.0))))
        got = solve_column(sigma, i, lam, cfg).beta
        want = brute_force_column(sigma, i, lam)
        gap = column_objective(sigma, i, got, lam) - column_objective(sigma, i, want, lam)
        worst = max(worst, gap)
        if gap > 1e-6:
            print(f"MISMATCH at trial {t}: objective gap {gap:.3e}", file=sys.stderr)
            json.dump({"sigma": sigma.tolist(), "i": i, "lambda": lam,
                       "solver_beta": got.tolist(), "oracle_beta": want.tolist()},
                      sys.stderr)
            sys.stderr.write("\n")
            return EXIT_VERIFY_FAIL
    print(f"verified {args.trials} instances (p={args.p}); worst objective gap {worst:.3e}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scio",
        description="Sparse column-wise inverse operator: precision matrix "
                    "estimation, tuning, simulation benchmarks, diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pe = sub.add_parser("estimate", help="estimate a precision matrix from CSV data")
    pe.add_argument("--input", required=True, help="CSV of observations (rows) x variables")
    pe.add_argument("--header", action="store_true", help="input has a header row")
    pe.add_argument("--delimiter", default=None, help="field delimiter (default: sniffed)")
    pe.add_argument("--lambda", dest="lam", type=float, default=None,
                    help="single penalty for every column")
    pe.add_argument("--lambda-file", default=None,
                    help="whitespace-separated per-column penalties")
    pe.add_argument("--cv", action="store_true", help="pick penalties by cross-validation")
    pe.add_argument("--cv-folds", type=int, default=1)
    pe.add_argument("--cv-grid-n", type=int, default=50)
    pe.add_argument("--cv-grid-max", type=float, default=None)
    pe.add_argument("--cv-split-fraction", type=float, default=0.5)
    pe.add_argument("--seed", type=int, default=0)
    pe.add_argument("--threads", type=int, default=_default_threads())
    pe.add_argument("--output-json", default=None)
    pe.add_argument("--output-matrix", default=None)
    _add_solver_flags(pe)
    pe.set_defaults(func=_cmd_estimate)

    pc = sub.add_parser("cv", help="cross-validated estimate with per-column risk dumps")
    pc.add_argument("--input", required=True)
    pc.add_argument("--header", action="store_true")
    pc.add_argument("--delimiter", default=None)
    pc.add_argument("--cv-folds", type=int, default=1)
    pc.add_argument("--cv-grid-n", type=int, default=50)
    pc.add_argument("--cv-grid-max", type=float, default=None)
    pc.add_argument("--cv-split-fraction", type=float, default=0.5)
    pc.add_argument("--seed", type=int, default=0)
    pc.add_argument("--threads", type=int, default=_default_threads())
    pc.add_argument("--output-json", required=True)
    pc.add_argument("--output-matrix", default=None)
    _add_solver_flags(pc)
    pc.set_defaults(func=_cmd_cv)

    ps = sub.add_parser("simulate", help="generate a truth matrix and Gaussian samples")
    _add_model_flags(ps)
    ps.add_argument("--p", type=int, required=True, help="total dimension (even)")
    ps.add_argument("--n", type=int, required=True, help="number of observations")
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--out-data", required=True)
    ps.add_argument("--out-truth", required=True)
    ps.set_defaults(func=_cmd_simulate)

    pb = sub.add_parser("benchmark", help="replicated simulation study")
    _add_model_flags(pb)
    pb.add_argument("--p", type=int, nargs="+", required=True)
    pb.add_argument("--n-train", type=int, default=100)
    pb.add_argument("--n-validate", type=int, default=100)
    pb.add_argument("--reps", type=int, default=100)
    pb.add_argument("--grid-n", type=int, default=50)
    pb.add_argument("--selection", choices=("bregman_validation", "cv_column"),
                    default="bregman_validation")
    pb.add_argument("--seed", type=int, default=0)
    pb.add_argument("--interpret-covariance", action="store_true",
                    help="treat the model matrix as the covariance instead of the precision")
    pb.add_argument("--threads", type=int, default=_default_threads())
    pb.add_argument("--json", default=None, help="write full per-replicate records")
    pb.add_argument("--heatmap", default=None, help="write support-frequency PGM")
    pb.add_argument("--ascii-heatmap", action="store_true")
    _add_solver_flags(pb)
    pb.set_defaults(func=_cmd_benchmark)

    pk = sub.add_parser("check-condition", help="column-incoherence diagnostic")
    pk.add_argument("--graph", choices=("diamond", "star"), default=None)
    pk.add_argument("--rho", type=float, default=None)
    pk.add_argument("--sigma", default=None, help="covariance matrix text file")
    pk.add_argument("--truth", default=None, help="precision truth matrix text file")
    pk.add_argument("--json", default=None)
    pk.set_defaults(func=_cmd_check_condition)

    pv = sub.add_parser("verify", help="differential test: solver vs exhaustive oracle")
    pv.add_argument("--p", type=int, default=5)
    pv.add_argument("--trials", type=int, default=100)
    pv.add_argument("--seed", type=int, default=0)
    pv.add_argument("--tol", type=float, default=1e-10,
                    help="solver accuracy for the comparison (default 1e-10)")
    pv.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, ScioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
