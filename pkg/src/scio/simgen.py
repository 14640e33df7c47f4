"""Ground-truth graph models, Gaussian sampling, and the benchmark runner.

Truth matrices are built as two diagonal blocks, the second 4x the first,
with the first block drawn from one of three families (geometric decay,
Bernoulli sparse, compound-symmetry blocks). By default the composed matrix
is interpreted as the *precision* matrix of the sampling distribution (the
support-recovery target); a flag flips it to the covariance reading.

Randomness is PCG64 via numpy Generators. The benchmark derives one child
SeedSequence per (p, replicate) pair: root.spawn(len(p_values))[ip] spawned
again over replicates, so any replicate is reproducible in isolation.
"""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .covariance import DataMatrix, perturb_to_pd, sample_covariance
from .errors import NotPositiveDefiniteError, ScioError
from .evaluation import (
    bregman_loss,
    format_cell,
    format_table,
    loss_report,
    mean_sd,
    support_report,
)
from .matrix import SymMatrix, as_sym
from .oracle import truth_support_matrix
from .solver import (
    SolverConfig,
    assemble_and_symmetrize,
    default_lambda_grid,
    ensure_pd_estimate,
    solve_column,
)
from .tuning import CVPlan, estimate_with_cv

MODEL_KINDS = ("decay", "sparse", "block")
SELECTION_RULES = ("bregman_validation", "cv_column")

_COND_TOL = 1e-8
_COND_MAX_ITER = 200
_SPARSE_RETRIES = 5


@dataclass(frozen=True)
class GraphModelSpec:
    """First-block family and its parameters; the composed truth is 2*p_block."""

    kind: str
    p_block: int
    decay_base: float = 0.6
    sparse_prob: float = 0.1
    sparse_value: float = 0.5
    block_size: int = 5
    block_offdiag: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"kind must be one of {MODEL_KINDS}, got {self.kind!r}")
        if self.p_block < 1:
            raise ValueError("p_block must be >= 1")
        if not abs(self.decay_base) < 1:
            raise ValueError("decay_base must satisfy |base| < 1")
        if not 0.0 <= self.sparse_prob <= 1.0:
            raise ValueError("sparse_prob must be in [0, 1]")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")


def gen_decay(p: int, base: float = 0.6) -> SymMatrix:
    """Entries base^|i-j|; positive definite for |base| < 1."""
    if not abs(base) < 1:
        raise ValueError("need |base| < 1")
    idx = np.arange(p)
    return SymMatrix(float(base) ** np.abs(np.subtract.outer(idx, idx)))


def _bisect_condition_shift(eigs: np.ndarray, p: int) -> float:
    """Diagonal shift delta with cond(O + delta I) == p, by bisection.

    For delta > -lambda_min the matrix is PD and the condition number
    (lambda_max + delta)/(lambda_min + delta) decreases monotonically from
    +inf to 1, so the bracket always contains the target.
    """
    lam_min = float(eigs.min())
    lam_max = float(eigs.max())
    spectral = max(abs(lam_min), abs(lam_max))
    lo = max(0.0, -lam_min) + 1e-15
    hi = 10.0 * spectral
    if (lam_max + hi) / (lam_min + hi) > p:
        raise ScioError("condition-number bisection bracket failed")
    for _ in range(_COND_MAX_ITER):
        mid = 0.5 * (lo + hi)
        cond = (lam_max + mid) / (lam_min + mid)
        if abs(cond - p) <= _COND_TOL:
            return mid
        if cond > p:
            lo = mid
        else:
            hi = mid
    raise ScioError(
        f"condition-number bisection did not reach |cond - p| <= {_COND_TOL}"
    )


def gen_sparse(p: int, prob: float = 0.1, value: float = 0.5, seed=0) -> SymMatrix:
    """Bernoulli off-diagonals, diagonal shifted to condition number p.

    Each upper-triangle entry is ``value`` with probability ``prob``; the
    shift delta making cond = p is found by bisection and the result is
    rescaled to an exact unit diagonal. A draw with no off-diagonal entries
    at all cannot reach condition number p; it returns the identity with a
    warning. Unusable draws are retried a few times before giving up.
    """
    if not 0.0 <= prob <= 1.0:
        raise ValueError("prob must be in [0, 1]")
    if p < 1:
        raise ValueError("p must be >= 1")
    rng = np.random.default_rng(seed)
    last_err: Optional[ScioError] = None
    for _ in range(_SPARSE_RETRIES):
        o = np.zeros((p, p))
        iu = np.triu_indices(p, k=1)
        draws = (rng.random(len(iu[0])) < prob) * float(value)
        o[iu] = draws
        o[(iu[1], iu[0])] = draws
        if not o.any():
            warnings.warn(
                "sparse model draw has no off-diagonal entries; returning identity "
                "(condition number p is unattainable)",
                stacklevel=2,
            )
            return SymMatrix.identity(p)
        eigs = np.linalg.eigvalsh(o)
        try:
            delta = _bisect_condition_shift(eigs, p)
        except ScioError as err:
            last_err = err
            continue
        omega0 = o + delta * np.eye(p)
        d = np.sqrt(np.diag(omega0))
        out = omega0 / np.outer(d, d)
        np.fill_diagonal(out, 1.0)
        return SymMatrix.from_average(out)
    raise ScioError(f"sparse model generation failed after {_SPARSE_RETRIES} draws") \
        from last_err


def gen_block(p: int, block_size: int = 5, offdiag: float = 0.5, seed=0) -> SymMatrix:
    """Compound-symmetry diagonal blocks, then one random relabeling of nodes.

    The trailing block is short when block_size does not divide p. The
    permutation is applied simultaneously to rows and columns, so the
    spectrum is unchanged.
    """
    if p < 1 or block_size < 1:
        raise ValueError("p and block_size must be >= 1")
    a = np.zeros((p, p))
    for start in range(0, p, block_size):
        stop = min(start + block_size, p)
        a[start:stop, start:stop] = offdiag
    np.fill_diagonal(a, 1.0)
    perm = np.random.default_rng(seed).permutation(p)
    return SymMatrix(a[np.ix_(perm, perm)])


def two_block_compose(first_block) -> SymMatrix:
    """Block-diagonal [[B, 0], [0, 4B]]."""
    b = as_sym(first_block).array
    p = b.shape[0]
    out = np.zeros((2 * p, 2 * p))
    out[:p, :p] = b
    out[p:, p:] = 4.0 * b
    return SymMatrix(out)


def truth_matrix(spec: GraphModelSpec, rng=None) -> SymMatrix:
    """Composed two-block truth for the given model family."""
    source = spec.seed if rng is None else rng
    if spec.kind == "decay":
        first = gen_decay(spec.p_block, spec.decay_base)
    elif spec.kind == "sparse":
        first = gen_sparse(spec.p_block, spec.sparse_prob, spec.sparse_value, source)
    else:
        first = gen_block(spec.p_block, spec.block_size, spec.block_offdiag, source)
    return two_block_compose(first)


def _covariance_factor(sigma: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("covariance for sampling is not PD") from exc


def sample_gaussian(omega_truth, n: int, seed=0) -> DataMatrix:
    """n zero-mean Gaussian rows whose precision matrix is ``omega_truth``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    om = as_sym(omega_truth).array
    try:
        sigma = np.linalg.inv(om)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("truth precision matrix is singular") from exc
    sigma = (sigma + sigma.T) / 2.0
    chol = _covariance_factor(sigma)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, om.shape[0]))
    return DataMatrix(z @ chol.T)


@dataclass(frozen=True)
class BenchmarkConfig:
    """Simulation-study protocol: models, sizes, replication, selection rule."""

    model: GraphModelSpec
    n_train: int = 100
    n_validate: int = 100
    p_values: tuple[int, ...] = (50,)
    replicates: int = 100
    grid_n: int = 50
    selection: str = "bregman_validation"
    seed: int = 0
    interpret_as_covariance: bool = False
    solver: SolverConfig = SolverConfig()
    threads: int = 1

    def __post_init__(self):
        if self.selection not in SELECTION_RULES:
            raise ValueError(f"selection must be one of {SELECTION_RULES}")
        if self.replicates < 1 or self.grid_n < 1:
            raise ValueError("replicates and grid_n must be >= 1")
        if self.n_train < 2 or self.n_validate < 2:
            raise ValueError("n_train and n_validate must be >= 2")
        p_values = tuple(int(p) for p in self.p_values)
        if not p_values:
            raise ValueError("p_values must be nonempty")
        for p in p_values:
            if p < 2 or p % 2:
                raise ValueError(f"p must be even and >= 2 (two equal blocks), got {p}")
        object.__setattr__(self, "p_values", p_values)


@dataclass(frozen=True)
class ReplicateRecord:
    p: int
    replicate: int
    spectral: float
    frobenius: float
    elementwise_max: float
    frobenius_sq_over_p: float
    tp_pct: Optional[float]
    tn_pct: Optional[float]
    true_pos: int
    true_neg: int
    false_pos: int
    false_neg: int
    shared_lambda: Optional[float]
    lambda_min_chosen: float
    lambda_max_chosen: float
    sigma_rho: float
    omega_rho: float
    max_kkt_converged: float
    n_not_converged: int
    max_clime_gap: Optional[float]


@dataclass(frozen=True)
class BenchmarkResult:
    config: dict
    records: dict  # p -> list[ReplicateRecord]
    support_frequency: dict  # p -> int ndarray
    failures: dict  # p -> int

    def aggregate(self, p: int) -> dict:
        recs = self.records[p]
        out = {}
        for name in ("spectral", "frobenius", "elementwise_max", "frobenius_sq_over_p"):
            out[name] = mean_sd(getattr(r, name) for r in recs)
        for name in ("tp_pct", "tn_pct"):
            vals = [getattr(r, name) for r in recs if getattr(r, name) is not None]
            out[name] = mean_sd(vals) if vals else (None, None)
        return out

    def to_json(self) -> str:
        blocks = []
        for p in sorted(self.records):
            agg = self.aggregate(p)
            blocks.append({
                "p": p,
                "aggregate": {
                    k: {"mean": v[0], "sd": v[1]} for k, v in agg.items()
                },
                "replicates": [
                    {k: getattr(r, k) for k in ReplicateRecord.__dataclass_fields__}
                    for r in self.records[p]
                ],
                "support_frequency": self.support_frequency[p].tolist(),
                "failures": self.failures[p],
            })
        return json.dumps({"config": self.config, "results": blocks}, sort_keys=True)

    def to_table(self) -> str:
        sel = self.config["selection"]
        reps = self.config["replicates"]
        loss_rows = []
        supp_rows = []
        for p in sorted(self.records):
            agg = self.aggregate(p)
            loss_rows.append([str(p), sel]
                             + [format_cell(*agg[k]) for k in
                                ("spectral", "frobenius", "elementwise_max",
                                 "frobenius_sq_over_p")])
            cells = []
            for k in ("tn_pct", "tp_pct"):
                mean, sd = agg[k]
                cells.append("undefined" if mean is None else format_cell(mean, sd))
            supp_rows.append([str(p), sel] + cells)
        losses = format_table(
            f"Average (SD) losses over {reps} replicates",
            ["p", "selection", "spectral", "frobenius", "max entry", "fro^2/p"],
            loss_rows,
        )
        support = format_table(
            f"Average (SD) support recovery over {reps} replicates",
            ["p", "selection", "TN%", "TP%"],
            supp_rows,
        )
        return losses + "\n\n" + support


def _fit_bregman_selected(cov_train, sigma_val, grid, cfg_solver, n_train):
    """Shared-penalty fit: full path per column, pick by validation Bregman loss.

    Ties go to the first (largest) grid penalty. Every candidate estimate is
    PD-repaired before its log-det loss, so the loss is always defined.
    """
    p = cov_train.dim
    paths = []
    for i in range(p):
        sols = []
        init = None
        for lam in grid:
            sol = solve_column(cov_train.sigma_hat, i, lam, cfg_solver, init=init)
            sols.append(sol)
            if cfg_solver.warm_start:
                init = sol.beta
        paths.append(sols)

    best_loss = np.inf
    best = None
    for k in range(len(grid)):
        est = assemble_and_symmetrize([paths[i][k] for i in range(p)], rho=0.0)
        est = ensure_pd_estimate(est, n_train)
        loss = bregman_loss(sigma_val, est.omega_hat)
        if loss < best_loss:
            best_loss = loss
            best = est
    gap = 0.0
    s = cov_train.sigma_hat.array
    for i in range(p):
        for sol in paths[i]:
            g = s @ sol.beta
            g[i] -= 1.0
            gap = max(gap, float(np.abs(g).max()) - sol.lam)
    return best, gap


def _run_replicate(p, rep_index, cfg: BenchmarkConfig, seed_seq):
    rng = np.random.default_rng(seed_seq)
    spec = replace(cfg.model, p_block=p // 2)
    truth = truth_matrix(spec, rng)
    if cfg.interpret_as_covariance:
        omega_eval = truth_support_matrix(truth)
        sampler_precision = omega_eval
    else:
        omega_eval = truth
        sampler_precision = truth
    train = sample_gaussian(sampler_precision, cfg.n_train, rng)
    validate = sample_gaussian(sampler_precision, cfg.n_validate, rng)

    cov_train = perturb_to_pd(sample_covariance(train))
    sigma_val = sample_covariance(validate).sigma_hat

    if cfg.selection == "bregman_validation":
        grid = default_lambda_grid(cov_train.sigma_hat, num=cfg.grid_n)
        est, gap = _fit_bregman_selected(cov_train, sigma_val, grid,
                                         cfg.solver, cfg.n_train)
        shared_lambda = float(est.lambda_per_column[0])
        max_gap: Optional[float] = gap
    else:
        plan = CVPlan(grid_n=cfg.grid_n, seed=int(rng.integers(2 ** 32)))
        est = estimate_with_cv(train, plan, cfg.solver)
        shared_lambda = None
        max_gap = None

    losses = loss_report(est.omega_hat, omega_eval)
    supp = support_report(est.omega_hat, omega_eval)
    metas = est.per_column_meta
    converged_kkt = [m.kkt_residual for m in metas if m.converged]
    record = ReplicateRecord(
        p=p,
        replicate=rep_index,
        spectral=losses.spectral,
        frobenius=losses.frobenius,
        elementwise_max=losses.elementwise_max,
        frobenius_sq_over_p=losses.frobenius_sq_over_p,
        tp_pct=supp.tp_pct,
        tn_pct=supp.tn_pct,
        true_pos=supp.true_pos,
        true_neg=supp.true_neg,
        false_pos=supp.false_pos,
        false_neg=supp.false_neg,
        shared_lambda=shared_lambda,
        lambda_min_chosen=float(est.lambda_per_column.min()),
        lambda_max_chosen=float(est.lambda_per_column.max()),
        sigma_rho=cov_train.rho_applied,
        omega_rho=est.rho_applied,
        max_kkt_converged=float(max(converged_kkt)) if converged_kkt else 0.0,
        n_not_converged=sum(not m.converged for m in metas),
        max_clime_gap=max_gap,
    )
    support_mask = est.omega_hat.array != 0.0
    return record, support_mask


def run_benchmark(cfg: BenchmarkConfig) -> BenchmarkResult:
    """Run the replicated protocol and aggregate losses and support rates.

    Replicates that raise are excluded with a warning and counted in
    ``failures``. Replicates may run concurrently (``cfg.threads``); results
    are folded in replicate order, so scheduling cannot change the output.
    """
    records: dict = {}
    freq: dict = {}
    failures: dict = {}
    root = np.random.SeedSequence(cfg.seed)
    per_p_seqs = root.spawn(len(cfg.p_values))

    for ip, p in enumerate(cfg.p_values):
        rep_seqs = per_p_seqs[ip].spawn(cfg.replicates)

        def one(r):
            try:
                return _run_replicate(p, r, cfg, rep_seqs[r])
            except Exception as exc:  # noqa: BLE001 - per-replicate isolation
                warnings.warn(f"replicate {r} (p={p}) failed: {exc}", stacklevel=2)
                return None

        if cfg.threads and cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                outcomes = list(pool.map(one, range(cfg.replicates)))
        else:
            outcomes = [one(r) for r in range(cfg.replicates)]

        kept = [o for o in outcomes if o is not None]
        if not kept:
            raise ScioError(f"all {cfg.replicates} replicates failed for p={p}")
        records[p] = [rec for rec, _ in kept]
        freq[p] = np.sum([mask for _, mask in kept], axis=0).astype(int)
        failures[p] = cfg.replicates - len(kept)

    config = {
        "model": cfg.model.kind,
        "p_values": list(cfg.p_values),
        "n_train": cfg.n_train,
        "n_validate": cfg.n_validate,
        "replicates": cfg.replicates,
        "grid_n": cfg.grid_n,
        "selection": cfg.selection,
        "seed": cfg.seed,
        "interpret_as_covariance": cfg.interpret_as_covariance,
        "decay_base": cfg.model.decay_base,
        "sparse_prob": cfg.model.sparse_prob,
        "sparse_value": cfg.model.sparse_value,
        "block_size": cfg.model.block_size,
        "block_offdiag": cfg.model.block_offdiag,
    }
    return BenchmarkResult(config=config, records=records,
                           support_frequency=freq, failures=failures)


def write_pgm(path, frequency, max_count: int) -> None:
    """ASCII PGM of a support-frequency matrix: 0/max is white, max/max black."""
    f = np.asarray(frequency, dtype=int)
    if max_count < 1:
        raise ValueError("max_count must be >= 1")
    if f.min() < 0 or f.max() > max_count:
        raise ValueError("frequencies must lie in [0, max_count]")
    h, w = f.shape
    lines = ["P2", f"{w} {h}", str(max_count)]
    inverted = max_count - f
    lines.extend(" ".join(str(v) for v in row) for row in inverted)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def ascii_heatmap(frequency, max_count: int) -> str:
    """Terminal rendering of a support-frequency matrix (darker = more often)."""
    ramp = " .:-=+*#%@"
    f = np.asarray(frequency, dtype=float)
    if max_count < 1:
        raise ValueError("max_count must be >= 1")
    idx = np.rint(f / max_count * (len(ramp) - 1)).astype(int)
    idx = np.clip(idx, 0, len(ramp) - 1)
    return "\n".join("".join(ramp[v] for v in row) for row in idx)
