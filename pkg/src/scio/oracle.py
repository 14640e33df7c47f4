"""Independent small-instance solvers and diagnostics.

The exhaustive sign-pattern solver here is the ground truth the iterative
column solver is differential-tested against; it shares nothing with the
coordinate-descent path beyond the objective definition. The module also
hosts the column-incoherence diagnostic and the toy covariance graphs it is
exercised on.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .matrix import SymMatrix, as_sym

# Beyond this the 3^p sign-pattern enumeration is pointless to wait for.
BRUTE_FORCE_MAX_DIM = 12

# Slack for sign / subgradient feasibility checks on enumerated candidates.
_FEAS_TOL = 1e-10


@dataclass(frozen=True)
class SupportSet:
    """Nonzero pattern of a symmetric matrix, per column and as index pairs."""

    dim: int
    columns: tuple[tuple[int, ...], ...]

    @property
    def pairs(self) -> frozenset:
        return frozenset(
            (j, i) for i, col in enumerate(self.columns) for j in col
        )

    def column(self, i: int) -> tuple[int, ...]:
        return self.columns[i]


def support_of(a, threshold: float = 0.0) -> SupportSet:
    """Entries with absolute value strictly above ``threshold``."""
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    m = as_sym(a)
    cols = tuple(
        tuple(int(j) for j in np.flatnonzero(np.abs(m.array[:, i]) > threshold))
        for i in range(m.dim)
    )
    return SupportSet(dim=m.dim, columns=cols)


def column_objective(sigma_hat, i: int, beta, lam: float) -> float:
    """Penalized column objective 0.5 b'Sb - b_i + lam*|b|_1."""
    s = as_sym(sigma_hat).array
    b = np.asarray(beta, dtype=float)
    return float(0.5 * b @ s @ b - b[i] + lam * np.abs(b).sum())


def kkt_residual(beta, sigma_hat, i: int, lam: float) -> float:
    """Largest violation of the subgradient optimality conditions.

    For nonzero coordinates the gradient plus lam*sign must vanish; for zero
    coordinates the gradient must sit inside [-lam, lam]. Returns 0 exactly
    at the minimizer.
    """
    s = as_sym(sigma_hat).array
    b = np.asarray(beta, dtype=float)
    g = s @ b
    g[i] -= 1.0
    nz = b != 0
    viol_nz = np.abs(g[nz] + lam * np.sign(b[nz]))
    viol_z = np.maximum(np.abs(g[~nz]) - lam, 0.0)
    worst = 0.0
    if viol_nz.size:
        worst = max(worst, float(viol_nz.max()))
    if viol_z.size:
        worst = max(worst, float(viol_z.max()))
    return worst


def brute_force_column(sigma_hat, i: int, lam: float) -> np.ndarray:
    """Exact minimizer of the penalized column objective by enumeration.

    Every sign pattern in {-1, 0, +1}^p is a candidate: fixing the signs
    makes the stationarity condition linear on the support, so each support
    is one (batched) linear solve. Candidates must reproduce their assumed
    signs and satisfy the subgradient bound off the support; among feasible
    candidates the lowest objective wins, with exact ties broken by
    lexicographic sign pattern. Supports whose principal submatrix is
    singular are skipped.
    """
    m = as_sym(sigma_hat)
    p = m.dim
    if p > BRUTE_FORCE_MAX_DIM:
        raise ValueError(
            f"brute force enumeration limited to p <= {BRUTE_FORCE_MAX_DIM}, got {p}"
        )
    if not 0 <= i < p:
        raise ValueError(f"column index {i} out of range for p={p}")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    s = m.array
    e = np.zeros(p)
    e[i] = 1.0
    scale = max(1.0, float(np.abs(s).max()))

    best_obj = np.inf
    best_pattern = None
    best_beta = None

    def consider(pattern, beta, obj):
        nonlocal best_obj, best_pattern, best_beta
        if obj < best_obj or (obj == best_obj and pattern < best_pattern):
            best_obj, best_pattern, best_beta = obj, pattern, beta

    # Zero-support candidate: feasible iff |e_i|_inf <= lam.
    if 1.0 <= lam + _FEAS_TOL:
        consider(tuple([0] * p), np.zeros(p), 0.0)

    idx_all = np.arange(p)
    for mask in range(1, 2 ** p):
        supp = [j for j in range(p) if mask >> j & 1]
        k = len(supp)
        sub = s[np.ix_(supp, supp)]
        signs = np.array(list(product((-1.0, 1.0), repeat=k))).T  # (k, 2^k)
        rhs = e[supp][:, None] - lam * signs
        try:
            betas = np.linalg.solve(sub, rhs)  # (k, 2^k)
        except np.linalg.LinAlgError:
            continue
        off = np.setdiff1d(idx_all, supp)
        g_off = s[np.ix_(off, supp)] @ betas - e[off][:, None] if off.size else None
        for c in range(betas.shape[1]):
            beta_s = betas[:, c]
            z = signs[:, c]
            # Candidates whose solved signs disagree with the assumed pattern
            # (including exact zeros) belong to a different pattern.
            if (np.sign(beta_s) != z).any():
                continue
            if g_off is not None and (np.abs(g_off[:, c]) > lam + _FEAS_TOL * scale).any():
                continue
            beta = np.zeros(p)
            beta[supp] = beta_s
            obj = float(0.5 * beta_s @ sub @ beta_s - beta[i] + lam * np.abs(beta_s).sum())
            pattern = tuple(int(z[supp.index(j)]) if j in supp else 0 for j in range(p))
            consider(pattern, beta, obj)

    if best_beta is None:
        raise ValueError("no feasible candidate found (is sigma_hat PD?)")
    return best_beta


def irrepresentable_margin(sigma, omega_truth) -> float:
    """Column-incoherence margin 1 - max_i ||S[off,supp] S[supp,supp]^{-1}||_inf.

    Supports come from the nonzero pattern of ``omega_truth`` per column.
    Positive means the incoherence condition holds with that margin; columns
    with full support contribute nothing (no off-support rows).
    """
    sg = as_sym(sigma)
    om = as_sym(omega_truth)
    if sg.dim != om.dim:
        raise ValueError("sigma and omega_truth dimensions differ")
    s = sg.array
    p = sg.dim
    worst = 0.0
    for i in range(p):
        supp = np.flatnonzero(om.array[:, i] != 0)
        if supp.size == 0:
            raise ValueError(f"column {i} of omega_truth is entirely zero")
        off = np.setdiff1d(np.arange(p), supp)
        if off.size == 0:
            continue
        sub = s[np.ix_(supp, supp)]
        try:
            x = np.linalg.solve(sub, s[np.ix_(supp, off)])
        except np.linalg.LinAlgError as exc:
            raise ValueError(
                f"support submatrix for column {i} is singular"
            ) from exc
        worst = max(worst, float(np.abs(x).sum(axis=0).max()))
    return 1.0 - worst


def truth_support_matrix(sigma, zero_tol: float = 1e-10) -> SymMatrix:
    """Invert a small covariance exactly and zero entries below ``zero_tol``."""
    sg = as_sym(sigma)
    om = np.linalg.inv(sg.array)
    om = (om + om.T) / 2.0
    om[np.abs(om) < zero_tol] = 0.0
    return SymMatrix(om)


def diamond_covariance(rho: float) -> SymMatrix:
    """4x4 covariance whose inverse has the diamond support.

    Unit diagonal, sigma_23 = 0, sigma_14 = 2 rho^2, every other off-diagonal
    entry rho (0-based: entries (1,2) and (0,3) are the special ones). Its
    inverse has zeros exactly at those two positions, so node pairs {2,3} and
    {1,4} are the missing edges.
    """
    s = np.full((4, 4), float(rho))
    np.fill_diagonal(s, 1.0)
    s[1, 2] = s[2, 1] = 0.0
    s[0, 3] = s[3, 0] = 2.0 * rho * rho
    return SymMatrix(s)


def star_covariance(rho: float) -> SymMatrix:
    """4x4 covariance with hub node 0: sigma_0j = rho, others rho^2."""
    s = np.full((4, 4), float(rho) ** 2)
    np.fill_diagonal(s, 1.0)
    s[0, 1:] = rho
    s[1:, 0] = rho
    return SymMatrix(s)
