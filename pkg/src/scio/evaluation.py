"""Loss metrics, support recovery rates, and the likelihood-based scores.

Support counts run over unordered off-diagonal pairs: the symmetrized
estimate makes ordered pairs redundant, and the diagonal is excluded since
it is never zero for a positive definite matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matrix import (
    as_sym,
    elementwise_max_norm,
    frobenius_norm,
    log_det_pd,
    spectral_norm,
)


@dataclass(frozen=True)
class LossReport:
    """Norms of the estimation error, plus Frobenius^2 / p."""

    spectral: float
    frobenius: float
    elementwise_max: float
    frobenius_sq_over_p: float


@dataclass(frozen=True)
class SupportReport:
    """Edge recovery over unordered off-diagonal pairs.

    ``tp_pct``/``tn_pct`` are None when their denominator is empty (no true
    edges / no true non-edges) rather than silently 0.
    """

    tp_pct: float | None
    tn_pct: float | None
    true_pos: int
    true_neg: int
    false_pos: int
    false_neg: int


def loss_report(omega_hat, omega_truth) -> LossReport:
    """Spectral, Frobenius, and max-entry norms of the difference."""
    a = as_sym(omega_hat)
    b = as_sym(omega_truth)
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    diff = as_sym(a.array - b.array)
    fro = frobenius_norm(diff)
    return LossReport(
        spectral=spectral_norm(diff),
        frobenius=fro,
        elementwise_max=elementwise_max_norm(diff),
        frobenius_sq_over_p=fro * fro / a.dim,
    )


def support_report(omega_hat, omega_truth, threshold: float = 0.0) -> SupportReport:
    """TP%/TN% of the estimated edge set against the truth's exact nonzeros.

    ``threshold`` applies to the estimate (coordinate descent produces exact
    zeros, so the default 0 means exact support); truth entries count as
    edges whenever they are nonzero.
    """
    a = as_sym(omega_hat)
    b = as_sym(omega_truth)
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    iu = np.triu_indices(a.dim, k=1)
    est_edge = np.abs(a.array[iu]) > threshold
    true_edge = b.array[iu] != 0
    tp = int(np.sum(est_edge & true_edge))
    fn = int(np.sum(~est_edge & true_edge))
    fp = int(np.sum(est_edge & ~true_edge))
    tn = int(np.sum(~est_edge & ~true_edge))
    tp_pct = 100.0 * tp / (tp + fn) if tp + fn else None
    tn_pct = 100.0 * tn / (tn + fp) if tn + fp else None
    return SupportReport(tp_pct=tp_pct, tn_pct=tn_pct,
                         true_pos=tp, true_neg=tn, false_pos=fp, false_neg=fn)


def bregman_loss(sigma_val, omega) -> float:
    """<Omega, Sigma> - log det(Omega); requires a PD omega."""
    s = as_sym(sigma_val)
    o = as_sym(omega)
    if s.dim != o.dim:
        raise ValueError(f"dimension mismatch: {s.dim} vs {o.dim}")
    return float(np.sum(s.array * o.array)) - log_det_pd(o)


def classification_score(x, mean_k, mean_k2, omega_k, omega_k2) -> float:
    """Log-likelihood difference between two Gaussian classes at ``x``.

    Positive favors the first class. Computed as g(k) - g(k2) with
    g(class) = log det(Omega) - (x - mean)' Omega (x - mean), so swapping
    the classes negates the score exactly, not just up to roundoff.
    """
    xv = np.asarray(x, dtype=float)

    def half(mean, omega):
        o = as_sym(omega)
        d = xv - np.asarray(mean, dtype=float)
        return log_det_pd(o) - float(d @ o.array @ d)

    return half(mean_k, omega_k) - half(mean_k2, omega_k2)


def mean_sd(values) -> tuple[float, float]:
    """Mean and sample SD (ddof=1); SD is 0 for a single value."""
    v = np.asarray(list(values), dtype=float)
    if v.size == 0:
        raise ValueError("no values to aggregate")
    sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return float(v.mean()), sd


def format_cell(mean: float, sd: float, digits: int = 2) -> str:
    return f"{mean:.{digits}f}({sd:.{digits}f})"


def format_table(title: str, header: list[str], rows: list[list[str]]) -> str:
    """Aligned plain-text table with a title line."""
    widths = [len(h) for h in header]
    for row in rows:
        for k, cell in enumerate(row):
            widths[k] = max(widths[k], len(cell))
    def fmt(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    lines = [title, fmt(header), fmt(["-" * w for w in widths])]
    lines.extend(fmt(r) for r in rows)
    return "\n".join(lines)
