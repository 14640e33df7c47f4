"""Sample covariance construction and the positive-definiteness perturbation.

The covariance uses the 1/n divisor (not 1/(n-1)); callers needing the
unbiased version can pre-scale. When the sample covariance is singular or
indefinite, ``perturb_to_pd`` adds rho = |lambda_min| + n^{-1/2} to the
diagonal and records it, so downstream reports can always state what was
added.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .matrix import SymMatrix, min_eigenvalue

# Minimum eigenvalues in (0, this] are treated as non-PD and perturbed, so a
# later factorization cannot fail from roundoff.
PD_EIG_CUTOFF = 1e-12


class DataMatrix:
    """n x p sample matrix, one observation per row. Immutable."""

    __slots__ = ("_rows",)

    def __init__(self, rows):
        a = np.array(rows, dtype=float)
        if a.ndim == 1:
            a = a.reshape(-1, 1)
        if a.ndim != 2:
            raise ValueError(f"expected a 2-d sample matrix, got shape {a.shape}")
        if a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError("data matrix must have at least one row and one column")
        if not np.isfinite(a).all():
            raise ValueError("data matrix entries must be finite")
        a.setflags(write=False)
        self._rows = a

    @property
    def rows(self) -> np.ndarray:
        return self._rows

    @property
    def n(self) -> int:
        return self._rows.shape[0]

    @property
    def p(self) -> int:
        return self._rows.shape[1]

    def subset(self, indices) -> "DataMatrix":
        return DataMatrix(self._rows[np.asarray(indices, dtype=int)])

    def __repr__(self):
        return f"DataMatrix(n={self.n}, p={self.p})"


def as_data(x) -> DataMatrix:
    if isinstance(x, DataMatrix):
        return x
    return DataMatrix(x)


@dataclass(frozen=True)
class CovarianceEstimate:
    """Sample covariance plus the diagonal perturbation applied to it (if any)."""

    sigma_hat: SymMatrix
    n_used: int
    rho_applied: float = 0.0

    @property
    def dim(self) -> int:
        return self.sigma_hat.dim


def sample_covariance(x) -> CovarianceEstimate:
    """Centered sample covariance with the 1/n divisor."""
    data = as_data(x)
    if data.n < 2:
        raise ValueError(f"need at least 2 observations, got {data.n}")
    centered = data.rows - data.rows.mean(axis=0)
    sigma = centered.T @ centered / data.n
    return CovarianceEstimate(SymMatrix.from_average(sigma), n_used=data.n)


def perturb_to_pd(cov: CovarianceEstimate) -> CovarianceEstimate:
    """Add rho = |lambda_min| + n^{-1/2} to the diagonal unless already PD.

    Idempotent: output always has min eigenvalue > 0, so a second application
    returns it unchanged. The rho is accumulated in ``rho_applied``.
    """
    lam_min = min_eigenvalue(cov.sigma_hat)
    if lam_min > PD_EIG_CUTOFF:
        return cov
    rho = abs(lam_min) + cov.n_used ** -0.5
    return replace(
        cov,
        sigma_hat=cov.sigma_hat.add_diagonal(rho),
        rho_applied=cov.rho_applied + rho,
    )


def load_csv(path, has_header: bool = False, delimiter: str | None = None) -> DataMatrix:
    """Read observations (rows) from a comma- or tab-delimited file.

    The delimiter is sniffed from the first line when not given. Ragged rows
    and non-numeric fields are rejected.
    """
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty file")
    if delimiter is None:
        delimiter = "\t" if "\t" in lines[0] else ","
    reader = csv.reader(lines, delimiter=delimiter)
    rows = list(reader)
    if has_header:
        rows = rows[1:]
        if not rows:
            raise ValueError(f"{path}: no data rows after header")
    width = len(rows[0])
    parsed = []
    for k, row in enumerate(rows, start=2 if has_header else 1):
        if len(row) != width:
            raise ValueError(
                f"{path}: ragged row {k} (has {len(row)} fields, expected {width})"
            )
        try:
            parsed.append([float(tok) for tok in row])
        except ValueError as exc:
            raise ValueError(f"{path}: non-numeric value in row {k}") from exc
    return DataMatrix(parsed)
