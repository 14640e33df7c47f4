"""Dense symmetric matrix storage and the norm/spectral primitives.

Everything downstream (covariance building, the column solver, tuning,
evaluation) consumes :class:`SymMatrix` and the free functions here.
Matrices are stored fully dense; at the problem sizes this package targets
(p up to a few thousand) dense column access is what the solver wants.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .errors import NotPositiveDefiniteError, PowerIterationError

# Cholesky pivots at or below this are treated as "not positive definite".
PD_PIVOT_CUTOFF = 1e-12

# Matrix text files may be asymmetric up to this before the reader rejects.
TEXT_SYMMETRY_TOL = 1e-12


class SymMatrix:
    """Immutable dense symmetric p x p matrix.

    Symmetry is exact (bitwise) and checked at construction; the backing
    array is frozen, so instances are safe to share across workers.
    Use :meth:`from_average` for arrays that are symmetric only up to
    roundoff (products, accumulations).
    """

    __slots__ = ("_a",)

    def __init__(self, entries):
        a = np.array(entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if a.shape[0] < 1:
            raise ValueError("matrix dimension must be >= 1")
        if not np.isfinite(a).all():
            raise ValueError("matrix entries must be finite")
        if not (a == a.T).all():
            raise ValueError(
                "matrix is not exactly symmetric; use SymMatrix.from_average "
                "to symmetrize by averaging"
            )
        a.setflags(write=False)
        self._a = a

    @classmethod
    def from_average(cls, entries) -> "SymMatrix":
        """Build from a nearly-symmetric array by averaging with its transpose."""
        a = np.asarray(entries, dtype=float)
        return cls((a + a.T) / 2.0)

    @classmethod
    def identity(cls, p: int) -> "SymMatrix":
        return cls(np.eye(p))

    @classmethod
    def diagonal(cls, values) -> "SymMatrix":
        return cls(np.diag(np.asarray(values, dtype=float)))

    @property
    def dim(self) -> int:
        return self._a.shape[0]

    @property
    def array(self) -> np.ndarray:
        """Read-only view of the entries."""
        return self._a

    def __getitem__(self, key):
        return self._a[key]

    def __repr__(self):
        return f"SymMatrix(dim={self.dim})"

    def add_diagonal(self, rho: float) -> "SymMatrix":
        """Return a new matrix with ``rho`` added to every diagonal entry."""
        a = self._a.copy()
        a[np.diag_indices_from(a)] += rho
        return SymMatrix(a)


def as_sym(a) -> SymMatrix:
    """Coerce an array-like (or pass through a SymMatrix) with symmetry checks."""
    if isinstance(a, SymMatrix):
        return a
    return SymMatrix(a)


def frobenius_norm(a) -> float:
    """Square root of the sum of squared entries."""
    m = as_sym(a)
    return float(np.sqrt(np.sum(m.array * m.array)))


def elementwise_max_norm(a) -> float:
    """Largest absolute entry."""
    m = as_sym(a)
    return float(np.abs(m.array).max())


def matrix_l1_norm(a) -> float:
    """Largest column absolute sum."""
    m = as_sym(a)
    return float(np.abs(m.array).sum(axis=0).max())


def _start_vector(p: int) -> np.ndarray:
    # All-ones plus a linear ramp. A constant start vector is an exact
    # eigenvector of any matrix with equal row sums (common in covariance
    # work), which would stall the residual test at the wrong eigenvalue.
    v = 1.0 + 0.5 * (np.arange(p) + 1.0) / (p + 1.0)
    return v / np.linalg.norm(v)


def _top_eigenvalue_psd(b: np.ndarray, tol: float, max_iter: int,
                        relative: bool, what: str) -> float:
    """Largest eigenvalue of a PSD matrix by residual-checked power iteration."""
    p = b.shape[0]
    v = _start_vector(p)
    w = b @ v
    nw = float(np.linalg.norm(w))
    if nw == 0.0:
        if not b.any():
            return 0.0
        # Start vector is in the kernel; a basis vector with the largest
        # diagonal cannot be (b e_k has k-th entry b_kk > 0 for PSD b != 0).
        v = np.zeros(p)
        v[int(np.argmax(np.diag(b)))] = 1.0
        w = b @ v
        nw = float(np.linalg.norm(w))
    theta = float(v @ w)
    for _ in range(max_iter):
        resid = float(np.linalg.norm(w - theta * v))
        bound = tol * theta if relative else tol
        if resid <= bound:
            return theta
        if nw == 0.0:
            return theta
        v = w / nw
        w = b @ v
        nw = float(np.linalg.norm(w))
        theta = float(v @ w)
    raise PowerIterationError(
        f"{what}: power iteration did not converge in {max_iter} iterations",
        last_estimate=theta,
        last_iterate=v,
    )


def spectral_norm(a, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Largest singular value (max |eigenvalue| for symmetric input).

    Power iteration on A @ A, which is PSD regardless of the signs of A's
    eigenvalues; the result is accurate to relative tolerance ``tol``.
    Raises :class:`PowerIterationError` (carrying the last iterate) if the
    iteration stalls.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    m = as_sym(a)
    b = m.array @ m.array
    b = (b + b.T) / 2.0
    theta = _top_eigenvalue_psd(b, tol, max_iter, relative=True,
                                what="spectral_norm")
    return float(math.sqrt(max(theta, 0.0)))


def min_eigenvalue(a, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Smallest eigenvalue of a symmetric matrix, within absolute ``tol``.

    Bisection on the shift: A - mu*I admits a Cholesky factorization exactly
    when mu < lambda_min, so a PD test halves a certified bracket (the
    Gershgorin bound puts every eigenvalue in [-r, r] for r = max row
    absolute sum). Unlike a shifted power iteration this cannot stall when
    the bottom of the spectrum is clustered, which is routine for sample
    covariances.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    m = as_sym(a)
    arr = m.array
    p = m.dim
    eye = np.eye(p)
    r = float(np.abs(arr).sum(axis=1).max())
    lo, hi = -r, r  # invariant: lambda_min in [lo, hi]
    iterations = 0
    while hi - lo > tol:
        iterations += 1
        if iterations > max_iter:
            raise PowerIterationError(
                f"min_eigenvalue: bisection exceeded {max_iter} iterations",
                last_estimate=0.5 * (lo + hi),
            )
        mid = 0.5 * (lo + hi)
        try:
            np.linalg.cholesky(arr - mid * eye)
            lo = mid  # A - mid*I is PD, so lambda_min > mid
        except np.linalg.LinAlgError:
            hi = mid
    return 0.5 * (lo + hi)


def log_det_pd(a) -> float:
    """Log-determinant via Cholesky; raises if the matrix is not PD.

    A factorization failure or any pivot at or below ``PD_PIVOT_CUTOFF``
    raises :class:`NotPositiveDefiniteError`, so PD detection and the
    log-determinant come from one pass.
    """
    m = as_sym(a)
    try:
        chol = np.linalg.cholesky(m.array)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(
            "matrix is not positive definite (factorization failed)"
        ) from exc
    d = np.diag(chol)
    if (d * d).min() <= PD_PIVOT_CUTOFF:
        raise NotPositiveDefiniteError(
            f"matrix is numerically singular (pivot <= {PD_PIVOT_CUTOFF})"
        )
    return float(2.0 * np.sum(np.log(d)))


def write_matrix_text(a, path) -> None:
    """Write the plain text format: a line with p, then p rows of p values."""
    m = as_sym(a)
    lines = [str(m.dim)]
    for row in m.array:
        lines.append(" ".join(repr(float(x)) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix_text(path) -> SymMatrix:
    """Read the plain text format written by :func:`write_matrix_text`.

    Asymmetry up to ``TEXT_SYMMETRY_TOL`` is repaired by averaging; anything
    larger is rejected.
    """
    raw = Path(path).read_text().split("\n")
    lines = [ln for ln in raw if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty matrix file")
    try:
        p = int(lines[0].strip())
    except ValueError as exc:
        raise ValueError(f"{path}: first line must be the dimension") from exc
    if p < 1:
        raise ValueError(f"{path}: dimension must be >= 1")
    if len(lines) != p + 1:
        raise ValueError(f"{path}: expected {p} rows, found {len(lines) - 1}")
    rows = []
    for k, line in enumerate(lines[1:], start=1):
        vals = [float(tok) for tok in line.split()]
        if len(vals) != p:
            raise ValueError(f"{path}: row {k} has {len(vals)} values, expected {p}")
        rows.append(vals)
    a = np.array(rows, dtype=float)
    if not np.isfinite(a).all():
        raise ValueError(f"{path}: non-finite entries")
    if np.abs(a - a.T).max() > TEXT_SYMMETRY_TOL:
        raise ValueError(
            f"{path}: asymmetry exceeds {TEXT_SYMMETRY_TOL}; refusing to read"
        )
    return SymMatrix.from_average(a)
