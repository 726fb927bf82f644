"""Eigenvalues of overlap matrices and the summarized multiple overlap.

The eigensolver is a cyclic Jacobi method.  Study counts are small (tens at
most), so an ``O(M**3)`` sweep costs nothing and Jacobi's accuracy on
symmetric input is easy to audit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError
from .overlap import OverlapMatrix

__all__ = ["Spectrum", "SummaryResult", "eigen_sym", "summarize", "summary_value", "MAX_SWEEPS"]

MAX_SWEEPS = 100
RESIDUAL_TOL = 1e-12


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues in descending order plus convergence diagnostics."""

    eigenvalues: tuple
    sweeps: int
    residual: float

    @property
    def largest(self) -> float:
        return self.eigenvalues[0]

    @property
    def trace(self) -> float:
        return math.fsum(self.eigenvalues)


@dataclass(frozen=True)
class SummaryResult:
    """Summarized multiple overlap ``(lambda_1 - 1) / (M - 1)`` and its spectrum."""

    value: float
    spectrum: Spectrum
    kind: str
    M: int


def _as_array(matrix) -> np.ndarray:
    if isinstance(matrix, OverlapMatrix):
        return np.array(matrix.entries, dtype=np.float64)
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-14):
        raise ValueError("matrix is not symmetric")
    return (a + a.T) / 2.0


def _off_norm(a: list) -> float:
    n = len(a)
    return math.sqrt(math.fsum(a[i][j] * a[i][j] for i in range(n) for j in range(n) if i != j))


def eigen_sym(matrix, max_sweeps: int = MAX_SWEEPS, tol: float = RESIDUAL_TOL) -> Spectrum:
    """All eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.

    Iterates row-cyclic sweeps until the off-diagonal Frobenius norm of the
    rotated matrix is at most ``tol * M``.  Ties in the descending sort keep
    the original diagonal order.

    Raises
    ------
    ConvergenceError
        If the residual is still above target after ``max_sweeps`` sweeps.
    """
    # nested lists beat numpy row updates at these sizes
    a = _as_array(matrix).tolist()
    n = len(a)
    target = tol * n
    off = _off_norm(a)
    sweeps = 0
    while off > target:
        if sweeps >= max_sweeps:
            raise ConvergenceError(
                f"Jacobi did not converge in {max_sweeps} sweeps (residual {off:.3e}, target {target:.3e})"
            )
        sweeps += 1
        for p in range(n - 1):
            ap = a[p]
            for q in range(p + 1, n):
                apq = ap[q]
                if apq == 0.0:
                    continue
                aq = a[q]
                theta = (aq[q] - ap[p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(1.0, theta))
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                for k in range(n):
                    x = ap[k]
                    y = aq[k]
                    ap[k] = c * x - s * y
                    aq[k] = s * x + c * y
                for row in a:
                    x = row[p]
                    y = row[q]
                    row[p] = c * x - s * y
                    row[q] = s * x + c * y
                ap[q] = aq[p] = 0.0
        off = _off_norm(a)
    diag = [a[i][i] for i in range(n)]
    order = sorted(range(n), key=lambda i: -diag[i])
    return Spectrum(tuple(diag[i] for i in order), sweeps, off)


def summary_value(largest: float, M: int) -> float:
    if M < 2:
        raise ValueError("the summary needs at least two studies")
    return (largest - 1.0) / (M - 1)


def summarize(matrix: OverlapMatrix) -> SummaryResult:
    """Summarized multiple overlap coefficient of an overlap matrix.

    The value is ``(lambda_1 - 1) / (M - 1)`` where ``lambda_1`` is the
    largest eigenvalue; it is 0 for the identity, 1 for the all-ones matrix
    and equals the single off-diagonal entry when ``M == 2``.
    """
    kind = matrix.kind if isinstance(matrix, OverlapMatrix) else "jaccard"
    spectrum = eigen_sym(matrix)
    M = len(spectrum.eigenvalues)
    # Perron-Frobenius: the spectral radius of a nonnegative matrix lies
    # between its smallest and largest row sums.  Clamping removes the last
    # ulp of rounding so that the summary never leaves [0, 1].
    a = _as_array(matrix)
    largest = spectrum.largest
    if a.min() >= 0.0:
        rows = [math.fsum(r) for r in a.tolist()]
        largest = min(max(largest, min(rows)), max(rows))
    if largest != spectrum.largest:
        spectrum = Spectrum((largest,) + spectrum.eigenvalues[1:], spectrum.sweeps, spectrum.residual)
    return SummaryResult(summary_value(largest, M), spectrum, kind, M)
