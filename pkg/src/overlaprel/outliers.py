"""Jackknife test for anomalous activation maps.

For every study ``j`` the summarized overlap of the remaining ``M - 1``
studies is compared with the all-studies summary on the arcsine scale.  A
jackknife over the other studies estimates the variance of that change and
the standardized change is referred to a t distribution with ``M - 2``
degrees of freedom.  Benjamini-Hochberg controls the false discovery rate
across studies.

All leave-one-out and leave-two-out summaries are taken from submatrices of
one cached overlap matrix; pairwise coefficients do not change when a study
is removed, so masks are never revisited.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateInputError
from .overlap import OverlapMatrix, overlap_matrix
from .spectral import SummaryResult, summarize
from .volume import StudySet

__all__ = [
    "DEFAULT_Q_LEVELS",
    "JackknifeRecord",
    "OutlierReport",
    "arcsine_transform",
    "betainc",
    "t_sf",
    "bh_fdr",
    "loo_summaries",
    "jackknife_test",
]

DEFAULT_Q_LEVELS = (0.05, 0.01)

_EPS = 1e-16
_TINY = 1e-300
_MAX_CF_TERMS = 1000


def arcsine_transform(p: float) -> float:
    """Variance-stabilizing ``(2 / pi) * arcsin(sqrt(p))`` on ``[0, 1]``."""
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"arcsine transform needs p in [0, 1], got {p}")
    return 2.0 / math.pi * math.asin(math.sqrt(p))


# Student t ---------------------------------------------------------------


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_CF_TERMS + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function ``I_x(a, b)``."""
    if a <= 0 or b <= 0:
        raise ValueError("betainc needs a > 0 and b > 0")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"betainc needs x in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf(x: float, df: int) -> float:
    """Upper-tail probability ``P(T > x)`` of Student's t with ``df`` degrees of freedom."""
    if df < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {df}")
    x = float(x)
    if math.isnan(x):
        raise ValueError("t_sf is undefined for NaN")
    if x == 0.0:
        return 0.5
    if math.isinf(x):
        return 0.0 if x > 0 else 1.0
    nu = float(df)
    x2 = x * x
    # P(|T| > |x|) = I_{nu / (nu + x^2)}(nu / 2, 1 / 2); for small |x| the
    # complementary form keeps the argument away from 1.
    if x2 < nu:
        tail2 = 1.0 - betainc(0.5, nu / 2.0, x2 / (nu + x2))
    else:
        tail2 = betainc(nu / 2.0, 0.5, nu / (nu + x2))
    half = 0.5 * tail2
    return half if x > 0 else 1.0 - half


# FDR ---------------------------------------------------------------------


def bh_fdr(p_values: Sequence[float], q: float) -> set:
    """Benjamini-Hochberg step-up rule; returns the indices declared significant."""
    p = np.asarray(p_values, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError("p_values must be one-dimensional")
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    if p.size == 0:
        return set()
    if np.any(~np.isfinite(p)) or p.min() < 0.0 or p.max() > 1.0:
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    ranked = p[order]
    passing = np.flatnonzero(ranked <= q * np.arange(1, m + 1) / m)
    if passing.size == 0:
        return set()
    cutoff = ranked[passing[-1]]
    return {int(i) for i in np.flatnonzero(p <= cutoff)}


# jackknife ---------------------------------------------------------------


class _SummaryCache:
    """Summaries of submatrices keyed by the set of deleted positions."""

    def __init__(self, matrix: OverlapMatrix):
        self.matrix = matrix
        self._values: dict = {}

    def result(self, *deleted: int) -> SummaryResult:
        key = frozenset(deleted)
        if key not in self._values:
            self._values[key] = summarize(self.matrix.delete(*key) if key else self.matrix)
        return self._values[key]

    def value(self, *deleted: int) -> float:
        return self.result(*deleted).value


def _matrix_for(studies, kind: str, empty_policy: str) -> OverlapMatrix:
    if isinstance(studies, OverlapMatrix):
        return studies.as_kind(kind, empty_policy) if kind != studies.kind else studies
    if isinstance(studies, StudySet):
        return overlap_matrix(studies, kind, empty_policy)
    return overlap_matrix(StudySet.from_masks(studies), kind, empty_policy)


def loo_summaries(studies, kind: str = "jaccard", empty_policy: str = "error") -> list:
    """Summary of the ``M - 1`` remaining studies after deleting each study in turn.

    ``studies`` may be a :class:`StudySet` or a precomputed
    :class:`OverlapMatrix`.
    """
    matrix = _matrix_for(studies, kind, empty_policy)
    if matrix.M < 3:
        raise ValueError(f"leave-one-out summaries need M >= 3 studies, got {matrix.M}")
    cache = _SummaryCache(matrix)
    return [cache.value(j) for j in range(matrix.M)]


@dataclass(frozen=True)
class JackknifeRecord:
    """Per-study quantities of the jackknife outlier test."""

    study_index: int
    label: str
    omega_minus_j: float
    zeta_minus_j: float
    zeta_pairs: tuple
    zeta_bar: float
    s2: float
    tau: float
    p_value: float

    @property
    def s(self) -> float:
        return math.sqrt(self.s2)


@dataclass(frozen=True)
class OutlierReport:
    """Outcome of :func:`jackknife_test`.

    ``flags`` maps each q level to the sorted tuple of flagged study
    positions.  ``severity`` maps each flagged position to ``"extreme"``
    (flagged at the strictest of several q levels) or ``"moderate"``.
    """

    M: int
    kind: str
    labels: tuple
    full_summary: SummaryResult
    records: tuple
    q_levels: tuple
    flags: dict
    severity: dict
    matrix: OverlapMatrix = field(repr=False)

    @property
    def taus(self) -> np.ndarray:
        return np.array([r.tau for r in self.records])

    @property
    def p_values(self) -> np.ndarray:
        return np.array([r.p_value for r in self.records])

    def flagged(self, q: float | None = None) -> tuple:
        """Flagged positions at ``q`` (default: the most liberal level)."""
        return self.flags[max(self.q_levels) if q is None else q]

    def flagged_labels(self, q: float | None = None) -> tuple:
        return tuple(self.labels[j] for j in self.flagged(q))

    def summary_excluding(self, indices: Sequence[int]) -> SummaryResult:
        """Summary of the studies left after removing ``indices``."""
        return summarize(self.matrix.delete(*indices))

    @property
    def s_coefficient_of_variation(self) -> float:
        """Spread of the jackknifed standard deviations (std / mean over studies)."""
        s = np.array([r.s for r in self.records])
        mean = s.mean()
        return float(s.std(ddof=1) / mean) if mean > 0 else float("nan")


def _check_q_levels(q_levels) -> tuple:
    levels = sorted({float(q) for q in q_levels}, reverse=True)
    if not levels:
        raise ValueError("at least one q level is required")
    for q in levels:
        if not 0.0 < q < 1.0:
            raise ValueError(f"q levels must lie in (0, 1), got {q}")
    return tuple(levels)


def jackknife_test(
    studies,
    kind: str = "jaccard",
    q_levels: Sequence[float] = DEFAULT_Q_LEVELS,
    empty_policy: str = "error",
) -> OutlierReport:
    """Flag studies whose inclusion significantly lowers the summarized overlap.

    Parameters
    ----------
    studies : StudySet or OverlapMatrix
        At least four studies.
    kind : {"jaccard", "dice"}
    q_levels : sequence of float
        FDR levels; decisions are reported for each.
    empty_policy : {"error", "zero", "one"}
        Passed to :func:`overlap_matrix` when masks are given.

    Returns
    -------
    OutlierReport

    Raises
    ------
    ValueError
        Fewer than four studies.
    DegenerateInputError
        A study's leave-two-out changes are all identical, so its jackknife
        variance is zero and the test statistic is undefined.
    """
    levels = _check_q_levels(q_levels)
    matrix = _matrix_for(studies, kind, empty_policy)
    M = matrix.M
    if M < 4:
        raise ValueError(f"the jackknife test needs M >= 4 studies, got {M}")
    cache = _SummaryCache(matrix)
    psi = arcsine_transform
    full = cache.result()
    psi_full = psi(full.value)
    psi_loo = [psi(cache.value(j)) for j in range(M)]

    records = []
    for j in range(M):
        zeta = psi_loo[j] - psi_full
        pairs = tuple(psi(cache.value(j, k)) - psi_loo[k] for k in range(M) if k != j)
        zbar = math.fsum(pairs) / (M - 1)
        spread = max(abs(z - zbar) for z in pairs)
        if spread <= 1e-14:
            raise DegenerateInputError(
                f"zero jackknife variance for study {matrix.labels[j]!r} (position {j}); "
                "all leave-two-out changes are identical"
            )
        s2 = math.fsum((z - zbar) ** 2 for z in pairs) / ((M - 1) * (M - 2))
        tau = zeta / math.sqrt(s2)
        records.append(
            JackknifeRecord(j, matrix.labels[j], cache.value(j), zeta, pairs, zbar, s2, tau, t_sf(tau, M - 2))
        )

    p = [r.p_value for r in records]
    flags = {q: tuple(sorted(bh_fdr(p, q))) for q in levels}
    severity = {}
    for q in levels:
        for j in flags[q]:
            severity[j] = "extreme" if len(levels) > 1 and q == levels[-1] else "moderate"
    return OutlierReport(M, matrix.kind, matrix.labels, full, tuple(records), levels, flags, severity, matrix)
