"""Statistical kernels: correlation, least squares, distribution functions, ranks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import LeadLagError, RankDeficient, ZeroVariance

RANK_RTOL = 1e-10
_TINY = float(np.finfo(float).tiny)


def pearson(x, y) -> float:
    """Sample Pearson correlation of two equal-length vectors."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise LeadLagError("pearson needs two 1-d vectors of equal length")
    if len(x) < 2:
        raise LeadLagError("pearson needs at least 2 observations")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ZeroVariance("constant input to pearson")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = xc @ xc
    syy = yc @ yc
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVariance("constant input to pearson")
    r = (xc @ yc) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


# -- least squares ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OlsFit:
    """Least-squares fit. ``coefficients`` lists the intercept first when present."""

    coefficients: np.ndarray
    rss: float
    n_obs: int
    n_params: int
    residuals: np.ndarray


def _pivoted_cholesky(a: np.ndarray, rtol: float) -> tuple[np.ndarray, np.ndarray]:
    """Return (L, perm) with ``a[perm][:, perm] = L @ L.T``.

    Raises RankDeficient when the largest remaining pivot falls below
    ``rtol`` times the largest diagonal entry of ``a``.
    """
    a = np.array(a, dtype=float)
    k = a.shape[0]
    perm = np.arange(k)
    L = np.zeros((k, k))
    tol = rtol * max(float(np.max(np.diag(a))), _TINY)
    for j in range(k):
        m = j + int(np.argmax(np.diag(a)[j:]))
        if a[m, m] <= tol:
            raise RankDeficient(f"design matrix is rank deficient (pivot {a[m, m]:.3g})")
        if m != j:
            a[[j, m]] = a[[m, j]]
            a[:, [j, m]] = a[:, [m, j]]
            L[[j, m], :j] = L[[m, j], :j]
            perm[[j, m]] = perm[[m, j]]
        L[j, j] = math.sqrt(a[j, j])
        L[j + 1 :, j] = a[j + 1 :, j] / L[j, j]
        a[j + 1 :, j + 1 :] -= np.outer(L[j + 1 :, j], L[j + 1 :, j])
    return L, perm


def _triangular_solve(L: np.ndarray, b: np.ndarray, lower: bool) -> np.ndarray:
    k = len(b)
    x = np.zeros(k)
    rng = range(k) if lower else range(k - 1, -1, -1)
    for i in rng:
        s = L[i, :i] @ x[:i] if lower else L[i, i + 1 :] @ x[i + 1 :]
        x[i] = (b[i] - s) / L[i, i]
    return x


def design_matrix(columns: Sequence, with_intercept: bool = True) -> np.ndarray:
    cols = [np.asarray(c, dtype=float) for c in columns]
    if not cols and not with_intercept:
        raise LeadLagError("empty design")
    n = len(cols[0]) if cols else None
    if any(len(c) != n for c in cols):
        raise LeadLagError("design columns have different lengths")
    if with_intercept:
        if n is None:
            raise LeadLagError("intercept-only design needs an explicit length")
        cols = [np.ones(n)] + cols
    return np.column_stack(cols)


def ols(design_columns: Sequence, response, with_intercept: bool = True) -> OlsFit:
    """Ordinary least squares via the normal equations.

    Columns are scaled to unit norm before a pivoted Cholesky factorisation,
    so the rank tolerance is insensitive to the units of each regressor.
    """
    y = np.asarray(response, dtype=float)
    X = design_matrix(design_columns, with_intercept)
    if X.shape[0] != len(y):
        raise LeadLagError("response length differs from design columns")
    n, k = X.shape
    if n <= k:
        raise LeadLagError(f"need more observations ({n}) than parameters ({k})")
    norms = np.sqrt(np.einsum("ij,ij->j", X, X))
    if np.any(norms == 0):
        raise RankDeficient("all-zero design column")
    Xs = X / norms
    L, perm = _pivoted_cholesky(Xs.T @ Xs, RANK_RTOL)
    rhs = (Xs.T @ y)[perm]
    w = _triangular_solve(L.T, _triangular_solve(L, rhs, lower=True), lower=False)
    beta_s = np.empty(k)
    beta_s[perm] = w
    beta = beta_s / norms
    resid = y - X @ beta
    return OlsFit(beta, float(resid @ resid), n, k, resid)


def weighted_rss(weights: np.ndarray, X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Residual sums of squares for a batch of row-weighted regressions.

    ``weights`` has shape (B, n); row ``b`` of it gives the multiplicity of
    every observation in one resample. Returns ``(rss, singular)`` where
    ``singular`` flags draws whose scaled Gram matrix has a smallest
    eigenvalue below the rank tolerance; their ``rss`` is NaN.
    """
    W = np.atleast_2d(np.asarray(weights, dtype=float))
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    k = X.shape[1]
    cross = (X[:, :, None] * X[:, None, :]).reshape(len(X), k * k)
    G = (W @ cross).reshape(-1, k, k)
    Xy = W @ (X * y[:, None])
    yy = W @ (y * y)
    d = np.sqrt(np.einsum("bii->bi", G))
    singular = np.any(d == 0, axis=1)
    d = np.where(d == 0, 1.0, d)
    Gs = G / (d[:, :, None] * d[:, None, :])
    singular |= np.linalg.eigvalsh(Gs)[:, 0] < RANK_RTOL
    Gs[singular] = np.eye(k)
    b_s = np.linalg.solve(Gs, (Xy / d)[:, :, None])[:, :, 0]
    rss = yy - np.einsum("bi,bi->b", b_s, Xy / d)
    rss = np.maximum(rss, 0.0)
    rss[singular] = np.nan
    return rss, singular


# -- distribution functions ------------------------------------------------


def _betacf(x: float, a: float, b: float, max_iter: int = 2000, eps: float = 1e-15) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < 1e-300:
        d = 1e-300
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < 1e-300:
            d = 1e-300
        c = 1.0 + aa / c
        if abs(c) < 1e-300:
            c = 1e-300
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < 1e-300:
            d = 1e-300
        c = 1.0 + aa / c
        if abs(c) < 1e-300:
            c = 1e-300
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(x: float, a: float, b: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("betainc needs a, b > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(x, a, b) / a
    return 1.0 - front * _betacf(1.0 - x, b, a) / b


def f_cdf(x: float, d1: float, d2: float) -> float:
    """CDF of the F(d1, d2) distribution."""
    if d1 <= 0 or d2 <= 0:
        raise ValueError("degrees of freedom must be positive")
    if x < 0:
        raise ValueError("f_cdf is defined for x >= 0")
    if math.isinf(x):
        return 1.0
    return betainc(d1 * x / (d1 * x + d2), d1 / 2.0, d2 / 2.0)


def f_sf(x: float, d1: float, d2: float) -> float:
    """Upper tail ``1 - f_cdf``, computed directly to keep small p-values accurate."""
    if d1 <= 0 or d2 <= 0:
        raise ValueError("degrees of freedom must be positive")
    if x < 0:
        raise ValueError("f_sf is defined for x >= 0")
    if math.isinf(x):
        return 0.0
    return betainc(d2 / (d2 + d1 * x), d2 / 2.0, d1 / 2.0)


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


# -- ranks -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RankedSample:
    ranks: np.ndarray
    tie_groups: tuple[int, ...]


def midranks(pooled) -> RankedSample:
    """Average ranks (1-based); tied values share the mean of their ranks."""
    v = np.asarray(pooled, dtype=float)
    if v.size == 0:
        raise LeadLagError("cannot rank an empty sample")
    order = np.argsort(v, kind="mergesort")
    sv = v[order]
    # boundaries of runs of equal values in sorted order
    starts = np.flatnonzero(np.r_[True, sv[1:] != sv[:-1]])
    ends = np.r_[starts[1:], len(sv)]
    ranks = np.empty(len(v))
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = (s + 1 + e) / 2.0
    ties = tuple(int(e - s) for s, e in zip(starts, ends) if e - s > 1)
    return RankedSample(ranks, ties)


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float
    z: float
    p_value: float


def mann_whitney_u(x, y, alternative: str = "less") -> MannWhitneyResult:
    """Mann-Whitney U test with normal approximation.

    ``u`` is the statistic of ``x`` (number of (x, y) pairs with x > y,
    ties counting one half). ``alternative="less"`` tests whether ``x`` is
    stochastically smaller than ``y``. The variance carries the tie
    correction and the z-score a 0.5 continuity correction. p-values are
    floored at the smallest normal double so they never reach zero.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n1, n2 = len(x), len(y)
    if n1 == 0 or n2 == 0:
        raise LeadLagError("both samples must be non-empty")
    ranked = midranks(np.concatenate([x, y]))
    u = float(ranked.ranks[:n1].sum() - n1 * (n1 + 1) / 2.0)
    N = n1 + n2
    mu = n1 * n2 / 2.0
    tie_term = sum(t**3 - t for t in ranked.tie_groups)
    var = n1 * n2 / 12.0 * ((N + 1) - tie_term / (N * (N - 1))) if N > 1 else 0.0
    if var <= 0:
        return MannWhitneyResult(u, 0.0, 1.0)
    sd = math.sqrt(var)
    if alternative == "less":
        z = (u - mu + 0.5) / sd
        p = normal_cdf(z)
    elif alternative == "greater":
        z = (u - mu - 0.5) / sd
        p = normal_cdf(-z)
    elif alternative == "two-sided":
        z = (u - mu - math.copysign(0.5, u - mu)) / sd if u != mu else 0.0
        p = min(1.0, 2.0 * normal_cdf(-abs(z)))
    else:
        raise ValueError(f"unknown alternative {alternative!r}")
    return MannWhitneyResult(u, z, min(1.0, max(p, _TINY)))
