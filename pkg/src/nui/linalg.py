"""Shared numerical primitives: randomized SVD, PCA, damped LSQR, normalizers.

Everything here is deterministic under an explicit seed and works on dense
numpy arrays or scipy.sparse matrices where noted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "SvdResult",
    "PcaResult",
    "LsqrResult",
    "randomized_svd",
    "pca",
    "lsqr",
    "l2_normalize_columns",
    "l2_normalize_rows",
    "standardize_columns",
    "preprocess_embedding",
]

_EPS = np.finfo(np.float64).eps


def _fix_signs(u: np.ndarray) -> np.ndarray:
    """Flip column signs so the largest-magnitude entry of each column is positive.

    Makes SVD/PCA outputs deterministic across runs and BLAS backends.
    """
    if u.size == 0:
        return u
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs


@dataclass(frozen=True)
class SvdResult:
    left: np.ndarray            # (rows, d), orthonormal columns (zero-padded past rank)
    singular_values: np.ndarray  # (d,), non-increasing
    effective_rank: int          # columns actually supported by the input's rank

    @property
    def rank_deficient(self) -> bool:
        return self.effective_rank < self.singular_values.shape[0]


def randomized_svd(
    m,
    d: int,
    seed: int,
    oversample: int = 10,
    power_iters: int = 2,
) -> SvdResult:
    """Truncated SVD of a sparse or dense real matrix via random projection.

    Gaussian sketch with `oversample` extra columns and `power_iters`
    re-orthogonalized power iterations, then an exact SVD of the small
    projected matrix. Columns of the result are orthonormal and sign-fixed;
    singular values are non-increasing. If d exceeds the numerical rank the
    trailing columns are zeroed and `effective_rank` reports the cutoff.
    """
    rows, cols = m.shape
    if d < 1:
        raise ValueError("d must be >= 1")
    if d > min(rows, cols):
        raise ValueError(f"d={d} exceeds min(rows, cols)={min(rows, cols)}")

    rng = np.random.default_rng(seed)
    p = min(cols, d + oversample)
    sketch = rng.standard_normal((cols, p))

    y = m @ sketch
    for _ in range(power_iters):
        y, _ = np.linalg.qr(y)
        y = m @ (m.T @ y)
    q, _ = np.linalg.qr(y)

    b = q.T @ m
    if sp.issparse(b):
        b = b.toarray()
    ub, s, _ = np.linalg.svd(np.asarray(b), full_matrices=False)
    left = (q @ ub)[:, :d]
    s = s[:d]

    tol = max(rows, cols) * _EPS * (s[0] if s.size else 0.0)
    effective_rank = int(np.sum(s > tol))
    if effective_rank < d:
        left = left.copy()
        left[:, effective_rank:] = 0.0
        s = s.copy()
        s[effective_rank:] = 0.0
    return SvdResult(_fix_signs(left), s, effective_rank)


@dataclass(frozen=True)
class PcaResult:
    scores: np.ndarray      # (rows, d) projections onto principal directions
    loadings: np.ndarray    # (cols, d) orthonormal directions
    mean: np.ndarray        # (cols,) column means removed before projection
    explained_variance: np.ndarray  # (d,) variance along each direction


def pca(m: np.ndarray, d: int, seed: int = 0) -> PcaResult:
    """Principal component scores of a dense matrix, top `d` directions.

    Columns are centered first; constant columns simply contribute zero
    variance. Uses an exact SVD for small matrices and the randomized path
    for big ones. Sign convention: largest-magnitude loading entry positive.
    """
    m = np.asarray(m, dtype=np.float64)
    rows, cols = m.shape
    if d > cols:
        raise ValueError(f"d={d} exceeds number of columns {cols}")

    mean = m.mean(axis=0)
    centered = m - mean

    if rows * cols <= 8_000_000 or min(rows, cols) <= d + 16:
        u, s, vt = np.linalg.svd(centered, full_matrices=False)
        u, s, vt = u[:, :d], s[:d], vt[:d]
        loadings = vt.T
    else:
        res = randomized_svd(centered, d, seed)
        u, s = res.left, res.singular_values
        # recover directions from scores: V = (A^T U) / s
        loadings = np.zeros((cols, d))
        nz = s > 0
        loadings[:, nz] = (centered.T @ u[:, nz]) / s[nz]

    idx = np.argmax(np.abs(loadings), axis=0)
    signs = np.sign(loadings[idx, np.arange(loadings.shape[1])])
    signs[signs == 0] = 1.0
    loadings = loadings * signs
    scores = u * (s * signs)
    denom = max(rows - 1, 1)
    return PcaResult(scores, loadings, mean, (s**2) / denom)


@dataclass
class LsqrResult:
    x: np.ndarray
    residual_norms: list[float]  # augmented-system residual per iteration, monotone
    iterations: int
    converged: bool


def lsqr(
    apply_a,
    apply_at,
    b: np.ndarray,
    x0: np.ndarray | None = None,
    damp: float = 0.0,
    max_iter: int = 100,
    tol: float = 1e-8,
) -> LsqrResult:
    """Damped least squares min ||Ax - b||^2 + damp^2 ||x||^2 via LSQR.

    The matrix is supplied as matvec callbacks `apply_a(v) -> (m,)` and
    `apply_at(u) -> (n,)`; it is never materialized here. A warm start `x0`
    is handled exactly by running the recurrences on the shifted problem, so
    warm and cold starts converge to the same solution.

    Golub-Kahan bidiagonalization with the damping folded into an augmented
    operator [A; damp*I]; the recorded residual norms are those of the
    augmented system and are non-increasing by construction.
    """
    b = np.asarray(b, dtype=np.float64)
    m = b.shape[0]
    probe = apply_at(np.zeros(m))
    n = probe.shape[0]

    if x0 is None:
        x0 = np.zeros(n)
    else:
        x0 = np.asarray(x0, dtype=np.float64).copy()

    # Augmented system rows: [A; damp*I] dx = [b - A x0; -damp*x0]
    r_top = b - apply_a(x0)
    r_bot = -damp * x0

    def aug_apply(v):
        return apply_a(v), damp * v

    def aug_apply_t(u_top, u_bot):
        return apply_at(u_top) + damp * u_bot

    u_top, u_bot = r_top.copy(), r_bot.copy()
    beta = np.sqrt(u_top @ u_top + u_bot @ u_bot)
    b_norm = beta
    if beta == 0.0:
        return LsqrResult(x0, [0.0], 0, True)
    u_top /= beta
    u_bot /= beta

    v = aug_apply_t(u_top, u_bot)
    alpha = np.linalg.norm(v)
    if alpha == 0.0:
        return LsqrResult(x0, [b_norm], 0, True)
    v /= alpha

    w = v.copy()
    dx = np.zeros(n)
    phibar = beta
    rhobar = alpha
    a_norm_sq = alpha**2

    residuals = [float(phibar)]
    converged = False
    iterations = 0

    for it in range(1, max_iter + 1):
        iterations = it
        av_top, av_bot = aug_apply(v)
        u_top = av_top - alpha * u_top
        u_bot = av_bot - alpha * u_bot
        beta = np.sqrt(u_top @ u_top + u_bot @ u_bot)
        if beta > 0:
            u_top /= beta
            u_bot /= beta

        v_next = aug_apply_t(u_top, u_bot) - beta * v
        alpha_next = np.linalg.norm(v_next)
        if alpha_next > 0:
            v_next /= alpha_next

        a_norm_sq += beta**2 + alpha_next**2

        rho = np.hypot(rhobar, beta)
        c = rhobar / rho
        s = beta / rho
        theta = s * alpha_next
        rhobar = -c * alpha_next
        phi = c * phibar
        phibar = s * phibar

        dx += (phi / rho) * w
        w = v_next - (theta / rho) * w
        v = v_next
        alpha = alpha_next

        residuals.append(float(phibar))
        # ||Aug^T r|| = phibar * alpha * |c|; stop when the normal-equation
        # residual is negligible or the residual itself is.
        atr_norm = phibar * alpha * abs(c)
        if phibar <= tol * b_norm or atr_norm <= tol * np.sqrt(a_norm_sq) * max(phibar, _EPS):
            converged = True
            break

    return LsqrResult(x0 + dx, residuals, iterations, converged)


def l2_normalize_columns(z: np.ndarray) -> np.ndarray:
    """Scale each column to unit L2 norm; zero columns stay zero."""
    z = np.asarray(z, dtype=np.float64)
    norms = np.linalg.norm(z, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    return z / safe


def l2_normalize_rows(z: np.ndarray) -> np.ndarray:
    """Scale each row to unit L2 norm; zero rows stay zero."""
    z = np.asarray(z, dtype=np.float64)
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    return z / safe


def standardize_columns(z: np.ndarray) -> np.ndarray:
    """Shift/scale each column to mean 0, std 1; zero-variance columns go to 0."""
    z = np.asarray(z, dtype=np.float64)
    mean = z.mean(axis=0)
    std = z.std(axis=0)
    safe = np.where(std > 0, std, 1.0)
    out = (z - mean) / safe
    out[:, std == 0] = 0.0
    return out


def preprocess_embedding(z: np.ndarray) -> np.ndarray:
    """Column-wise standardization followed by row-wise L2 normalization.

    This is the preprocessing applied to every embedding component before
    compatibility estimation and similarity scoring.
    """
    return l2_normalize_rows(standardize_columns(z))
