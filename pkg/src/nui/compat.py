"""Compatibility matrices: make adjusted similarity z_i M z_j^T high on edges.

Two estimators share one d x d coefficient space. The plain estimate solves
a ridge multi-target regression mapping each edge's source embedding onto
its target. The negative-aware estimate refines it so that sampled
non-edges score near 0 and edges near 1, fit by damped LSQR over a sparse
symmetric coefficient mask and warm-started from the plain solution.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import matio
from .graph import SparseGraph, canonical_edges, sample_negative_edges, two_core
from .linalg import lsqr
from .seeds import substream

__all__ = [
    "CompatMatrix",
    "EdgeSample",
    "estimate_plain",
    "select_coefficients",
    "sample_edges_for_compat",
    "estimate_negative_aware",
    "estimate_compatibility",
    "adjusted_similarity",
    "pair_similarities",
    "DEFAULT_RIDGE",
    "DEFAULT_ENERGY",
    "DEFAULT_SAMPLE_SIZE",
]

DEFAULT_RIDGE = 1e-6
DEFAULT_ENERGY = 0.95
DEFAULT_SAMPLE_SIZE = 200_000


@dataclass
class CompatMatrix:
    """d x d compatibility coefficients with an activity mask.

    kind is "plain" (edge-target regression, dense) or "negative_aware"
    (symmetric, estimated on masked upper-triangle coefficients and
    mirrored). Masked-out entries are exactly zero.
    """

    dim: int
    values: np.ndarray
    mask: np.ndarray
    kind: str
    energy_kept: float = 1.0
    converged: bool = True
    iterations: int = 0

    def save(self, path) -> None:
        """Write the matrix in the dense binary format plus a JSON sidecar."""
        path = Path(path)
        matio.write_dense_matrix(path, self.values)
        d = self.dim
        sidecar = {
            "dim": d,
            "kind": self.kind,
            "mask_density": float(self.mask.sum() / (d * d)),
            "energy_kept": self.energy_kept,
            "converged": self.converged,
            "iterations": self.iterations,
        }
        path.with_suffix(path.suffix + ".json").write_text(
            json.dumps(sidecar, indent=2)
        )

    @classmethod
    def load(cls, path) -> "CompatMatrix":
        path = Path(path)
        values = matio.read_dense_matrix(path)
        meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        return cls(
            dim=meta["dim"],
            values=values,
            mask=values != 0.0,
            kind=meta["kind"],
            energy_kept=meta["energy_kept"],
            converged=meta["converged"],
            iterations=meta.get("iterations", 0),
        )


@dataclass(frozen=True)
class EdgeSample:
    """Positive edges (from the 2-core when big enough) plus 2x negatives."""

    pos: np.ndarray
    neg: np.ndarray
    seed: int


def estimate_plain(z_hat: np.ndarray, edges, ridge: float = DEFAULT_RIDGE) -> CompatMatrix:
    """Ridge solution of min_M sum_edges ||z_i M - z_j||^2.

    Both orientations of every undirected edge contribute an equation, so
    the fit is symmetric in the endpoints even though M itself need not be.
    """
    pairs = canonical_edges(edges)
    if pairs.shape[0] == 0:
        raise ValueError("need at least one edge to estimate compatibility")
    z_hat = np.asarray(z_hat, dtype=np.float64)
    d = z_hat.shape[1]

    src = np.concatenate([pairs[:, 0], pairs[:, 1]])
    dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
    zs = z_hat[src]
    gram = zs.T @ zs + ridge * np.eye(d)
    target = zs.T @ z_hat[dst]
    values = np.linalg.solve(gram, target)
    return CompatMatrix(d, values, np.ones((d, d), dtype=bool), "plain")


def select_coefficients(h: CompatMatrix, energy: float = DEFAULT_ENERGY) -> np.ndarray:
    """Symmetric boolean mask of coefficients worth estimating.

    Off-diagonal upper-triangle entries are ranked by magnitude and the
    smallest prefix reaching `energy` of the total strict-upper-triangle
    absolute mass is kept; the diagonal is always kept. The mask is mirrored
    so it can be applied to a symmetric coefficient matrix.
    """
    if not 0.0 < energy <= 1.0:
        raise ValueError("energy must be in (0, 1]")
    d = h.dim
    mask = np.zeros((d, d), dtype=bool)
    mask[np.diag_indices(d)] = True

    iu = np.triu_indices(d, k=1)
    mags = np.abs(h.values[iu])
    total = mags.sum()
    if total > 0:
        order = np.argsort(mags)[::-1]
        csum = np.cumsum(mags[order])
        cutoff = int(np.searchsorted(csum, energy * total) + 1)
        keep = order[:cutoff]
        mask[iu[0][keep], iu[1][keep]] = True
        mask[iu[1][keep], iu[0][keep]] = True
    return mask


def sample_edges_for_compat(
    g: SparseGraph,
    train_edges,
    sample_size: int = DEFAULT_SAMPLE_SIZE,
    seed: int = 0,
    min_edges: int = 0,
) -> EdgeSample:
    """Pick positive edges from the 2-core and twice as many negatives.

    Falls back to the full training edge set when the 2-core is empty or
    smaller than `min_edges` (callers pass d(d+1)/2 so the regression stays
    overdetermined). Negative sampling tolerates exhaustion with a warning.
    """
    train = canonical_edges(train_edges)
    core = two_core(train)
    if core.shape[0] == 0 or core.shape[0] < min_edges:
        core = train
    if sample_size < min_edges:
        warnings.warn(
            f"sample size {sample_size} is small for {min_edges} coefficients",
            stacklevel=2,
        )
    rng = substream(seed, "compat-edge-sample")
    if core.shape[0] > sample_size:
        pick = rng.choice(core.shape[0], size=sample_size, replace=False)
        pos = core[np.sort(pick)]
    else:
        pos = core
    neg = sample_negative_edges(
        g.num_nodes, train, 2 * pos.shape[0], rng, strict=False
    )
    return EdgeSample(pos, neg, seed)


def _active_coefficients(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Upper-triangle (row, col) indices of active coefficients, diag included."""
    upper = np.triu(mask)
    rows, cols = np.nonzero(upper)
    return rows, cols


def _coeffs_to_matrix(c: np.ndarray, rows, cols, d: int) -> np.ndarray:
    m = np.zeros((d, d))
    m[rows, cols] = c
    m[cols, rows] = c
    return m


def estimate_negative_aware(
    z_hat: np.ndarray,
    sample: EdgeSample,
    warm: CompatMatrix | None = None,
    mask: np.ndarray | None = None,
    ridge: float = DEFAULT_RIDGE,
    max_iter: int = 100,
    tol: float = 1e-8,
    pos_weight: float = 1.0,
    energy_kept: float = 1.0,
    compute_dtype=np.float64,
) -> CompatMatrix:
    """Fit the symmetric compatibility matrix against positive AND negative edges.

    Each sampled edge contributes one regression equation: adjusted
    similarity = 1 for positives, 0 for negatives. The unknowns are the
    active upper-triangle coefficients; an off-diagonal coefficient c_ab
    multiplies z_ia*z_jb + z_ib*z_ja since it appears mirrored. Solved by
    damped LSQR (damp^2 = ridge) starting from the symmetrized warm values.

    compute_dtype=float32 halves the cost of the per-iteration edge products;
    the LSQR recurrences themselves stay in float64.
    """
    z_hat = np.asarray(z_hat, dtype=np.float64)
    d = z_hat.shape[1]
    if mask is None:
        mask = np.ones((d, d), dtype=bool)
    rows, cols = _active_coefficients(mask)
    off_diag = rows != cols

    pairs = np.concatenate([sample.pos, sample.neg], axis=0)
    targets = np.concatenate(
        [np.ones(len(sample.pos)), np.zeros(len(sample.neg))]
    )
    weights = np.concatenate(
        [np.full(len(sample.pos), np.sqrt(pos_weight)), np.ones(len(sample.neg))]
    )
    zi = np.ascontiguousarray(z_hat[pairs[:, 0]], dtype=compute_dtype)
    zj = np.ascontiguousarray(z_hat[pairs[:, 1]], dtype=compute_dtype)
    weights_c = weights.astype(compute_dtype)

    def apply_a(c):
        m = _coeffs_to_matrix(c, rows, cols, d).astype(compute_dtype)
        sims = np.einsum("ij,ij->i", zi @ m, zj)
        return (weights_c * sims).astype(np.float64)

    def apply_at(u):
        uw = (weights_c * u.astype(compute_dtype))[:, None]
        g = (zi * uw).T @ zj
        g = g.astype(np.float64)
        vals = g[rows, cols] + g[cols, rows]
        vals[~off_diag] = g[rows[~off_diag], cols[~off_diag]]
        return vals

    x0 = None
    if warm is not None:
        sym = 0.5 * (warm.values + warm.values.T)
        x0 = sym[rows, cols]

    result = lsqr(
        apply_a,
        apply_at,
        weights * targets,
        x0=x0,
        damp=np.sqrt(ridge),
        max_iter=max_iter,
        tol=tol,
    )
    values = _coeffs_to_matrix(result.x, rows, cols, d)
    return CompatMatrix(
        dim=d,
        values=values,
        mask=mask,
        kind="negative_aware",
        energy_kept=energy_kept,
        converged=result.converged,
        iterations=result.iterations,
    )


def estimate_compatibility(
    z_hat: np.ndarray,
    g: SparseGraph,
    train_edges,
    sample_size: int = DEFAULT_SAMPLE_SIZE,
    seed: int = 0,
    ridge: float = DEFAULT_RIDGE,
    energy: float = DEFAULT_ENERGY,
    max_iter: int = 100,
    tol: float = 1e-4,
    compute_dtype=np.float32,
) -> tuple[CompatMatrix, CompatMatrix, EdgeSample]:
    """Full pipeline: plain fit on the 2-core, mask selection, refined fit.

    Returns (negative_aware, plain, edge_sample); the sample is reused by
    probing so the discretizer sees the edges the matrix was fit on.

    The pipeline runs the refinement at tol=1e-4 in float32: past that
    point extra LSQR iterations stop moving the similarities at all, and
    the warm start keeps the iteration count small.
    """
    d = z_hat.shape[1]
    min_edges = d * (d + 1) // 2
    if sample_size < 20 * min_edges:
        warnings.warn(
            f"sample size {sample_size} is below 20x the coefficient count "
            f"({min_edges}) for d={d}; the refined fit may be noisy",
            stacklevel=2,
        )
    train = canonical_edges(train_edges)
    core = two_core(train)
    if core.shape[0] == 0 or core.shape[0] < min_edges:
        core = train
    plain = estimate_plain(z_hat, core, ridge)

    rng = substream(seed, "compat-edge-sample")
    if core.shape[0] > sample_size:
        pick = rng.choice(core.shape[0], size=sample_size, replace=False)
        pos = core[np.sort(pick)]
    else:
        pos = core
    neg = sample_negative_edges(g.num_nodes, train, 2 * pos.shape[0], rng, strict=False)
    sample = EdgeSample(pos, neg, seed)

    mask = select_coefficients(plain, energy)
    refined = estimate_negative_aware(
        z_hat, sample, warm=plain, mask=mask,
        ridge=ridge, max_iter=max_iter, tol=tol, energy_kept=energy,
        compute_dtype=compute_dtype,
    )
    return refined, plain, sample


def adjusted_similarity(z_i: np.ndarray, z_j: np.ndarray, h: CompatMatrix) -> float:
    """Scalar adjusted similarity z_i H z_j^T for one node pair."""
    return float(z_i @ h.values @ z_j)


def pair_similarities(z_hat: np.ndarray, h: CompatMatrix, pairs: np.ndarray) -> np.ndarray:
    """Vectorized adjusted similarity for (m, 2) node pairs."""
    pairs = np.asarray(pairs, dtype=np.int64)
    if pairs.shape[0] == 0:
        return np.empty(0)
    left = z_hat[pairs[:, 0]] @ h.values
    return np.einsum("ij,ij->i", left, z_hat[pairs[:, 1]])
