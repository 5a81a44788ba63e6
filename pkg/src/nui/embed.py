"""Derived node embeddings: five components per graph, all |V| x d.

The components cover structure (adjacency SVD), local neighborhoods
(random-walk visit counts + SVD), raw features (PCA), and features
propagated two ways (row-normalized without self-loops, symmetric with
self-loops). SVD-based components come out column-orthonormal; the PCA-based
ones have orthogonal score columns.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph import SparseGraph, row_normalize, sym_normalize_selfloop
from .linalg import SvdResult, l2_normalize_columns, pca, randomized_svd
from .seeds import substream

__all__ = [
    "COMPONENT_IDS",
    "COMPONENT_NAMES",
    "WalkCountMatrix",
    "EmbeddingSet",
    "random_walk_counts",
    "structure_embedding",
    "neighborhood_embedding",
    "feature_embedding",
    "propagate_no_selfloop",
    "propagate_selfloop",
    "compute_embeddings",
]

# Serialization ids and human names, in canonical concatenation order.
COMPONENT_IDS = ("U", "R", "F", "P", "S")
COMPONENT_NAMES = {
    "U": "structure",
    "R": "neighborhood",
    "F": "feature",
    "P": "propagation_plain",
    "S": "propagation_selfloop",
}


@dataclass(frozen=True)
class WalkCountMatrix:
    """Sparse visit counts from repeated short random walks, singletons pruned."""

    counts: sp.csr_matrix
    trials: int
    steps: int


def random_walk_counts(
    g: SparseGraph,
    trials: int,
    steps: int,
    seed: int,
    count_mode: str = "all_steps",
    prune_singletons: bool = True,
    include_start: bool = False,
) -> WalkCountMatrix:
    """Count node visits over `trials` uniform random walks of `steps` hops.

    Entry (i, j) counts how often walks started at i stood on j, summed
    over steps 1..k (`count_mode="all_steps"`) or at the final step only
    (`count_mode="endpoint"`). The embedding pipeline uses endpoint
    counting so the k-step proximity matrix stays distinct from the
    adjacency itself; all-steps folds shorter hops in. The start position
    is not counted unless `include_start`. Cells visited exactly once are
    dropped when `prune_singletons` is set; isolated starts give empty rows.
    """
    if trials < 1 or steps < 1:
        raise ValueError("trials and steps must be >= 1")
    if count_mode not in ("all_steps", "endpoint"):
        raise ValueError(f"unknown count_mode {count_mode!r}")

    n = g.num_nodes
    deg = g.degrees
    active = np.flatnonzero(deg > 0)
    rng = substream(seed, "random-walks")

    starts_list = []
    visits_list = []
    if active.size:
        starts = np.repeat(active, trials)
        current = starts.copy()
        if include_start:
            starts_list.append(starts)
            visits_list.append(current.copy())
        for step in range(1, steps + 1):
            draw = rng.random(current.shape[0])
            slot = (draw * deg[current]).astype(np.int64)
            current = g.col_indices[g.row_offsets[current] + slot]
            if count_mode == "all_steps" or step == steps:
                starts_list.append(starts)
                visits_list.append(current.copy())

    if starts_list:
        all_starts = np.concatenate(starts_list)
        all_visits = np.concatenate(visits_list)
        codes = all_starts * np.int64(n) + all_visits
        uniq, counts = np.unique(codes, return_counts=True)
        if prune_singletons:
            keep = counts >= 2
            uniq, counts = uniq[keep], counts[keep]
        rows = uniq // n
        cols = uniq % n
        mat = sp.csr_matrix(
            (counts.astype(np.float64), (rows, cols)), shape=(n, n)
        )
    else:
        mat = sp.csr_matrix((n, n), dtype=np.float64)
    return WalkCountMatrix(mat, trials, steps)


def _svd_embedding(matrix, d: int, seed: int) -> tuple[np.ndarray, SvdResult]:
    res = randomized_svd(matrix, d, seed)
    return res.left, res


def structure_embedding(g: SparseGraph, d: int, seed: int) -> tuple[np.ndarray, SvdResult]:
    """Left singular vectors of the adjacency matrix."""
    return _svd_embedding(g.to_scipy(), d, seed)


def neighborhood_embedding(
    g: SparseGraph,
    d: int,
    trials: int,
    steps: int,
    seed: int,
    count_mode: str = "endpoint",
) -> tuple[np.ndarray, SvdResult]:
    """Left singular vectors of the pruned random-walk count matrix."""
    walks = random_walk_counts(g, trials, steps, seed, count_mode=count_mode)
    return _svd_embedding(walks.counts, d, seed)


def _pca_embedding(x: np.ndarray, d: int, seed: int) -> np.ndarray:
    """PCA scores padded with zero columns when the input is narrower than d."""
    x = np.asarray(x, dtype=np.float64)
    d_eff = min(d, x.shape[1])
    scores = pca(x, d_eff, seed).scores
    if d_eff < d:
        scores = np.pad(scores, ((0, 0), (0, d - d_eff)))
    return scores


def feature_embedding(x: np.ndarray, d: int, seed: int) -> np.ndarray:
    """PCA of the raw node features."""
    return _pca_embedding(x, d, seed)


def propagate_no_selfloop(
    g: SparseGraph, x: np.ndarray, d: int, seed: int, steps: int = 2
) -> np.ndarray:
    """PCA of column-normalized (D^-1 A)^steps X, computed product by product.

    An even step count keeps bipartite propagation on the start side, which
    is what makes this component informative under heterophily.
    """
    a_row = row_normalize(g)
    h = np.asarray(x, dtype=np.float64)
    for _ in range(steps):
        h = a_row @ h
    return _pca_embedding(l2_normalize_columns(h), d, seed)


def propagate_selfloop(
    g: SparseGraph, x: np.ndarray, d: int, seed: int, k_sym: int = 2
) -> np.ndarray:
    """PCA of column-normalized self-loop-smoothed propagation of X."""
    a_sym = sym_normalize_selfloop(g)
    h = np.asarray(x, dtype=np.float64)
    for _ in range(k_sym):
        h = a_sym @ h
    return _pca_embedding(l2_normalize_columns(h), d, seed)


@dataclass
class EmbeddingSet:
    """The five derived components plus the parameters that produced them."""

    dim: int
    structure: np.ndarray
    neighborhood: np.ndarray
    feature: np.ndarray
    propagation_plain: np.ndarray
    propagation_selfloop: np.ndarray
    provenance: dict = field(default_factory=dict)

    def component(self, key: str) -> np.ndarray:
        return getattr(self, COMPONENT_NAMES[key])

    def items(self):
        for key in COMPONENT_IDS:
            yield key, self.component(key)

    @property
    def num_nodes(self) -> int:
        return self.structure.shape[0]


def compute_embeddings(
    g: SparseGraph,
    x: np.ndarray,
    d: int = 128,
    seed: int = 0,
    walk_trials: int = 1000,
    walk_steps: int = 2,
    k_row: int = 2,
    k_sym: int = 2,
    count_mode: str = "endpoint",
) -> EmbeddingSet:
    """Compute all five components for one graph + feature matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != g.num_nodes:
        raise ValueError("feature rows must match graph nodes")
    d_struct = min(d, g.num_nodes)

    u, u_info = structure_embedding(g, d_struct, seed)
    r, r_info = neighborhood_embedding(
        g, d_struct, walk_trials, walk_steps, seed, count_mode=count_mode
    )
    if d_struct < d:
        u = np.pad(u, ((0, 0), (0, d - d_struct)))
        r = np.pad(r, ((0, 0), (0, d - d_struct)))
    f = feature_embedding(x, d, seed)
    p = propagate_no_selfloop(g, x, d, seed, steps=k_row)
    s = propagate_selfloop(g, x, d, seed, k_sym=k_sym)

    provenance = {
        "dim": d,
        "seed": seed,
        "walk_trials": walk_trials,
        "walk_steps": walk_steps,
        "k_row": k_row,
        "k_sym": k_sym,
        "count_mode": count_mode,
        "structure_rank": u_info.effective_rank,
        "neighborhood_rank": r_info.effective_rank,
    }
    return EmbeddingSet(d, u, r, f, p, s, provenance)
