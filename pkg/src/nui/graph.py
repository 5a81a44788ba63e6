"""Undirected graph storage (CSR), adjacency normalizations, 2-core, splits.

Edges are always handled canonically as (min, max) pairs with self-loops
dropped; the CSR structure stores both directions of every undirected edge.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .seeds import substream

__all__ = [
    "SparseGraph",
    "EdgeSplit",
    "NodeSplit",
    "build_graph",
    "canonical_edges",
    "row_normalize",
    "sym_normalize_selfloop",
    "two_core",
    "split_edges",
    "split_nodes",
    "sample_negative_edges",
    "negative_sampler",
]


def canonical_edges(edges) -> np.ndarray:
    """Normalize an edge collection to unique (min, max) int64 pairs, no loops."""
    arr = np.asarray(edges, dtype=np.int64)
    if arr.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    arr = arr.reshape(-1, 2)
    low = np.minimum(arr[:, 0], arr[:, 1])
    high = np.maximum(arr[:, 0], arr[:, 1])
    keep = low != high
    pairs = np.stack([low[keep], high[keep]], axis=1)
    return np.unique(pairs, axis=0)


@dataclass(frozen=True)
class SparseGraph:
    """Symmetric unweighted graph in compressed sparse row form."""

    num_nodes: int
    row_offsets: np.ndarray   # (num_nodes + 1,) int64
    col_indices: np.ndarray   # (nnz,) int64, sorted within each row
    values: np.ndarray        # (nnz,) float64, all 1.0 for unweighted input

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    @property
    def num_edges(self) -> int:
        """Number of undirected edges."""
        return self.col_indices.shape[0] // 2

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.values, self.col_indices, self.row_offsets),
            shape=(self.num_nodes, self.num_nodes),
        )

    def edge_array(self) -> np.ndarray:
        """Undirected edges as (m, 2) canonical pairs."""
        rows = np.repeat(np.arange(self.num_nodes, dtype=np.int64), self.degrees)
        mask = rows < self.col_indices
        return np.stack([rows[mask], self.col_indices[mask]], axis=1)

    def neighbors(self, node: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[node]:self.row_offsets[node + 1]]


def build_graph(edges, num_nodes: int) -> SparseGraph:
    """Build a symmetric CSR graph, dropping duplicates and self-loops."""
    pairs = canonical_edges(edges)
    if pairs.size and (pairs.min() < 0 or pairs.max() >= num_nodes):
        raise ValueError("edge endpoint out of range")
    if pairs.size:
        both = np.concatenate([pairs, pairs[:, ::-1]], axis=0)
        order = np.lexsort((both[:, 1], both[:, 0]))
        both = both[order]
        counts = np.bincount(both[:, 0], minlength=num_nodes)
    else:
        both = np.empty((0, 2), dtype=np.int64)
        counts = np.zeros(num_nodes, dtype=np.int64)
    offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return SparseGraph(
        num_nodes=num_nodes,
        row_offsets=offsets,
        col_indices=both[:, 1].copy(),
        values=np.ones(both.shape[0], dtype=np.float64),
    )


def row_normalize(g: SparseGraph) -> sp.csr_matrix:
    """D^-1 A: each nonzero row sums to 1; isolated-node rows stay all-zero."""
    a = g.to_scipy()
    deg = g.degrees.astype(np.float64)
    inv = np.zeros_like(deg)
    nz = deg > 0
    inv[nz] = 1.0 / deg[nz]
    return sp.diags(inv) @ a


def sym_normalize_selfloop(g: SparseGraph) -> sp.csr_matrix:
    """(D+I)^-1/2 (A+I) (D+I)^-1/2, the self-loop symmetric normalization.

    Entry values are computed directly as 1/(s_i*s_j) so the result equals
    its transpose bit for bit.
    """
    a = (g.to_scipy() + sp.identity(g.num_nodes, format="csr")).tocoo()
    scale = 1.0 / np.sqrt(g.degrees.astype(np.float64) + 1.0)
    values = scale[a.row] * scale[a.col]
    out = sp.csr_matrix((values, (a.row, a.col)), shape=a.shape)
    out.sort_indices()
    return out


def two_core(edges) -> np.ndarray:
    """Maximal subgraph where every incident node has degree >= 2.

    Iteratively drops edges touching degree-<2 nodes until a fixpoint; may
    return an empty set (trees, stars). Input and output are canonical pairs.
    """
    pairs = canonical_edges(edges)
    while pairs.shape[0]:
        n = int(pairs.max()) + 1
        deg = np.bincount(pairs.ravel(), minlength=n)
        keep = (deg[pairs[:, 0]] >= 2) & (deg[pairs[:, 1]] >= 2)
        if keep.all():
            break
        pairs = pairs[keep]
    return pairs


def _edge_codes(pairs: np.ndarray, num_nodes: int) -> np.ndarray:
    return pairs[:, 0] * np.int64(num_nodes) + pairs[:, 1]


def sample_negative_edges(
    num_nodes: int,
    existing: np.ndarray,
    count: int,
    rng: np.random.Generator,
    exclude: np.ndarray | None = None,
    strict: bool = True,
) -> np.ndarray:
    """Sample `count` distinct canonical non-edges uniformly at random.

    Rejection-samples against `existing` edges, `exclude` pairs, and earlier
    draws. With strict=True a graph too dense to satisfy the request raises;
    otherwise we return every available non-edge with a warning.
    """
    existing = canonical_edges(existing)
    forbidden = set(_edge_codes(existing, num_nodes).tolist())
    if exclude is not None and len(exclude):
        forbidden |= set(_edge_codes(canonical_edges(exclude), num_nodes).tolist())

    total_pairs = num_nodes * (num_nodes - 1) // 2
    available = total_pairs - len(forbidden)
    if available < count:
        if strict:
            raise ValueError(
                f"requested {count} negative edges but only {available} non-edges exist"
            )
        warnings.warn(
            f"only {available} non-edges available, returning fewer than {count}",
            stacklevel=2,
        )
        count = available
    if count == 0:
        return np.empty((0, 2), dtype=np.int64)

    # Dense fallback: enumerate when rejection sampling would thrash.
    if available < 4 * count and total_pairs <= 2_000_000:
        iu = np.triu_indices(num_nodes, k=1)
        all_pairs = np.stack(iu, axis=1).astype(np.int64)
        codes = _edge_codes(all_pairs, num_nodes)
        mask = ~np.isin(codes, np.fromiter(forbidden, dtype=np.int64, count=len(forbidden)))
        pool = all_pairs[mask]
        pick = rng.choice(pool.shape[0], size=count, replace=False)
        chosen = pool[pick]
        return chosen[np.lexsort((chosen[:, 1], chosen[:, 0]))]

    out = np.empty((count, 2), dtype=np.int64)
    got = 0
    seen = set()
    while got < count:
        batch = max(2 * (count - got), 1024)
        u = rng.integers(0, num_nodes, size=batch)
        v = rng.integers(0, num_nodes, size=batch)
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        ok = lo != hi
        for a, b in zip(lo[ok].tolist(), hi[ok].tolist()):
            code = a * num_nodes + b
            if code in forbidden or code in seen:
                continue
            seen.add(code)
            out[got] = (a, b)
            got += 1
            if got == count:
                break
    return out[np.lexsort((out[:, 1], out[:, 0]))]


def negative_sampler(num_nodes: int, edges: np.ndarray):
    """Closure for repeated uniform non-edge draws against a fixed edge set.

    Precomputes the forbidden-code set once; each call rejection-samples a
    fresh batch of distinct canonical non-edges. Used for per-epoch training
    negatives where `sample_negative_edges` would rebuild its set each time.
    """
    forbidden = frozenset(_edge_codes(canonical_edges(edges), num_nodes).tolist())

    def sample(count: int, rng: np.random.Generator) -> np.ndarray:
        out = np.empty((count, 2), dtype=np.int64)
        got = 0
        seen = set()
        while got < count:
            batch = max(2 * (count - got), 1024)
            u = rng.integers(0, num_nodes, size=batch)
            v = rng.integers(0, num_nodes, size=batch)
            lo, hi = np.minimum(u, v), np.maximum(u, v)
            ok = lo != hi
            for a, b in zip(lo[ok].tolist(), hi[ok].tolist()):
                code = a * num_nodes + b
                if code in forbidden or code in seen:
                    continue
                seen.add(code)
                out[got] = (a, b)
                got += 1
                if got == count:
                    break
        return out

    return sample


@dataclass(frozen=True)
class EdgeSplit:
    """Positive edge partition plus sampled negatives for valid/test."""

    train_pos: np.ndarray
    valid_pos: np.ndarray
    test_pos: np.ndarray
    valid_neg: np.ndarray
    test_neg: np.ndarray
    seed: int = field(default=0)


def split_edges(
    g: SparseGraph,
    ratios: tuple[float, float, float],
    seed: int,
    num_valid_neg: int | None = None,
    num_test_neg: int | None = None,
) -> EdgeSplit:
    """Partition edges into train/valid/test and sample matching negatives.

    Deterministic under `seed`. Negatives are drawn uniformly from non-edges
    of the full graph, rejected against E and against each other; sizes
    default to the matching positive-set sizes.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("split ratios must sum to 1")
    edges = g.edge_array()
    m = edges.shape[0]
    rng = substream(seed, "edge-split")
    perm = rng.permutation(m)
    n_valid = int(round(ratios[1] * m))
    n_test = int(round(ratios[2] * m))
    n_train = m - n_valid - n_test
    if n_train < 0:
        raise ValueError("ratios leave no room for the training split")

    train_pos = edges[np.sort(perm[:n_train])]
    valid_pos = edges[np.sort(perm[n_train:n_train + n_valid])]
    test_pos = edges[np.sort(perm[n_train + n_valid:])]

    neg_rng = substream(seed, "edge-split-negatives")
    nv = len(valid_pos) if num_valid_neg is None else num_valid_neg
    nt = len(test_pos) if num_test_neg is None else num_test_neg
    valid_neg = sample_negative_edges(g.num_nodes, edges, nv, neg_rng)
    test_neg = sample_negative_edges(g.num_nodes, edges, nt, neg_rng, exclude=valid_neg)
    return EdgeSplit(train_pos, valid_pos, test_pos, valid_neg, test_neg, seed)


@dataclass(frozen=True)
class NodeSplit:
    """Disjoint train/valid/test node index sets covering all nodes."""

    train_idx: np.ndarray
    valid_idx: np.ndarray
    test_idx: np.ndarray
    seed: int = field(default=0)


def split_nodes(
    num_nodes: int, ratios: tuple[float, float, float], seed: int
) -> NodeSplit:
    """Shuffle nodes and cut train/valid/test index sets, deterministic."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("split ratios must sum to 1")
    rng = substream(seed, "node-split")
    perm = rng.permutation(num_nodes)
    n_train = int(round(ratios[0] * num_nodes))
    n_valid = int(round(ratios[1] * num_nodes))
    return NodeSplit(
        np.sort(perm[:n_train]),
        np.sort(perm[n_train:n_train + n_valid]),
        np.sort(perm[n_train + n_valid:]),
        seed,
    )
