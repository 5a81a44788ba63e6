"""Usable-information scoring and the two training-free probes.

The score of a discrete predictor variable X for target Y is 2^-H(Y|X),
computed from an empirical joint count table. It provably lower-bounds the
accuracy sum_x max_y p(x,y), and both quantities are reported side by side.

The link-prediction probe discretizes adjusted edge similarities into
quantile bins; the node-classification probe clusters embeddings with
k-means. Neither trains a model.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .compat import (
    DEFAULT_SAMPLE_SIZE,
    estimate_compatibility,
    pair_similarities,
)
from .embed import COMPONENT_IDS, EmbeddingSet
from .graph import EdgeSplit, SparseGraph, build_graph
from .linalg import l2_normalize_rows, preprocess_embedding
from .seeds import substream

__all__ = [
    "JointCounts",
    "Discretizer",
    "ComponentScore",
    "ScoreReport",
    "conditional_entropy",
    "usable_info_score",
    "accuracy_bound",
    "fit_discretizer",
    "kmeans",
    "probe_link_prediction",
    "probe_node_classification",
    "DEFAULT_K_BINS",
]

DEFAULT_K_BINS = 32


@dataclass(frozen=True)
class JointCounts:
    """Non-negative co-occurrence counts of two discrete variables."""

    table: np.ndarray  # (num_x, num_y) integer counts

    def __post_init__(self):
        t = np.asarray(self.table)
        if t.ndim != 2 or t.size == 0:
            raise ValueError("count table must be 2-d and non-empty")
        if (t < 0).any():
            raise ValueError("counts must be non-negative")
        if t.sum() < 1:
            raise ValueError("count table must contain at least one observation")
        object.__setattr__(self, "table", t.astype(np.float64))

    @classmethod
    def from_pairs(cls, x: np.ndarray, y: np.ndarray) -> "JointCounts":
        x = np.asarray(x, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        if x.shape != y.shape:
            raise ValueError("x and y must align")
        nx, ny = int(x.max()) + 1, int(y.max()) + 1
        table = np.zeros((nx, ny), dtype=np.int64)
        np.add.at(table, (x, y), 1)
        return cls(table)


def conditional_entropy(counts: JointCounts) -> float:
    """H(Y|X) in bits from raw counts; empty rows contribute nothing."""
    t = counts.table
    total = t.sum()
    p_xy = t / total
    p_x = p_xy.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(p_xy > 0, p_xy / p_x, 1.0)
        contrib = np.where(p_xy > 0, -p_xy * np.log2(cond), 0.0)
    return float(contrib.sum())


def accuracy_bound(counts: JointCounts) -> float:
    """Best achievable accuracy predicting Y from X: sum_x max_y p(x,y)."""
    t = counts.table
    return float(t.max(axis=1).sum() / t.sum())


def usable_info_score(counts: JointCounts) -> float:
    """2^-H(Y|X), in (0, 1]; never exceeds the matching accuracy bound."""
    score = float(2.0 ** (-conditional_entropy(counts)))
    bound = accuracy_bound(counts)
    assert score <= bound + 1e-12, f"score {score} exceeds accuracy bound {bound}"
    return score


@dataclass(frozen=True)
class Discretizer:
    """Quantile binner; k-1 strictly ascending edges define up to k bins."""

    bin_edges: np.ndarray
    k: int

    def transform(self, values: np.ndarray) -> np.ndarray:
        # values equal to an edge fall in the lower bin, so an edge sitting
        # on a point mass keeps that mass separable from everything above
        return np.searchsorted(self.bin_edges, np.asarray(values), side="left")

    @property
    def num_bins(self) -> int:
        return len(self.bin_edges) + 1


def fit_discretizer(values, k: int) -> Discretizer:
    """Quantile bin edges at i/k, i=1..k-1, linear interpolation, deduped."""
    if k < 1:
        raise ValueError("k must be >= 1")
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot fit a discretizer on no values")
    if k == 1:
        return Discretizer(np.empty(0), k)
    qs = np.arange(1, k) / k
    edges = np.unique(np.quantile(values, qs, method="linear"))
    # an edge at or past the max splits nothing (constant input -> one bin)
    edges = edges[edges < values.max()]
    return Discretizer(edges, k)


def kmeans(
    rows: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 100,
) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd's algorithm with k-means++ seeding; returns (labels, centers).

    Deterministic under seed. Empty clusters are re-seeded to the point
    farthest from its assigned center, so inertia stays non-increasing.
    """
    x = np.asarray(rows, dtype=np.float64)
    n = x.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = substream(seed, "kmeans")

    # k-means++ seeding; duplicate rows can force repeated centers, fine.
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[c:] = x[rng.integers(n, size=k - c)]
            break
        probs = d2 / total
        centers[c] = x[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, np.sum((x - centers[c]) ** 2, axis=1))

    labels = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        dists = _sq_dists(x, centers)
        new_labels = dists.argmin(axis=1)
        closest = dists[np.arange(n), new_labels]
        for c in range(k):
            sel = new_labels == c
            if sel.any():
                centers[c] = x[sel].mean(axis=0)
            else:
                far = int(np.argmax(closest))
                centers[c] = x[far]
                new_labels[far] = c
                closest[far] = 0.0
        if (new_labels == labels).all():
            labels = new_labels
            break
        labels = new_labels
    return labels, centers


def _sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return (
        np.sum(x**2, axis=1)[:, None]
        - 2.0 * (x @ centers.T)
        + np.sum(centers**2, axis=1)[None, :]
    )


def assign_clusters(rows: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return _sq_dists(np.asarray(rows, dtype=np.float64), centers).argmin(axis=1)


@dataclass
class ComponentScore:
    score: float
    accuracy_bound: float
    params: dict = field(default_factory=dict)


@dataclass
class ScoreReport:
    """Per-component usable-information scores for one task on one split."""

    task: str
    components: dict  # component id -> ComponentScore
    seed: int
    timings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "components": {
                key: {
                    "score": cs.score,
                    "accuracy_bound": cs.accuracy_bound,
                    "params": cs.params,
                }
                for key, cs in self.components.items()
            },
            "seed": self.seed,
            "timings": self.timings,
        }

    def best_component(self) -> str:
        return max(self.components, key=lambda k: self.components[k].score)


def probe_link_prediction(
    embeddings: EmbeddingSet,
    split: EdgeSplit,
    sample_size: int = DEFAULT_SAMPLE_SIZE,
    k_bins: int = DEFAULT_K_BINS,
    seed: int = 0,
    graph: SparseGraph | None = None,
    compat_cache: dict | None = None,
) -> ScoreReport:
    """Score each embedding component for link prediction, no model training.

    Per component: preprocess, estimate the negative-aware compatibility
    matrix on training edges, fit a quantile discretizer on the sampled
    train-edge similarities, then bin the validation similarities and score
    bins against the edge/non-edge label.

    `compat_cache`, when given, is filled with the per-component
    (z_hat, negative_aware, plain, sample) tuples so the exploitation stage
    can reuse them.
    """
    if len(split.valid_pos) == 0 or len(split.valid_neg) == 0:
        raise ValueError("probe needs non-empty validation positives and negatives")
    if graph is None:
        graph = build_graph(split.train_pos, embeddings.num_nodes)

    components: dict[str, ComponentScore] = {}
    timings: dict[str, float] = {}
    for key, z in embeddings.items():
        t0 = time.perf_counter()
        z_hat = preprocess_embedding(z)
        refined, plain, sample = estimate_compatibility(
            z_hat,
            graph,
            split.train_pos,
            sample_size=sample_size,
            seed=seed,
        )
        if compat_cache is not None:
            compat_cache[key] = (z_hat, refined, plain, sample)

        train_pairs = np.concatenate([sample.pos, sample.neg], axis=0)
        disc = fit_discretizer(pair_similarities(z_hat, refined, train_pairs), k_bins)

        valid_pairs = np.concatenate([split.valid_pos, split.valid_neg], axis=0)
        bins = disc.transform(pair_similarities(z_hat, refined, valid_pairs))
        labels = np.concatenate(
            [np.ones(len(split.valid_pos), dtype=np.int64),
             np.zeros(len(split.valid_neg), dtype=np.int64)]
        )
        counts = JointCounts.from_pairs(bins, labels)
        components[key] = ComponentScore(
            score=usable_info_score(counts),
            accuracy_bound=accuracy_bound(counts),
            params={"k_bins": k_bins, "effective_bins": disc.num_bins,
                    "converged": refined.converged},
        )
        timings[key] = time.perf_counter() - t0

    return ScoreReport("link_prediction", components, seed, timings)


def probe_node_classification(
    embeddings: EmbeddingSet,
    labels: np.ndarray,
    node_split,
    k_clusters: int,
    seed: int = 0,
    fit_scope: str = "test",
) -> ScoreReport:
    """Score each component for node classification via k-means clustering.

    Components are row-normalized, the clustering is fit on the test-
    partition rows (`fit_scope="all"` fits on every row instead), and the
    labeled train+valid rows are assigned to the nearest center. Cluster id
    vs class label forms the scored joint table.
    """
    labels = np.asarray(labels, dtype=np.int64)
    test_idx = node_split.test_idx
    labeled_idx = np.concatenate([node_split.train_idx, node_split.valid_idx])

    components: dict[str, ComponentScore] = {}
    timings: dict[str, float] = {}
    for key, z in embeddings.items():
        t0 = time.perf_counter()
        zn = l2_normalize_rows(z)
        fit_rows = zn if fit_scope == "all" else zn[test_idx]
        _, centers = kmeans(fit_rows, k_clusters, seed=seed)
        assigned = assign_clusters(zn[labeled_idx], centers)
        counts = JointCounts.from_pairs(assigned, labels[labeled_idx])
        components[key] = ComponentScore(
            score=usable_info_score(counts),
            accuracy_bound=accuracy_bound(counts),
            params={"k_clusters": k_clusters, "fit_scope": fit_scope},
        )
        timings[key] = time.perf_counter() - t0

    return ScoreReport("node_classification", components, seed, timings)
