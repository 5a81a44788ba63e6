"""Measure and exploit the usable information in a node-attributed graph.

The probe stage scores how much link-prediction or node-classification
signal each derived embedding component carries, without training a model;
the act stage trains a sparse-group-regularized linear predictor on the
same embeddings to actually solve the task.
"""

from .compat import (
    CompatMatrix,
    EdgeSample,
    adjusted_similarity,
    estimate_compatibility,
    estimate_negative_aware,
    estimate_plain,
    pair_similarities,
    sample_edges_for_compat,
    select_coefficients,
)
from .embed import (
    COMPONENT_IDS,
    COMPONENT_NAMES,
    EmbeddingSet,
    WalkCountMatrix,
    compute_embeddings,
    feature_embedding,
    neighborhood_embedding,
    propagate_no_selfloop,
    propagate_selfloop,
    random_walk_counts,
    structure_embedding,
)
from .graph import (
    EdgeSplit,
    NodeSplit,
    SparseGraph,
    build_graph,
    canonical_edges,
    row_normalize,
    sample_negative_edges,
    split_edges,
    split_nodes,
    sym_normalize_selfloop,
    two_core,
)
from .info import (
    Discretizer,
    JointCounts,
    ScoreReport,
    accuracy_bound,
    conditional_entropy,
    fit_discretizer,
    kmeans,
    probe_link_prediction,
    probe_node_classification,
    usable_info_score,
)
from .linalg import (
    LsqrResult,
    PcaResult,
    SvdResult,
    l2_normalize_columns,
    l2_normalize_rows,
    lsqr,
    pca,
    preprocess_embedding,
    randomized_svd,
    standardize_columns,
)
from .predict import (
    ActResult,
    LinearModel,
    TrainConfig,
    accuracy,
    act_link_prediction,
    act_node_classification,
    build_lp_features,
    build_nc_features,
    hits_at_k,
    sgl_penalty,
    sgl_prox,
    train,
)
from .synth import SynthDataset, SynthSpec, gen_features_lp, gen_features_nc, gen_structure, generate, scenario_suite

__version__ = "0.1.0"
