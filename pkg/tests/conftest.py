"""Shared fixtures for the acceptance suite.

The expensive full-scale runs (link prediction and node classification over
every synthetic scenario and split) are computed once per session and shared
by all acceptance criteria. NUI_ACCEPT_SPLITS trims the split count for
faster development iterations; the shipped default is the full 5.
"""

import os

import numpy as np
import pytest

N_SPLITS = int(os.environ.get("NUI_ACCEPT_SPLITS", "5"))

LP_HITS_K = 100
LP_K_BINS = 32
NC_K_CLUSTERS = 8
DIM = 128


def _lp_train_config(seed):
    from nui.predict import TrainConfig
    return TrainConfig(seed=seed, epochs=100, patience=10, min_delta=5e-3)


def _nc_train_config(seed):
    from nui.predict import TrainConfig
    return TrainConfig(seed=seed, epochs=300, patience=30, min_delta=2e-3)


@pytest.fixture(scope="session")
def lp_results():
    """Per LP scenario: probes, full/ablated models, per-component models."""
    from nui.embed import compute_embeddings
    from nui.graph import build_graph, split_edges
    from nui.info import probe_link_prediction
    from nui.predict import act_link_prediction
    from nui.synth import generate, scenario_suite

    results = {}
    for spec in scenario_suite("lp", seed=0):
        ds = generate(spec)
        splits = []
        for i in range(N_SPLITS):
            split = split_edges(ds.graph, (0.7, 0.1, 0.2), i)
            tg = build_graph(split.train_pos, spec.num_nodes)
            emb = compute_embeddings(
                tg, ds.features, d=DIM, seed=i, walk_trials=1000
            )
            cache = {}
            report = probe_link_prediction(
                emb, split, k_bins=LP_K_BINS, seed=i, graph=tg,
                compat_cache=cache,
            )
            cfg = _lp_train_config(i)
            modes = {}
            for mode in ("negative_aware", "plain", "none"):
                act = act_link_prediction(
                    tg, ds.features, split, cfg, d=DIM, hits_k=LP_HITS_K,
                    embeddings=emb, compat_cache=cache, cm_mode=mode,
                )
                modes[mode] = 100.0 * act.metrics["test_hits"]
            comp_hits = {}
            for comp in ("U", "R", "F", "P", "S"):
                act = act_link_prediction(
                    tg, ds.features, split, cfg, d=DIM, hits_k=LP_HITS_K,
                    embeddings=emb, compat_cache=cache, components=(comp,),
                )
                comp_hits[comp] = 100.0 * act.metrics["test_hits"]
            splits.append({
                "report": report,
                "modes": modes,
                "comp_hits": comp_hits,
            })
        results[spec.name] = {"spec": spec, "splits": splits}
    return results


@pytest.fixture(scope="session")
def nc_results():
    """Per NC scenario: probes, full model, per-component models."""
    from nui.embed import compute_embeddings
    from nui.graph import split_nodes
    from nui.info import probe_node_classification
    from nui.predict import act_node_classification
    from nui.synth import generate, scenario_suite

    results = {}
    for spec in scenario_suite("nc", seed=0):
        ds = generate(spec)
        emb = compute_embeddings(
            ds.graph, ds.features, d=DIM, seed=0, walk_trials=1000
        )
        splits = []
        for i in range(N_SPLITS):
            nsplit = split_nodes(spec.num_nodes, (0.025, 0.025, 0.95), i)
            report = probe_node_classification(
                emb, ds.labels, nsplit, k_clusters=NC_K_CLUSTERS, seed=i
            )
            cfg = _nc_train_config(i)
            act = act_node_classification(
                ds.graph, ds.features, ds.labels, nsplit, cfg, d=DIM,
                embeddings=emb,
            )
            comp_accs = {}
            for comp in ("U", "R", "F", "P", "S"):
                r = act_node_classification(
                    ds.graph, ds.features, ds.labels, nsplit, cfg, d=DIM,
                    embeddings=emb, components=(comp,),
                )
                comp_accs[comp] = 100.0 * r.metrics["test_accuracy"]
            splits.append({
                "report": report,
                "accuracy": 100.0 * act.metrics["test_accuracy"],
                "comp_accs": comp_accs,
            })
        results[spec.name] = {"spec": spec, "splits": splits}
    return results


def mean_over_splits(rows, getter):
    return float(np.mean([getter(r) for r in rows]))
