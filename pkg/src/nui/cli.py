"""Command-line entry point: probe, act, synthesize, and benchmark.

Every run resolves its parameters (flags override an optional key=value
config file), writes a manifest sufficient for bit-exact replay, and caches
embeddings keyed by a hash of everything upstream of them.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import matio
from .embed import COMPONENT_IDS, EmbeddingSet, compute_embeddings
from .graph import build_graph, split_edges, split_nodes
from .info import probe_link_prediction, probe_node_classification
from .predict import (
    DEFAULT_WD1_GRID,
    DEFAULT_WD2_GRID,
    TrainConfig,
    act_link_prediction,
    act_node_classification,
)
from .synth import SynthSpec, generate, scenario_suite

__all__ = ["main", "run", "bench_scaling", "parse_config_file"]

EDGE_RATIOS = (0.7, 0.1, 0.2)
NODE_RATIOS = (0.025, 0.025, 0.95)


def parse_config_file(path) -> dict:
    """Flat key=value lines, # comments; values are parsed as python literals
    when possible, else kept as strings."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {body!r}")
            key, _, value = body.partition("=")
            key = key.strip().replace("-", "_")
            value = value.strip()
            try:
                out[key] = json.loads(value)
            except json.JSONDecodeError:
                out[key] = value
    return out


def _file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _cache_key(parts: dict) -> str:
    blob = json.dumps(parts, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _load_or_compute_embeddings(cache_dir, key_parts, graph, features, **kwargs):
    cache_dir = Path(cache_dir)
    key = _cache_key(key_parts)
    slot = cache_dir / key
    done = slot / "provenance.json"
    if done.exists():
        prov = json.loads(done.read_text())
        blocks = {
            cid: matio.read_dense_matrix(slot / f"{cid}.mat") for cid in COMPONENT_IDS
        }
        return EmbeddingSet(
            prov["dim"], blocks["U"], blocks["R"], blocks["F"],
            blocks["P"], blocks["S"], prov,
        )
    emb = compute_embeddings(graph, features, **kwargs)
    slot.mkdir(parents=True, exist_ok=True)
    for cid, block in emb.items():
        matio.write_dense_matrix(slot / f"{cid}.mat", block)
    done.write_text(json.dumps(emb.provenance, indent=2))
    return emb


def _summary_table(rows: list[dict], title: str) -> str:
    lines = [title]
    if rows:
        keys = list(rows[0].keys())
        widths = [max(len(str(k)), *(len(f"{r[k]}") for r in rows)) for k in keys]
        lines.append("  ".join(str(k).ljust(w) for k, w in zip(keys, widths)))
        for r in rows:
            lines.append("  ".join(f"{r[k]}".ljust(w) for k, w in zip(keys, widths)))
    return "\n".join(lines) + "\n"


def _mean_std(values) -> str:
    arr = np.asarray(values, dtype=np.float64)
    return f"{arr.mean():.1f}±{arr.std():.1f}"


def _write_timings(path, rows):
    if not rows:
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def run(args: argparse.Namespace) -> int:
    """Execute one resolved command; returns a process exit status."""
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    command = args.command

    if command == "synth-gen":
        return _run_synth_gen(args, out)
    if command == "bench-scaling":
        return _run_bench(args, out)

    graph_edges = matio.read_edge_list(args.graph)
    features = matio.read_features(args.features)
    num_nodes = features.shape[0]
    full_graph = build_graph(graph_edges, num_nodes)
    labels = matio.read_labels(args.labels) if args.labels else None

    manifest = {
        "command": command,
        "graph": str(args.graph),
        "graph_sha256": _file_digest(args.graph),
        "features": str(args.features),
        "features_sha256": _file_digest(args.features),
        "labels": str(args.labels) if args.labels else None,
        "dim": args.dim,
        "bins": args.bins,
        "clusters": args.clusters,
        "sample_size": args.sample_size,
        "walk_trials": args.walk_trials,
        "seed": args.seed,
        "splits": args.splits,
        "edge_ratios": EDGE_RATIOS,
        "node_ratios": NODE_RATIOS,
        "hits_k": args.hits_k,
        "epochs": args.epochs,
        "min_delta": args.min_delta,
        "patience": args.patience,
        "wd1_grid": list(args.wd1),
        "wd2_grid": list(args.wd2),
        "resample_negatives": True,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))

    cache_dir = out / "cache"
    per_split_reports = []
    timing_rows = []

    for i in range(args.splits):
        split_seed = args.seed + i
        t_start = time.perf_counter()

        if command in ("probe-lp", "act-lp"):
            split = split_edges(full_graph, EDGE_RATIOS, split_seed)
            train_graph = build_graph(split.train_pos, num_nodes)
            emb = _load_or_compute_embeddings(
                cache_dir,
                {"graph": manifest["graph_sha256"],
                 "features": manifest["features_sha256"],
                 "task": "lp", "dim": args.dim, "walk_trials": args.walk_trials,
                 "seed": split_seed, "ratios": EDGE_RATIOS},
                train_graph, features,
                d=args.dim, seed=split_seed, walk_trials=args.walk_trials,
            )
            if command == "probe-lp":
                report = probe_link_prediction(
                    emb, split, sample_size=args.sample_size,
                    k_bins=args.bins, seed=split_seed, graph=train_graph,
                )
                per_split_reports.append(report.to_dict())
                timing_rows.append({"split": i, **report.timings,
                                    "total": time.perf_counter() - t_start})
            else:
                cfg = TrainConfig(seed=split_seed, epochs=args.epochs,
                                  patience=args.patience,
                                  min_delta=args.min_delta)
                result = act_link_prediction(
                    train_graph, features, split, cfg,
                    d=args.dim, hits_k=args.hits_k,
                    wd1_grid=args.wd1, wd2_grid=args.wd2,
                    sample_size=args.sample_size,
                    walk_trials=args.walk_trials, embeddings=emb,
                )
                per_split_reports.append(result.metrics)
                timing_rows.append({"split": i, **result.timings,
                                    "total": time.perf_counter() - t_start})

        elif command in ("probe-nc", "act-nc"):
            if labels is None:
                print("error: node classification requires --labels", file=sys.stderr)
                return 2
            nsplit = split_nodes(num_nodes, NODE_RATIOS, split_seed)
            emb = _load_or_compute_embeddings(
                cache_dir,
                {"graph": manifest["graph_sha256"],
                 "features": manifest["features_sha256"],
                 "task": "nc", "dim": args.dim, "walk_trials": args.walk_trials,
                 "seed": split_seed},
                full_graph, features,
                d=args.dim, seed=split_seed, walk_trials=args.walk_trials,
            )
            if command == "probe-nc":
                k = args.clusters or 2 * (int(labels.max()) + 1)
                report = probe_node_classification(
                    emb, labels, nsplit, k, seed=split_seed
                )
                per_split_reports.append(report.to_dict())
                timing_rows.append({"split": i, **report.timings,
                                    "total": time.perf_counter() - t_start})
            else:
                cfg = TrainConfig(seed=split_seed, epochs=args.epochs,
                                  patience=args.patience,
                                  min_delta=args.min_delta)
                result = act_node_classification(
                    full_graph, features, labels, nsplit, cfg,
                    d=args.dim, wd1_grid=args.wd1, wd2_grid=args.wd2,
                    walk_trials=args.walk_trials, embeddings=emb,
                )
                per_split_reports.append(result.metrics)
                timing_rows.append({"split": i, **result.timings,
                                    "total": time.perf_counter() - t_start})
        else:
            print(f"error: unknown command {command}", file=sys.stderr)
            return 2

    _write_timings(out / "timings.csv", timing_rows)

    if command.startswith("probe"):
        (out / "score_report.json").write_text(
            json.dumps({"splits": per_split_reports}, indent=2)
        )
        rows = []
        for cid in COMPONENT_IDS:
            scores = [100 * r["components"][cid]["score"] for r in per_split_reports]
            bounds = [100 * r["components"][cid]["accuracy_bound"]
                      for r in per_split_reports]
            rows.append({"component": cid, "score": _mean_std(scores),
                         "accuracy_bound": _mean_std(bounds)})
        summary = _summary_table(rows, f"{command}: usable-information scores (0-100)")
    else:
        (out / "metrics.json").write_text(
            json.dumps({"splits": per_split_reports}, indent=2)
        )
        metric_key = "test_hits" if command == "act-lp" else "test_accuracy"
        vals = [100 * r[metric_key] for r in per_split_reports]
        summary = _summary_table(
            [{"metric": metric_key, "value": _mean_std(vals)}],
            f"{command}: {args.splits} split(s)",
        )

    (out / "summary.txt").write_text(summary)
    print(summary, end="")
    return 0


def _run_synth_gen(args, out: Path) -> int:
    overrides = {}
    if args.nodes:
        overrides["num_nodes"] = args.nodes
    if args.feat_count:
        overrides["num_features"] = args.feat_count
    if args.classes:
        overrides["num_classes"] = args.classes
    if args.density:
        overrides["target_density"] = args.density
    if args.noise is not None:
        overrides["noise_rate"] = args.noise

    if args.scenario:
        suite = [s for s in scenario_suite(args.task, seed=args.seed, **overrides)
                 if s.name == args.scenario]
        if not suite:
            print(f"error: unknown scenario {args.scenario!r}", file=sys.stderr)
            return 2
    else:
        suite = scenario_suite(args.suite, seed=args.seed, **overrides)

    for spec in suite:
        ds = generate(spec)
        d = out / spec.name
        d.mkdir(parents=True, exist_ok=True)
        matio.write_edge_list(d / "edges.tsv", ds.graph.edge_array())
        matio.write_dense_matrix(d / "features.mat", ds.features)
        matio.write_labels(d / "labels.txt", ds.labels)
        (d / "manifest.json").write_text(json.dumps(ds.manifest(), indent=2))
        print(f"wrote {d} ({ds.graph.num_edges} edges)")
    return 0


def bench_scaling(
    out: Path,
    factors=(1, 2, 4, 8),
    base_nodes: int = 2000,
    num_features: int = 200,
    d: int = 64,
    walk_trials: int = 200,
    seed: int = 0,
) -> list[dict]:
    """Time act-lp on synthetic graphs whose edge count scales by `factors`.

    Returns one row per factor with per-phase wall-clock seconds; also
    writes timings.csv for the linearity check.
    """
    rows = []
    for factor in factors:
        spec = SynthSpec(
            num_nodes=base_nodes * factor,
            num_features=num_features,
            structure="diagonal",
            features_lp="global",
            walk_trials=walk_trials,
            seed=seed,
            name=f"bench_x{factor}",
        )
        ds = generate(spec)
        split = split_edges(ds.graph, EDGE_RATIOS, seed)
        train_graph = build_graph(split.train_pos, ds.graph.num_nodes)
        cfg = TrainConfig(seed=seed, resample_negatives=False)
        result = act_link_prediction(
            train_graph, ds.features, split, cfg,
            d=d, walk_trials=walk_trials,
            wd1_grid=(1e-5,), wd2_grid=(1e-4,),
        )
        row = {
            "factor": factor,
            "num_edges": int(ds.graph.num_edges),
            **{k: round(v, 4) for k, v in result.timings.items()},
            "total": round(sum(result.timings.values()), 4),
        }
        rows.append(row)
        print(f"factor {factor}: |E|={row['num_edges']} total={row['total']}s")
    out.mkdir(parents=True, exist_ok=True)
    _write_timings(out / "timings.csv", rows)
    return rows


def _run_bench(args, out: Path) -> int:
    factors = [int(f) for f in str(args.factors).split(",")]
    rows = bench_scaling(
        out, factors=factors, base_nodes=args.base_nodes,
        num_features=args.feat_count or 200, d=args.dim,
        walk_trials=args.walk_trials, seed=args.seed,
    )
    edges = np.array([r["num_edges"] for r in rows], dtype=np.float64)
    totals = np.array([r["total"] for r in rows])
    coeffs = np.polyfit(edges, totals, 1)
    pred = np.polyval(coeffs, edges)
    ss_res = np.sum((totals - pred) ** 2)
    ss_tot = np.sum((totals - totals.mean()) ** 2)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    (out / "summary.txt").write_text(
        f"linear fit total ~ |E|: R^2 = {r2:.4f}\n"
    )
    print(f"linear fit R^2 = {r2:.4f}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nui",
        description="Measure and exploit usable information in a graph.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_labels=False, epochs=100, patience=10, min_delta=5e-3):
        p.add_argument("--graph", required=True, help="edge-list file (u<TAB>v)")
        p.add_argument("--features", required=True, help="feature matrix (.mat or .csv)")
        p.add_argument("--labels", required=needs_labels, default=None)
        p.add_argument("--out", required=True)
        p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument("--dim", type=int, default=128)
        p.add_argument("--bins", type=int, default=32)
        p.add_argument("--clusters", type=int, default=None)
        p.add_argument("--sample-size", type=int, default=200_000)
        p.add_argument("--walk-trials", type=int, default=1000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--splits", type=int, default=5)
        p.add_argument("--hits-k", type=int, default=100)
        p.add_argument("--epochs", type=int, default=epochs)
        p.add_argument("--patience", type=int, default=patience)
        p.add_argument("--min-delta", type=float, default=min_delta)
        p.add_argument("--wd1", type=float, nargs="+", default=list(DEFAULT_WD1_GRID))
        p.add_argument("--wd2", type=float, nargs="+", default=list(DEFAULT_WD2_GRID))

    for name in ("probe-lp", "act-lp"):
        common(sub.add_parser(name))
    for name in ("probe-nc", "act-nc"):
        # the tiny labeled sets need a longer budget to converge
        common(sub.add_parser(name), needs_labels=True,
               epochs=300, patience=30, min_delta=2e-3)

    gen = sub.add_parser("synth-gen")
    gen.add_argument("--suite", choices=("lp", "nc"), default="lp")
    gen.add_argument("--task", choices=("lp", "nc"), default="lp")
    gen.add_argument("--scenario", default=None)
    gen.add_argument("--out", required=True)
    gen.add_argument("--nodes", type=int, default=None)
    gen.add_argument("--feat-count", type=int, default=None)
    gen.add_argument("--classes", type=int, default=None)
    gen.add_argument("--density", type=float, default=None)
    gen.add_argument("--noise", type=float, default=None)
    gen.add_argument("--seed", type=int, default=0)

    bench = sub.add_parser("bench-scaling")
    bench.add_argument("--out", required=True)
    bench.add_argument("--factors", default="1,2,4,8")
    bench.add_argument("--base-nodes", type=int, default=2000)
    bench.add_argument("--feat-count", type=int, default=200)
    bench.add_argument("--dim", type=int, default=64)
    bench.add_argument("--walk-trials", type=int, default=200)
    bench.add_argument("--seed", type=int, default=0)
    return parser


def _apply_config_file(args: argparse.Namespace, parser, argv) -> argparse.Namespace:
    """Config file supplies defaults; explicit flags keep priority."""
    if getattr(args, "config", None) is None:
        return args
    file_values = parse_config_file(args.config)
    given = {a.split("=")[0].lstrip("-").replace("-", "_")
             for a in argv if a.startswith("--")}
    for key, value in file_values.items():
        if hasattr(args, key) and key not in given:
            current = getattr(args, key)
            if isinstance(current, int) and not isinstance(current, bool):
                value = int(value)
            elif isinstance(current, float):
                value = float(value)
            setattr(args, key, value)
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args = _apply_config_file(args, parser, argv)
        return run(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
