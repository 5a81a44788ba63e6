"""CLI behavior: generation, probing, acting, config files, caching, formats."""

import json

import numpy as np
import pytest

from nui import matio
from nui.cli import main, parse_config_file


def _gen_small_dataset(tmp_path, task="lp", scenario=None):
    args = [
        "synth-gen", "--out", str(tmp_path / "data"),
        "--nodes", "240", "--feat-count", "48", "--density", "8",
        "--seed", "1",
    ]
    if scenario:
        args += ["--scenario", scenario, "--task", task]
    else:
        args += ["--suite", task]
    assert main(args) == 0
    return tmp_path / "data"


class TestMatio:
    def test_dense_matrix_roundtrip(self, tmp_path):
        m = np.random.default_rng(0).standard_normal((7, 3))
        path = tmp_path / "m.mat"
        matio.write_dense_matrix(path, m)
        np.testing.assert_array_equal(matio.read_dense_matrix(path), m)

    def test_magic_checked(self, tmp_path):
        path = tmp_path / "bad.mat"
        path.write_bytes(b"NOTMAGIC" + b"\0" * 64)
        with pytest.raises(ValueError):
            matio.read_dense_matrix(path)

    def test_edge_list_roundtrip_with_comments(self, tmp_path):
        path = tmp_path / "e.tsv"
        path.write_text("# a comment\n0\t1\n1\t2  # trailing\n\n")
        np.testing.assert_array_equal(matio.read_edge_list(path), [[0, 1], [1, 2]])

    def test_labels_roundtrip(self, tmp_path):
        path = tmp_path / "y.txt"
        matio.write_labels(path, np.array([0, 1, 2, 1]))
        np.testing.assert_array_equal(matio.read_labels(path), [0, 1, 2, 1])

    def test_csv_features(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("1.0,2.0\n3.0,4.0\n")
        np.testing.assert_array_equal(
            matio.read_features(path), [[1.0, 2.0], [3.0, 4.0]]
        )


class TestConfigFile:
    def test_parse_values(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# comment\ndim = 16\nsample-size=500\nseed=3\n")
        parsed = parse_config_file(cfg)
        assert parsed == {"dim": 16, "sample_size": 500, "seed": 3}

    def test_malformed_line_rejected(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("dim 16\n")
        with pytest.raises(ValueError):
            parse_config_file(cfg)

    def test_flags_override_file(self, tmp_path):
        data = _gen_small_dataset(tmp_path, scenario="random_x_diagonal_a")
        d = data / "random_x_diagonal_a"
        cfg = tmp_path / "run.cfg"
        cfg.write_text("dim=8\nsplits=1\nwalk-trials=30\nbins=4\n")
        out = tmp_path / "out"
        code = main([
            "probe-lp", "--graph", str(d / "edges.tsv"),
            "--features", str(d / "features.mat"),
            "--out", str(out), "--config", str(cfg),
            "--dim", "4",  # explicit flag wins over config file
        ])
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["dim"] == 4
        assert manifest["splits"] == 1


class TestSynthGen:
    def test_lp_suite_writes_six_directories(self, tmp_path):
        data = _gen_small_dataset(tmp_path, task="lp")
        dirs = sorted(p.name for p in data.iterdir())
        assert len(dirs) == 6
        for p in data.iterdir():
            assert (p / "edges.tsv").exists()
            assert (p / "features.mat").exists()
            assert (p / "labels.txt").exists()
            manifest = json.loads((p / "manifest.json").read_text())
            assert manifest["num_nodes"] == 240

    def test_unknown_scenario_fails(self, tmp_path):
        code = main([
            "synth-gen", "--scenario", "nope", "--out", str(tmp_path / "x")
        ])
        assert code == 2


class TestProbeAndAct:
    def test_probe_lp_writes_report(self, tmp_path):
        data = _gen_small_dataset(tmp_path, scenario="global_x_diagonal_a")
        d = data / "global_x_diagonal_a"
        out = tmp_path / "probe"
        code = main([
            "probe-lp", "--graph", str(d / "edges.tsv"),
            "--features", str(d / "features.mat"), "--out", str(out),
            "--dim", "8", "--bins", "8", "--walk-trials", "30",
            "--splits", "2", "--seed", "0",
        ])
        assert code == 0
        report = json.loads((out / "score_report.json").read_text())
        assert len(report["splits"]) == 2
        for split in report["splits"]:
            assert split["task"] == "link_prediction"
            assert set(split["components"]) == {"U", "R", "F", "P", "S"}
            for cs in split["components"].values():
                assert cs["score"] <= cs["accuracy_bound"] + 1e-12
        assert (out / "summary.txt").exists()
        assert (out / "timings.csv").exists()

    def test_act_lp_deterministic_metrics(self, tmp_path):
        data = _gen_small_dataset(tmp_path, scenario="global_x_diagonal_a")
        d = data / "global_x_diagonal_a"
        flags = [
            "--graph", str(d / "edges.tsv"),
            "--features", str(d / "features.mat"),
            "--dim", "8", "--walk-trials", "30", "--splits", "1",
            "--hits-k", "10", "--epochs", "30",
            "--wd1", "1e-4", "--wd2", "1e-4", "--seed", "0",
        ]
        out1, out2 = tmp_path / "a1", tmp_path / "a2"
        assert main(["act-lp", "--out", str(out1)] + flags) == 0
        assert main(["act-lp", "--out", str(out2)] + flags) == 0
        m1 = (out1 / "metrics.json").read_text()
        m2 = (out2 / "metrics.json").read_text()
        assert m1 == m2

    def test_probe_nc_and_act_nc(self, tmp_path):
        data = _gen_small_dataset(tmp_path, task="nc",
                                  scenario="useful_x_homophily_a")
        d = data / "useful_x_homophily_a"
        flags = [
            "--graph", str(d / "edges.tsv"),
            "--features", str(d / "features.mat"),
            "--labels", str(d / "labels.txt"),
            "--dim", "8", "--walk-trials", "30", "--splits", "1",
            "--epochs", "30", "--wd1", "1e-4", "--wd2", "1e-4",
        ]
        out = tmp_path / "pnc"
        assert main(["probe-nc", "--out", str(out)] + flags) == 0
        report = json.loads((out / "score_report.json").read_text())
        assert report["splits"][0]["task"] == "node_classification"

        out2 = tmp_path / "anc"
        assert main(["act-nc", "--out", str(out2)] + flags) == 0
        metrics = json.loads((out2 / "metrics.json").read_text())
        assert 0.0 <= metrics["splits"][0]["test_accuracy"] <= 1.0

    def test_nc_without_labels_fails_cleanly(self, tmp_path):
        data = _gen_small_dataset(tmp_path, scenario="random_x_diagonal_a")
        d = data / "random_x_diagonal_a"
        code = main([
            "probe-nc", "--graph", str(d / "edges.tsv"),
            "--features", str(d / "features.mat"),
            "--out", str(tmp_path / "x"),
        ])
        assert code == 2

    def test_missing_input_file_errors(self, tmp_path):
        code = main([
            "probe-lp", "--graph", str(tmp_path / "missing.tsv"),
            "--features", str(tmp_path / "missing.mat"),
            "--out", str(tmp_path / "o"),
        ])
        assert code == 1


class TestEmbeddingCache:
    def test_cache_reused_and_invalidated(self, tmp_path):
        data = _gen_small_dataset(tmp_path, scenario="random_x_diagonal_a")
        d = data / "random_x_diagonal_a"
        out = tmp_path / "c1"
        flags = [
            "probe-lp", "--graph", str(d / "edges.tsv"),
            "--features", str(d / "features.mat"), "--out", str(out),
            "--walk-trials", "30", "--splits", "1", "--bins", "4",
        ]
        assert main(flags + ["--dim", "8"]) == 0
        slots = list((out / "cache").iterdir())
        assert len(slots) == 1
        # same parameters reuse the slot
        assert main(flags + ["--dim", "8"]) == 0
        assert len(list((out / "cache").iterdir())) == 1
        # changing an upstream parameter makes a new slot
        assert main(flags + ["--dim", "6"]) == 0
        assert len(list((out / "cache").iterdir())) == 2


class TestBenchScaling:
    def test_bench_command_writes_linear_fit(self, tmp_path):
        out = tmp_path / "bench"
        code = main([
            "bench-scaling", "--out", str(out), "--factors", "1,2",
            "--base-nodes", "300", "--feat-count", "40", "--dim", "8",
            "--walk-trials", "20",
        ])
        assert code == 0
        assert (out / "timings.csv").exists()
        assert "linear fit" in (out / "summary.txt").read_text()
        header = (out / "timings.csv").read_text().splitlines()[0]
        for column in ("factor", "num_edges", "embed", "compat", "train", "total"):
            assert column in header
