"""Converter tests on synthetic fixtures in both source layouts."""

import json
import pickle
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

import convert as conv

SOURCES_DIR = Path(__file__).resolve().parent.parent / "sources"


@pytest.fixture()
def pickle_source(tmp_path):
    src = tmp_path / "cora-src"
    src.mkdir()
    hyperedges = {"d1": [0, 1, 2], "d2": [1, 3], "d3": [3, 3, 0]}  # d3 carries a duplicate
    features = np.arange(12.0).reshape(4, 3) / 7.0
    labels = [2, 5, 2, 5]  # non-dense labels, remapped to {0, 1}
    with open(src / "hypergraph.pickle", "wb") as fh:
        pickle.dump(hyperedges, fh)
    with open(src / "features.pickle", "wb") as fh:
        pickle.dump(features, fh)
    with open(src / "labels.pickle", "wb") as fh:
        pickle.dump(labels, fh)
    return src


PICKLE_EXPECT = {
    "cora": {
        "num_nodes": 4,
        "num_hyperedges": 3,
        "num_features": 3,
        "num_classes": 2,
        "avg_hyperedge_degree": 7 / 3,
        "avg_node_degree": 7 / 4,
        "sha256": None,
    }
}


@pytest.fixture()
def text_source(tmp_path):
    src = tmp_path / "senate-src"
    src.mkdir()
    (src / "hyperedges-senate-committees.txt").write_text("1,2,3\n2,4\n1\n", encoding="utf-8")
    (src / "node-labels-senate-committees.txt").write_text("1\n2\n1\n2\n", encoding="utf-8")
    return src


TEXT_EXPECT = {
    "senate": {
        "num_nodes": 4,
        "num_hyperedges": 3,
        "num_features": 5,
        "num_classes": 2,
        "avg_hyperedge_degree": 2.0,
        "avg_node_degree": 1.5,
        "sha256": None,
    }
}


class TestPickleLayout:
    def test_convert_and_manifest(self, pickle_source, tmp_path):
        out = tmp_path / "out" / "cora"
        manifest = conv.convert("cora", pickle_source, str(out), expectations=PICKLE_EXPECT)
        assert manifest["num_nodes"] == 4
        assert manifest["num_hyperedges"] == 3
        assert manifest["num_features"] == 3
        assert manifest["num_classes"] == 2
        assert manifest["matches_expected"] is True
        assert set(manifest["source_checksums"]) == {"hypergraph.pickle", "features.pickle", "labels.pickle"}
        saved = json.loads((tmp_path / "out" / "cora.manifest.json").read_text())
        assert saved == manifest

        hg = (tmp_path / "out" / "cora.hg").read_text().splitlines()
        assert hg[0] == "4 3 3 2"
        assert hg[3] == "e2: 0 3"  # duplicate node collapsed, sorted
        labels = (tmp_path / "out" / "cora.labels").read_text().split()
        assert labels == ["0", "1", "0", "1"]

    def test_sparse_features_supported(self, pickle_source, tmp_path):
        import scipy.sparse as sp

        dense = np.arange(12.0).reshape(4, 3)
        with open(pickle_source / "features.pickle", "wb") as fh:
            pickle.dump(sp.csr_matrix(dense), fh)
        out = tmp_path / "sparse" / "cora"
        conv.convert("cora", pickle_source, str(out), expectations=PICKLE_EXPECT)
        rows = (tmp_path / "sparse" / "cora.feat").read_text().splitlines()
        assert [float(x) for x in rows[2].split()] == [6.0, 7.0, 8.0]

    def test_loads_through_engine_cli(self, pickle_source, tmp_path):
        out = tmp_path / "eng" / "cora"
        conv.convert("cora", pickle_source, str(out), expectations=PICKLE_EXPECT)
        edges = tmp_path / "eng" / "edges.tsv"
        result = subprocess.run(
            [sys.executable, "-m", "hyperx.cli", "expand", "--method", "ce",
             "--input", str(out), "--seed", "1", "--out", str(edges)],
            capture_output=True, text=True,
        )
        assert result.returncode == 0, result.stderr
        assert edges.read_text().splitlines()  # non-empty expansion

    def test_deterministic_outputs(self, pickle_source, tmp_path):
        a, b = tmp_path / "a" / "cora", tmp_path / "b" / "cora"
        ma = conv.convert("cora", pickle_source, str(a), expectations=PICKLE_EXPECT)
        mb = conv.convert("cora", pickle_source, str(b), expectations=PICKLE_EXPECT)
        assert ma["output_checksums"] == mb["output_checksums"]


class TestTextLayout:
    def test_convert_with_synthesized_features(self, text_source, tmp_path):
        out = tmp_path / "senate"
        manifest = conv.convert(
            "senate", text_source, str(out), expectations=TEXT_EXPECT, noise=0.6, feature_dim=5, seed=3
        )
        assert manifest["num_features"] == 5
        assert manifest["num_classes"] == 2
        assert manifest["matches_expected"] is True
        feats = np.loadtxt(tmp_path / "senate.feat")
        assert feats.shape == (4, 5)
        # label-dependent means: same-class rows are closer to each other on average
        labels = np.loadtxt(tmp_path / "senate.labels", dtype=int)
        assert labels.tolist() == [0, 1, 0, 1]

    def test_synthesized_features_seeded(self, text_source, tmp_path):
        m1 = conv.convert("senate", text_source, str(tmp_path / "s1"), expectations=TEXT_EXPECT, feature_dim=5, seed=3)
        m2 = conv.convert("senate", text_source, str(tmp_path / "s2"), expectations=TEXT_EXPECT, feature_dim=5, seed=3)
        conv.convert("senate", text_source, str(tmp_path / "s3"), expectations=TEXT_EXPECT, feature_dim=5, seed=4)

        def by_ext(manifest):
            return {Path(k).suffix: v for k, v in manifest["output_checksums"].items()}

        assert by_ext(m1) == by_ext(m2)
        f1 = (tmp_path / "s1.feat").read_bytes()
        f3 = (tmp_path / "s3.feat").read_bytes()
        assert f1 != f3

    def test_one_based_indices_shifted(self, text_source, tmp_path):
        conv.convert("senate", text_source, str(tmp_path / "sen"), expectations=TEXT_EXPECT, feature_dim=5)
        hg = (tmp_path / "sen.hg").read_text().splitlines()
        assert hg[1] == "e0: 0 1 2"
        assert hg[3] == "e2: 0"  # singleton retained


class TestErrors:
    def test_unknown_dataset(self, tmp_path):
        with pytest.raises(conv.ConversionError, match="unknown dataset"):
            conv.convert("mystery", tmp_path, str(tmp_path / "x"))

    def test_missing_source_file(self, tmp_path):
        src = tmp_path / "empty"
        src.mkdir()
        with pytest.raises(conv.ConversionError, match="missing source"):
            conv.convert("cora", src, str(tmp_path / "x"), expectations=PICKLE_EXPECT)

    def test_stats_mismatch_rejected(self, pickle_source, tmp_path):
        wrong = {PICKLE_EXPECT_KEY: dict(PICKLE_EXPECT["cora"], num_nodes=99) for PICKLE_EXPECT_KEY in ["cora"]}
        with pytest.raises(conv.ConversionError, match="num_nodes"):
            conv.convert("cora", pickle_source, str(tmp_path / "x"), expectations=wrong)

    def test_average_degree_tolerance(self, pickle_source, tmp_path):
        wrong = {"cora": dict(PICKLE_EXPECT["cora"], avg_node_degree=1.9)}
        with pytest.raises(conv.ConversionError, match="avg_node_degree"):
            conv.convert("cora", pickle_source, str(tmp_path / "x"), expectations=wrong)

    def test_checksum_mismatch_rejected(self, pickle_source, tmp_path):
        pinned = {"cora": dict(PICKLE_EXPECT["cora"], sha256={"hypergraph.pickle": "0" * 64})}
        with pytest.raises(conv.ConversionError, match="checksum mismatch"):
            conv.convert("cora", pickle_source, str(tmp_path / "x"), expectations=pinned)

    def test_cli_error_exit_code(self, tmp_path):
        assert conv.main(["mystery", str(tmp_path), str(tmp_path / "x")]) == 1


def test_cli_happy_path(pickle_source, tmp_path, capsys):
    expect_file = tmp_path / "expect.json"
    expect_file.write_text(json.dumps(PICKLE_EXPECT), encoding="utf-8")
    code = conv.main(
        ["cora", str(pickle_source), str(tmp_path / "cli" / "cora"), "--expectations", str(expect_file)]
    )
    assert code == 0
    assert "N=4" in capsys.readouterr().out
    assert (tmp_path / "cli" / "cora.manifest.json").exists()


REAL_DATASETS = ["cora", "citeseer", "cora-ca", "senate", "house"]


@pytest.mark.parametrize("name", REAL_DATASETS)
def test_real_release_matches_expectations(name, tmp_path):
    src = SOURCES_DIR / name
    if not src.is_dir():
        pytest.skip(f"release archive for {name} not present under converters/sources/")
    manifest = conv.convert(name, src, str(tmp_path / name))
    assert manifest["matches_expected"] is True
