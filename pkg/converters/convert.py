#!/usr/bin/env python3
"""Convert published hypergraph benchmark releases into the engine's text formats.

Usage:
    convert.py <dataset> <source_dir> <out_prefix> [options]

Supported source layouts:

* ``pickle`` (coauthorship / cocitation releases): the source directory holds
  ``hypergraph.pickle`` (dict mapping hyperedge name -> list of node indices),
  ``features.pickle`` (dense array or scipy sparse matrix), and
  ``labels.pickle`` (list of integer classes).
* ``text`` (committee-membership releases): ``hyperedges-<name>.txt`` with one
  comma-separated list of 1-based node ids per line and
  ``node-labels-<name>.txt`` with one 1-based label per line.  These releases
  carry no node features; label-dependent Gaussian features are synthesized
  (per-class unit-normal mean plus ``--noise`` times unit-normal noise, seeded).

Outputs follow the engine's neutral formats: ``<out>.hg`` (header ``N M b C``
then ``e<k>: ...`` lines), ``<out>.feat`` (N rows of b reals, 17 significant
digits), ``<out>.labels`` (N integers), plus ``<out>.manifest.json`` recording
source checksums, emitted statistics, output checksums, and whether the stats
match the bundled expectations table.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import pickle
import sys
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.17g"
EXPECTATIONS_FILE = Path(__file__).resolve().parent / "expectations.json"

DATASETS = {
    "cora": {"layout": "pickle"},
    "citeseer": {"layout": "pickle"},
    "pubmed": {"layout": "pickle"},
    "cora-ca": {"layout": "pickle"},
    "dblp": {"layout": "pickle"},
    "senate": {"layout": "text", "stem": "senate-committees"},
    "house": {"layout": "text", "stem": "house-committees"},
}


class ConversionError(ValueError):
    pass


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def load_expectations(path: Path | None) -> dict:
    target = path or EXPECTATIONS_FILE
    with open(target, encoding="utf-8") as handle:
        return json.load(handle)


# ---------------------------------------------------------------------------
# Source readers
# ---------------------------------------------------------------------------


def _dedupe_sorted(members) -> list[int]:
    return sorted({int(v) for v in members})


def read_pickle_layout(source_dir: Path):
    paths = {name: source_dir / f"{name}.pickle" for name in ("hypergraph", "features", "labels")}
    for name, p in paths.items():
        if not p.is_file():
            raise ConversionError(f"missing source file {p}")
    with open(paths["hypergraph"], "rb") as fh:
        raw_edges = pickle.load(fh)
    with open(paths["features"], "rb") as fh:
        raw_features = pickle.load(fh)
    with open(paths["labels"], "rb") as fh:
        raw_labels = pickle.load(fh)

    if hasattr(raw_features, "toarray"):
        features = np.asarray(raw_features.toarray(), dtype=np.float64)
    else:
        features = np.asarray(raw_features, dtype=np.float64)
    labels = np.asarray(raw_labels)
    if labels.ndim == 2:  # one-hot
        labels = labels.argmax(axis=1)
    labels = labels.astype(np.int64)

    if isinstance(raw_edges, dict):
        hyperedges = [_dedupe_sorted(members) for _, members in raw_edges.items()]
    else:
        hyperedges = [_dedupe_sorted(members) for members in raw_edges]
    return hyperedges, features, labels, list(paths.values())


def read_text_layout(source_dir: Path, stem: str):
    he_path = source_dir / f"hyperedges-{stem}.txt"
    label_path = source_dir / f"node-labels-{stem}.txt"
    for p in (he_path, label_path):
        if not p.is_file():
            raise ConversionError(f"missing source file {p}")
    hyperedges = []
    for line in he_path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        hyperedges.append(_dedupe_sorted(int(tok) - 1 for tok in line.split(",")))
    labels = np.asarray(
        [int(line.strip()) for line in label_path.read_text(encoding="utf-8").splitlines() if line.strip()],
        dtype=np.int64,
    )
    return hyperedges, labels, [he_path, label_path]


def remap_labels(labels: np.ndarray) -> np.ndarray:
    """Map arbitrary integer labels onto dense 0-based classes."""
    uniq = np.unique(labels)
    lookup = {int(v): i for i, v in enumerate(uniq.tolist())}
    return np.asarray([lookup[int(v)] for v in labels], dtype=np.int64)


def synthesize_features(labels: np.ndarray, dim: int, noise: float, seed: int) -> np.ndarray:
    """Label-dependent Gaussian features: x_i = mu_{y_i} + noise * eps_i."""
    n_classes = int(labels.max()) + 1
    means_rng = np.random.default_rng(np.random.SeedSequence((seed, 0)))
    noise_rng = np.random.default_rng(np.random.SeedSequence((seed, 1)))
    means = means_rng.standard_normal((n_classes, dim))
    return means[labels] + noise * noise_rng.standard_normal((labels.size, dim))


# ---------------------------------------------------------------------------
# Writers (the engine's neutral text formats)
# ---------------------------------------------------------------------------


def write_outputs(out_prefix: str, hyperedges, features: np.ndarray, labels: np.ndarray, num_classes: int):
    n = features.shape[0]
    base = Path(out_prefix)
    base.parent.mkdir(parents=True, exist_ok=True)

    for k, members in enumerate(hyperedges):
        if not members:
            raise ConversionError(f"hyperedge {k} is empty after deduplication")
        if members[-1] >= n or members[0] < 0:
            raise ConversionError(f"hyperedge {k} references a node outside [0, {n})")

    hg_lines = [f"{n} {len(hyperedges)} {features.shape[1]} {num_classes}"]
    hg_lines += [f"e{k}: " + " ".join(str(v) for v in members) for k, members in enumerate(hyperedges)]
    (base.parent / (base.name + ".hg")).write_text("\n".join(hg_lines) + "\n", encoding="utf-8")

    feat_lines = (" ".join(FLOAT_FMT % x for x in row) for row in features)
    (base.parent / (base.name + ".feat")).write_text("\n".join(feat_lines) + "\n", encoding="utf-8")

    (base.parent / (base.name + ".labels")).write_text(
        "\n".join(str(int(y)) for y in labels) + "\n", encoding="utf-8"
    )
    return [base.parent / (base.name + ext) for ext in (".hg", ".feat", ".labels")]


# ---------------------------------------------------------------------------
# Conversion
# ---------------------------------------------------------------------------


def convert(
    dataset: str,
    source_dir: str | Path,
    out_prefix: str,
    expectations: dict | None = None,
    noise: float = 0.6,
    feature_dim: int = 100,
    seed: int = 0,
) -> dict:
    """Convert one dataset; returns (and writes) the conversion manifest."""
    if dataset not in DATASETS:
        raise ConversionError(f"unknown dataset {dataset!r}; known: {', '.join(sorted(DATASETS))}")
    spec = DATASETS[dataset]
    source_dir = Path(source_dir)
    if not source_dir.is_dir():
        raise ConversionError(f"source directory {source_dir} does not exist")
    expectations = expectations if expectations is not None else load_expectations(None)
    expected = expectations.get(dataset)

    if spec["layout"] == "pickle":
        hyperedges, features, labels, sources = read_pickle_layout(source_dir)
        labels = remap_labels(labels)
    else:
        hyperedges, raw_labels, sources = read_text_layout(source_dir, spec["stem"])
        labels = remap_labels(raw_labels)
        features = synthesize_features(labels, feature_dim, noise, seed)

    source_checksums = {p.name: sha256_file(p) for p in sources}
    if expected and expected.get("sha256"):
        for name, want in expected["sha256"].items():
            got = source_checksums.get(name)
            if got != want:
                raise ConversionError(f"checksum mismatch for {name}: expected {want}, got {got}")

    n = features.shape[0]
    if labels.size != n:
        raise ConversionError(f"label count {labels.size} does not match feature rows {n}")
    num_classes = int(labels.max()) + 1
    incidences = sum(len(e) for e in hyperedges)
    stats = {
        "num_nodes": n,
        "num_hyperedges": len(hyperedges),
        "num_features": int(features.shape[1]),
        "num_classes": num_classes,
        "avg_hyperedge_degree": round(incidences / len(hyperedges), 6) if hyperedges else 0.0,
        "avg_node_degree": round(incidences / n, 6),
    }

    matches = None
    if expected:
        for key in ("num_nodes", "num_hyperedges", "num_features", "num_classes"):
            if stats[key] != expected[key]:
                raise ConversionError(f"{dataset}: {key} is {stats[key]}, expected {expected[key]}")
        for key in ("avg_hyperedge_degree", "avg_node_degree"):
            if abs(stats[key] - expected[key]) > 0.01:
                raise ConversionError(f"{dataset}: {key} is {stats[key]:.4f}, expected {expected[key]}")
        matches = True

    outputs = write_outputs(out_prefix, hyperedges, features, labels, num_classes)
    manifest = {
        "dataset": dataset,
        "source_checksums": source_checksums,
        **stats,
        "output_checksums": {p.name: sha256_file(p) for p in outputs},
        "expected": expected,
        "matches_expected": matches,
    }
    manifest_path = Path(out_prefix + ".manifest.json")
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("dataset", help="dataset name, e.g. cora, citeseer, cora-ca, senate, house")
    parser.add_argument("source_dir", help="directory holding the published release files")
    parser.add_argument("out_prefix", help="output path prefix for .hg/.feat/.labels")
    parser.add_argument("--expectations", default=None, help="override the bundled expectations table")
    parser.add_argument("--noise", type=float, default=0.6, help="feature noise for synthesized features")
    parser.add_argument("--feature-dim", type=int, default=100, help="dimension of synthesized features")
    parser.add_argument("--seed", type=int, default=0, help="seed for synthesized features")
    args = parser.parse_args(argv)
    try:
        expectations = load_expectations(Path(args.expectations)) if args.expectations else None
        manifest = convert(
            args.dataset,
            args.source_dir,
            args.out_prefix,
            expectations=expectations,
            noise=args.noise,
            feature_dim=args.feature_dim,
            seed=args.seed,
        )
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"{args.dataset}: N={manifest['num_nodes']} M={manifest['num_hyperedges']} "
        f"b={manifest['num_features']} C={manifest['num_classes']} "
        f"(matches expectations: {manifest['matches_expected']})"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
