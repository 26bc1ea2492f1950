"""Hypergraph data model, validation, text I/O, and synthetic generators.

File formats (all UTF-8 text):

* ``<prefix>.hg``      line 1 is ``N M b C``; then M lines ``e<k>: v1 v2 ... vj``
  with zero-based node indices.
* ``<prefix>.feat``    N lines of b whitespace-separated decimal reals.
* ``<prefix>.labels``  N lines, one integer class index in ``[0, C)``.

Floats are printed with 17 significant digits so parse(serialize(H)) is
bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable

import numpy as np
import scipy.sparse as sp

from . import rng as rngmod

FLOAT_FMT = "%.17g"


class FormatError(ValueError):
    """Raised when an input file violates the documented formats or invariants."""


@dataclass(frozen=True, eq=False)
class Hypergraph:
    """Immutable attributed hypergraph.

    ``hyperedges`` holds one tuple of distinct node indices per hyperedge;
    ``features`` is the dense N x b feature matrix and ``labels`` the length-N
    class vector with values in ``[0, num_classes)``.
    """

    num_nodes: int
    hyperedges: tuple[tuple[int, ...], ...]
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        if self.num_nodes < 1:
            raise FormatError("hypergraph needs at least one node")
        hyperedges = tuple(tuple(int(v) for v in e) for e in self.hyperedges)
        object.__setattr__(self, "hyperedges", hyperedges)
        for k, e in enumerate(hyperedges):
            if len(e) == 0:
                raise FormatError(f"hyperedge e{k} is empty")
            if len(set(e)) != len(e):
                raise FormatError(f"hyperedge e{k} contains a duplicate node")
            for v in e:
                if not 0 <= v < self.num_nodes:
                    raise FormatError(f"hyperedge e{k} references node {v} outside [0, {self.num_nodes})")
        feats = np.ascontiguousarray(np.asarray(self.features, dtype=np.float64))
        if feats.ndim != 2 or feats.shape[0] != self.num_nodes:
            raise FormatError(
                f"feature matrix has {feats.shape[0] if feats.ndim == 2 else '?'} rows, expected {self.num_nodes}"
            )
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.shape != (self.num_nodes,):
            raise FormatError(f"label vector has length {labels.size}, expected {self.num_nodes}")
        if self.num_classes < 1:
            raise FormatError("num_classes must be positive")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise FormatError(f"labels must lie in [0, {self.num_classes})")
        feats.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        # Membership arrays are rebuilt lazily; cached because expansion touches
        # them every epoch.
        object.__setattr__(self, "_member_arrays", None)

    @property
    def num_hyperedges(self) -> int:
        return len(self.hyperedges)

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def membership_arrays(self) -> tuple[np.ndarray, ...]:
        """Hyperedge membership as cached int64 arrays (one per hyperedge)."""
        cached = object.__getattribute__(self, "_member_arrays")
        if cached is None:
            cached = tuple(np.asarray(e, dtype=np.int64) for e in self.hyperedges)
            object.__setattr__(self, "_member_arrays", cached)
        return cached


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Undirected weighted graph stored as a canonical edge list.

    Edges are kept as parallel arrays ``(u, v, w)`` with ``u < v``, sorted by
    ``(u, v)``, no duplicates, all weights strictly positive.
    """

    num_nodes: int
    edge_u: np.ndarray
    edge_v: np.ndarray
    edge_w: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.edge_u, dtype=np.int64)
        v = np.asarray(self.edge_v, dtype=np.int64)
        w = np.asarray(self.edge_w, dtype=np.float64)
        if not (u.shape == v.shape == w.shape):
            raise ValueError("edge arrays must have equal length")
        if u.size:
            if u.min() < 0 or v.max() >= self.num_nodes:
                raise ValueError("edge endpoint outside node range")
            if np.any(u >= v):
                raise ValueError("edges must satisfy u < v")
            if np.any(w <= 0):
                raise ValueError("edge weights must be positive")
            keys = u * self.num_nodes + v
            if np.any(np.diff(keys) <= 0):
                raise ValueError("edges must be sorted by (u, v) without duplicates")
        for name, arr in (("edge_u", u), ("edge_v", v), ("edge_w", w)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_weight_map(cls, num_nodes: int, weights: dict[tuple[int, int], float]) -> "WeightedGraph":
        """Build a graph from an (u, v) -> weight map; keys need not be ordered."""
        canon: dict[tuple[int, int], float] = {}
        for (a, b), w in weights.items():
            if a == b:
                raise ValueError("self-loops are not representable")
            key = (a, b) if a < b else (b, a)
            canon[key] = canon.get(key, 0.0) + float(w)
        items = sorted(canon.items())
        u = np.fromiter((k[0] for k, _ in items), dtype=np.int64, count=len(items))
        v = np.fromiter((k[1] for k, _ in items), dtype=np.int64, count=len(items))
        w = np.fromiter((val for _, val in items), dtype=np.float64, count=len(items))
        return cls(num_nodes, u, v, w)

    @property
    def num_edges(self) -> int:
        return self.edge_u.size

    def edges(self) -> Iterable[tuple[int, int, float]]:
        return zip(self.edge_u.tolist(), self.edge_v.tolist(), self.edge_w.tolist())

    def adjacency(self) -> dict[int, list[tuple[int, float]]]:
        """Neighbor lists with weights; symmetric view of the edge list."""
        adj: dict[int, list[tuple[int, float]]] = {i: [] for i in range(self.num_nodes)}
        for u, v, w in self.edges():
            adj[u].append((v, w))
            adj[v].append((u, w))
        return adj

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.num_nodes, self.num_nodes))
        dense[self.edge_u, self.edge_v] = self.edge_w
        dense[self.edge_v, self.edge_u] = self.edge_w
        return dense

    def edge_weight_sum(self) -> float:
        return float(self.edge_w.sum())


@dataclass(frozen=True)
class DegreeStats:
    node_degrees: np.ndarray
    hyperedge_degrees: np.ndarray
    avg_node_degree: float
    avg_hyperedge_degree: float
    isolated_nodes: np.ndarray  # indices with d(v) = 0

    @property
    def num_incidences(self) -> int:
        return int(self.hyperedge_degrees.sum())


def degree_stats(H: Hypergraph) -> DegreeStats:
    """Per-node and per-hyperedge degrees plus averages."""
    d_v = np.zeros(H.num_nodes, dtype=np.int64)
    d_e = np.zeros(H.num_hyperedges, dtype=np.int64)
    for k, members in enumerate(H.membership_arrays()):
        d_e[k] = members.size
        d_v[members] += 1
    avg_v = float(d_v.mean()) if H.num_nodes else 0.0
    avg_e = float(d_e.mean()) if H.num_hyperedges else 0.0
    return DegreeStats(d_v, d_e, avg_v, avg_e, np.nonzero(d_v == 0)[0])


def incidence_matrix(H: Hypergraph) -> sp.csr_matrix:
    """Sparse N x M binary incidence matrix (entry 1 iff node is in hyperedge)."""
    rows: list[int] = []
    cols: list[int] = []
    for k, e in enumerate(H.hyperedges):
        rows.extend(e)
        cols.extend([k] * len(e))
    data = np.ones(len(rows), dtype=np.int64)
    return sp.csr_matrix((data, (rows, cols)), shape=(H.num_nodes, H.num_hyperedges))


# ---------------------------------------------------------------------------
# Parsing / serialization
# ---------------------------------------------------------------------------


def parse_hypergraph(hyperedge_stream: IO[str], feature_stream: IO[str], label_stream: IO[str]) -> Hypergraph:
    """Parse the three text streams into a validated :class:`Hypergraph`."""
    header = hyperedge_stream.readline()
    parts = header.split()
    if len(parts) != 4:
        raise FormatError(f"header must be 'N M b C', got {header.strip()!r}")
    try:
        n, m, b, c = (int(p) for p in parts)
    except ValueError as exc:
        raise FormatError(f"non-integer header field in {header.strip()!r}") from exc

    hyperedges: list[list[int]] = []
    for k in range(m):
        line = hyperedge_stream.readline()
        if not line:
            raise FormatError(f"expected {m} hyperedge lines, file ended after {k}")
        name, _, rest = line.partition(":")
        if name.strip() != f"e{k}":
            raise FormatError(f"hyperedge line {k} must start with 'e{k}:', got {name.strip()!r}")
        try:
            members = [int(tok) for tok in rest.split()]
        except ValueError as exc:
            raise FormatError(f"non-integer node index in hyperedge e{k}") from exc
        hyperedges.append(members)
    trailing = hyperedge_stream.readline()
    if trailing.strip():
        raise FormatError(f"unexpected content after {m} hyperedges: {trailing.strip()!r}")

    feat_rows: list[list[float]] = []
    for i, line in enumerate(feature_stream):
        if not line.strip():
            continue
        toks = line.split()
        if len(toks) != b:
            raise FormatError(f"feature row {i} has {len(toks)} values, expected {b}")
        try:
            feat_rows.append([float(t) for t in toks])
        except ValueError as exc:
            raise FormatError(f"non-numeric feature value in row {i}") from exc
    if len(feat_rows) != n:
        raise FormatError(f"feature file has {len(feat_rows)} rows, expected {n}")
    features = np.asarray(feat_rows, dtype=np.float64).reshape(n, b)
    if not np.all(np.isfinite(features)):
        raise FormatError("feature matrix contains non-finite values")

    labels: list[int] = []
    for i, line in enumerate(label_stream):
        if not line.strip():
            continue
        try:
            labels.append(int(line.strip()))
        except ValueError as exc:
            raise FormatError(f"non-integer label in row {i}") from exc
    if len(labels) != n:
        raise FormatError(f"label file has {len(labels)} rows, expected {n}")

    return Hypergraph(n, tuple(tuple(e) for e in hyperedges), features, np.asarray(labels), c)


def serialize_hypergraph(H: Hypergraph, hyperedge_stream: IO[str], feature_stream: IO[str], label_stream: IO[str]) -> None:
    """Inverse of :func:`parse_hypergraph`; floats keep 17 significant digits."""
    hyperedge_stream.write(f"{H.num_nodes} {H.num_hyperedges} {H.num_features} {H.num_classes}\n")
    for k, e in enumerate(H.hyperedges):
        hyperedge_stream.write(f"e{k}: " + " ".join(str(v) for v in e) + "\n")
    for row in H.features:
        feature_stream.write(" ".join(FLOAT_FMT % x for x in row) + "\n")
    for y in H.labels:
        label_stream.write(f"{int(y)}\n")


def load_hypergraph(prefix: str | Path) -> Hypergraph:
    """Load ``<prefix>.hg`` / ``.feat`` / ``.labels``."""
    base = str(prefix)
    with open(base + ".hg", encoding="utf-8") as hg, open(base + ".feat", encoding="utf-8") as feat, open(
        base + ".labels", encoding="utf-8"
    ) as lab:
        return parse_hypergraph(hg, feat, lab)


def save_hypergraph(H: Hypergraph, prefix: str | Path) -> None:
    base = str(prefix)
    Path(base).parent.mkdir(parents=True, exist_ok=True)
    with open(base + ".hg", "w", encoding="utf-8") as hg, open(base + ".feat", "w", encoding="utf-8") as feat, open(
        base + ".labels", "w", encoding="utf-8"
    ) as lab:
        serialize_hypergraph(H, hg, feat, lab)


def write_edge_tsv(graph: WeightedGraph, stream: IO[str]) -> None:
    """Edge-list TSV: ``u<TAB>v<TAB>w`` with u < v, 17 significant digits."""
    for u, v, w in graph.edges():
        stream.write(f"{u}\t{v}\t" + FLOAT_FMT % w + "\n")


# ---------------------------------------------------------------------------
# Synthetic generation
# ---------------------------------------------------------------------------

FEATURE_SCHEMES = ("label-gaussian", "random-normal", "constant")


def synth_hypergraph(
    n_nodes: int,
    n_hyperedges: int,
    size_range: tuple[int, int],
    n_classes: int,
    feature_scheme: str = "label-gaussian",
    noise: float = 0.6,
    seed: int = 0,
    n_features: int = 16,
    homophily: float = 0.9,
) -> Hypergraph:
    """Generate a random attributed hypergraph, deterministic per seed.

    Labels are a balanced random assignment.  With probability ``homophily`` a
    hyperedge samples its members from a single class (falling back to a global
    draw when the class is too small), otherwise from all nodes.  The
    ``label-gaussian`` scheme draws one unit-normal mean per class and sets
    ``x_i = mu_{y_i} + noise * eps_i`` with fresh unit-normal noise.
    """
    smin, smax = size_range
    if smin < 1:
        raise ValueError("size_range minimum must be >= 1")
    if smax > n_nodes:
        raise ValueError(f"size_range maximum {smax} exceeds node count {n_nodes}")
    if smax < smin:
        raise ValueError("size_range maximum below minimum")
    if noise < 0:
        raise ValueError("noise must be nonnegative")
    if feature_scheme not in FEATURE_SCHEMES:
        raise ValueError(f"unknown feature scheme {feature_scheme!r}")

    label_rng = rngmod.substream(seed, rngmod.SYNTH_LABELS)
    labels = label_rng.permutation(np.arange(n_nodes, dtype=np.int64) % n_classes)
    class_nodes = [np.nonzero(labels == c)[0] for c in range(n_classes)]

    struct_rng = rngmod.substream(seed, rngmod.SYNTH_STRUCT)
    hyperedges: list[tuple[int, ...]] = []
    for _ in range(n_hyperedges):
        size = int(struct_rng.integers(smin, smax + 1))
        pool = None
        if struct_rng.random() < homophily:
            cls = int(struct_rng.integers(n_classes))
            if class_nodes[cls].size >= size:
                pool = class_nodes[cls]
        if pool is None:
            pool = np.arange(n_nodes)
        members = struct_rng.choice(pool, size=size, replace=False)
        hyperedges.append(tuple(int(v) for v in np.sort(members)))

    if feature_scheme == "label-gaussian":
        means = rngmod.substream(seed, rngmod.SYNTH_MEANS).standard_normal((n_classes, n_features))
        eps = rngmod.substream(seed, rngmod.SYNTH_NOISE).standard_normal((n_nodes, n_features))
        features = means[labels] + noise * eps
    elif feature_scheme == "random-normal":
        features = rngmod.substream(seed, rngmod.SYNTH_NOISE).standard_normal((n_nodes, n_features))
    else:  # constant
        features = np.ones((n_nodes, n_features))

    return Hypergraph(n_nodes, tuple(hyperedges), features, labels, n_classes)


def class_means(n_classes: int, n_features: int, seed: int) -> np.ndarray:
    """The per-class means used by the label-gaussian scheme for this seed."""
    return rngmod.substream(seed, rngmod.SYNTH_MEANS).standard_normal((n_classes, n_features))
