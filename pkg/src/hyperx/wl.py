"""Color refinement for graphs (1-WL) and hypergraphs (1-GWL), plus a
randomized harness checking that refinement commutes with the structural
adaptive expansion on isomorphic inputs.

Hashing is replaced by canonical compression: a shared dictionary maps each
distinct signature to a fresh integer, which preserves equality semantics
while keeping colors comparable across the two inputs of a trial.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Any, Hashable, Sequence

import numpy as np

from . import rng as rngmod
from .ade import HyperedgeSelection, select_all, selection_graph
from .core import Hypergraph, WeightedGraph


class ColorDictionary:
    """Injective signature -> integer compression shared across refinements."""

    def __init__(self):
        self._table: dict[Hashable, int] = {}

    def compress(self, signature: Hashable) -> int:
        color = self._table.get(signature)
        if color is None:
            color = len(self._table)
            self._table[signature] = color
        return color

    def __len__(self) -> int:
        return len(self._table)


@dataclass
class ColorState:
    """Refinement history: one color list per iteration, index 0 is the start."""

    node_history: list[list[int]]
    hyperedge_history: list[list[int]] | None
    dictionary: ColorDictionary

    @property
    def iterations(self) -> int:
        return len(self.node_history) - 1

    def final_colors(self) -> list[int]:
        return self.node_history[-1]


def _same_partition(a: Sequence[int], b: Sequence[int]) -> bool:
    fwd: dict[int, int] = {}
    back: dict[int, int] = {}
    for x, y in zip(a, b):
        if fwd.setdefault(x, y) != y or back.setdefault(y, x) != x:
            return False
    return True


def wl_refine(
    graph: WeightedGraph,
    iterations: int,
    dictionary: ColorDictionary | None = None,
    early_stop: bool = True,
) -> ColorState:
    """1-WL on the unweighted view of the graph.

    A node's next color compresses the multiset of (own color, neighbor color)
    pairs.  Stops once the induced partition is stable when ``early_stop``.
    """
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    if dictionary is None:
        dictionary = ColorDictionary()
    neighbors: list[list[int]] = [[] for _ in range(graph.num_nodes)]
    for u, v, _ in graph.edges():
        neighbors[u].append(v)
        neighbors[v].append(u)

    colors = [dictionary.compress(("wl-init",))] * graph.num_nodes
    history = [colors]
    for _ in range(iterations):
        new = [
            dictionary.compress(("wl", tuple(sorted((colors[i], colors[j]) for j in neighbors[i]))))
            for i in range(graph.num_nodes)
        ]
        if early_stop and _same_partition(colors, new):
            break
        history.append(new)
        colors = new
    return ColorState(history, None, dictionary)


def gwl_refine(
    H: Hypergraph,
    iterations: int,
    dictionary: ColorDictionary | None = None,
    early_stop: bool = True,
) -> ColorState:
    """1-GWL on the hypergraph structure (features ignored).

    Every node starts with one shared color, every hyperedge with another.
    Each round recomputes hyperedge colors from member multisets, then node
    colors from multisets of (own color, incident hyperedge color) pairs.
    """
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    if dictionary is None:
        dictionary = ColorDictionary()
    incident: list[list[int]] = [[] for _ in range(H.num_nodes)]
    for k, e in enumerate(H.hyperedges):
        for v in e:
            incident[v].append(k)

    node_colors = [dictionary.compress(("gwl-node-init",))] * H.num_nodes
    he_colors = [dictionary.compress(("gwl-he-init",))] * H.num_hyperedges
    node_history = [node_colors]
    he_history = [he_colors]
    for _ in range(iterations):
        new_he = [
            dictionary.compress(("gwl-he", tuple(sorted(node_colors[v] for v in e)))) for e in H.hyperedges
        ]
        new_node = [
            dictionary.compress(
                ("gwl-node", tuple(sorted((node_colors[v], new_he[k]) for k in incident[v])))
            )
            for v in range(H.num_nodes)
        ]
        if early_stop and _same_partition(node_colors, new_node) and _same_partition(he_colors, new_he):
            break
        node_history.append(new_node)
        he_history.append(new_he)
        node_colors = new_node
        he_colors = new_he
    return ColorState(node_history, he_history, dictionary)


def distinguish(a: ColorState, b: ColorState) -> bool:
    """True iff the node-color multisets differ at any recorded iteration."""
    if len(a.node_history) != len(b.node_history):
        raise ValueError("refinements ran for different iteration counts")
    if a.dictionary is not b.dictionary:
        raise ValueError("color states must share one compression dictionary")
    return any(Counter(x) != Counter(y) for x, y in zip(a.node_history, b.node_history))


# ---------------------------------------------------------------------------
# Expressiveness harness
# ---------------------------------------------------------------------------


def permute_hypergraph(
    H: Hypergraph, node_perm: np.ndarray, hyperedge_perm: np.ndarray | None = None
) -> Hypergraph:
    """Isomorphic copy: node v becomes node_perm[v], hyperedge k moves to slot hyperedge_perm[k]."""
    p = np.asarray(node_perm, dtype=np.int64)
    if sorted(p.tolist()) != list(range(H.num_nodes)):
        raise ValueError("node_perm is not a permutation")
    q = np.arange(H.num_hyperedges) if hyperedge_perm is None else np.asarray(hyperedge_perm, dtype=np.int64)
    hyperedges: list[tuple[int, ...]] = [()] * H.num_hyperedges
    for k, e in enumerate(H.hyperedges):
        hyperedges[int(q[k])] = tuple(int(p[v]) for v in e)
    features = np.empty_like(H.features)
    features[p] = H.features
    labels = np.empty_like(H.labels)
    labels[p] = H.labels
    return Hypergraph(H.num_nodes, tuple(hyperedges), features, labels, H.num_classes)


def _map_selection(sel: HyperedgeSelection, p: np.ndarray, new_index: int) -> HyperedgeSelection:
    a, b = int(p[sel.v_minus]), int(p[sel.v_plus])
    lo, hi = (a, b) if a <= b else (b, a)
    return HyperedgeSelection(new_index, lo, hi, tuple(int(p[m]) for m in sel.mediators))


def structural_selections(H: Hypergraph, seed: int) -> list[HyperedgeSelection]:
    """Selections under uniform features: every pair ties, choices come from substreams."""
    return select_all(H, np.zeros(H.num_nodes), seed, epoch=0)


@dataclass
class TrialReport:
    num_nodes: int
    num_hyperedges: int
    coupled: bool
    isomorphic_inputs: bool
    gwl_distinguished: bool
    wl_distinguished: bool
    violation: bool  # GWL could not distinguish but WL separated the expansions

    def to_dict(self) -> dict[str, Any]:
        return {
            "num_nodes": self.num_nodes,
            "num_hyperedges": self.num_hyperedges,
            "coupled": self.coupled,
            "isomorphic_inputs": self.isomorphic_inputs,
            "gwl_distinguished": self.gwl_distinguished,
            "wl_distinguished": self.wl_distinguished,
            "violation": self.violation,
        }


def _compare(H1: Hypergraph, H2: Hypergraph, sel1, sel2, iterations: int) -> tuple[bool, bool]:
    g1 = selection_graph(sel1, H1.num_nodes)
    g2 = selection_graph(sel2, H2.num_nodes)
    gwl_dict = ColorDictionary()
    gwl_a = gwl_refine(H1, iterations, gwl_dict, early_stop=False)
    gwl_b = gwl_refine(H2, iterations, gwl_dict, early_stop=False)
    wl_dict = ColorDictionary()
    wl_a = wl_refine(g1, iterations, wl_dict, early_stop=False)
    wl_b = wl_refine(g2, iterations, wl_dict, early_stop=False)
    return distinguish(gwl_a, gwl_b), distinguish(wl_a, wl_b)


def expressiveness_trial(
    H: Hypergraph,
    node_perm: np.ndarray,
    iterations: int,
    seed: int,
    hyperedge_perm: np.ndarray | None = None,
) -> TrialReport:
    """Coupled isomorphic trial.

    The permuted copy reuses the base hypergraph's tie-break draws, mapped
    through the permutation, so both expansions realize the same node
    bijection.  If GWL cannot separate the hypergraphs (always, here), WL must
    not separate the expanded graphs; a violation is an implementation bug.
    """
    p = np.asarray(node_perm, dtype=np.int64)
    q = np.arange(H.num_hyperedges) if hyperedge_perm is None else np.asarray(hyperedge_perm, dtype=np.int64)
    H2 = permute_hypergraph(H, p, q)

    sel1 = structural_selections(H, seed)
    sel2: list[HyperedgeSelection | None] = [None] * H.num_hyperedges
    for k, sel in enumerate(sel1):
        sel2[int(q[k])] = _map_selection(sel, p, int(q[k]))

    gwl_dist, wl_dist = _compare(H, H2, sel1, sel2, iterations)
    return TrialReport(
        num_nodes=H.num_nodes,
        num_hyperedges=H.num_hyperedges,
        coupled=True,
        isomorphic_inputs=True,
        gwl_distinguished=gwl_dist,
        wl_distinguished=wl_dist,
        violation=(not gwl_dist) and wl_dist,
    )


def perturbed_trial(H: Hypergraph, iterations: int, seed: int) -> TrialReport:
    """Informational trial on a rewired (generally non-isomorphic) copy.

    Tie-breaking is uncoupled here, so no assertion is attached to the result;
    it only records which test separated the pair.
    """
    rng = rngmod.substream(seed, rngmod.WL_TRIAL, 0)
    k = int(rng.integers(H.num_hyperedges))
    size = len(H.hyperedges[k])
    hyperedges = list(H.hyperedges)
    hyperedges[k] = tuple(int(v) for v in np.sort(rng.choice(H.num_nodes, size=size, replace=False)))
    H2 = Hypergraph(H.num_nodes, tuple(hyperedges), H.features, H.labels, H.num_classes)

    sel1 = structural_selections(H, rngmod.derive_seed(seed, 1))
    sel2 = structural_selections(H2, rngmod.derive_seed(seed, 2))
    gwl_dist, wl_dist = _compare(H, H2, sel1, sel2, iterations)
    return TrialReport(
        num_nodes=H.num_nodes,
        num_hyperedges=H.num_hyperedges,
        coupled=False,
        isomorphic_inputs=False,
        gwl_distinguished=gwl_dist,
        wl_distinguished=wl_dist,
        violation=(not gwl_dist) and wl_dist,
    )


def random_structure(max_nodes: int, max_hyperedges: int, rng: np.random.Generator) -> Hypergraph:
    """Structure-only hypergraph (constant features) for harness trials."""
    n = int(rng.integers(4, max_nodes + 1))
    m = int(rng.integers(1, max_hyperedges + 1))
    hyperedges = []
    for _ in range(m):
        size = int(rng.integers(1, min(6, n) + 1))
        members = np.sort(rng.choice(n, size=size, replace=False))
        hyperedges.append(tuple(int(v) for v in members))
    features = np.ones((n, 1))
    labels = np.zeros(n, dtype=np.int64)
    return Hypergraph(n, tuple(hyperedges), features, labels, 1)


def run_trials(
    n_trials: int,
    max_nodes: int,
    max_hyperedges: int,
    iterations: int,
    seed: int,
) -> list[TrialReport]:
    """Coupled and perturbed trials, interleaved per base hypergraph."""
    from .parallel import parallel_map

    def one(i: int) -> list[TrialReport]:
        rng = rngmod.substream(seed, rngmod.WL_TRIAL, i)
        H = random_structure(max_nodes, max_hyperedges, rng)
        node_perm = rng.permutation(H.num_nodes)
        he_perm = rng.permutation(H.num_hyperedges)
        coupled = expressiveness_trial(H, node_perm, iterations, rngmod.derive_seed(seed, i, 1), he_perm)
        perturbed = perturbed_trial(H, iterations, rngmod.derive_seed(seed, i, 2))
        return [coupled, perturbed]

    nested = parallel_map(one, list(range(n_trials)))
    return [report for pair in nested for report in pair]
