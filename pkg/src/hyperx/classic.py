"""Classic hypergraph expansions: clique, star, and line.

These are the fixed-weight baselines; the clique expansion doubles as the
structural oracle for the adaptive expansion on 3-uniform inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Hypergraph, WeightedGraph

WEIGHT_RULES = ("unit", "inverse-size")


@dataclass(frozen=True)
class BipartiteGraph:
    """Star expansion output: original nodes on the left, one node per hyperedge on the right."""

    num_left: int
    num_right: int
    edges: tuple[tuple[int, int], ...]  # (node, hyperedge) incidence pairs

    def __post_init__(self):
        for v, e in self.edges:
            if not (0 <= v < self.num_left and 0 <= e < self.num_right):
                raise ValueError(f"incidence pair ({v}, {e}) out of range")

    @property
    def num_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class LineGraph:
    """Line expansion output: one vertex per (node, hyperedge) incidence pair.

    Two vertices are adjacent iff they share the node or the hyperedge.
    """

    vertices: tuple[tuple[int, int], ...]  # (node, hyperedge) pairs, hyperedge-major order
    edges: tuple[tuple[int, int], ...]  # index pairs (p, q) with p < q

    def __post_init__(self):
        n = len(self.vertices)
        for p, q in self.edges:
            if not (0 <= p < q < n):
                raise ValueError(f"line-graph edge ({p}, {q}) invalid")

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(len(self.vertices), dtype=np.int64)
        for p, q in self.edges:
            deg[p] += 1
            deg[q] += 1
        return deg


def clique_expand(H: Hypergraph, weight_rule: str = "unit") -> WeightedGraph:
    """Connect every node pair co-occurring in a hyperedge.

    Weights sum across hyperedges: 1 per co-occurrence under ``unit``,
    ``1/|e|`` under ``inverse-size``.
    """
    if weight_rule not in WEIGHT_RULES:
        raise ValueError(f"unknown weight rule {weight_rule!r}")
    acc: dict[tuple[int, int], float] = {}
    for e in H.hyperedges:
        w = 1.0 if weight_rule == "unit" else 1.0 / len(e)
        members = sorted(e)
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                key = (members[a], members[b])
                acc[key] = acc.get(key, 0.0) + w
    return WeightedGraph.from_weight_map(H.num_nodes, acc)


def star_expand(H: Hypergraph) -> BipartiteGraph:
    """One right-side node per hyperedge, joined to all of its members."""
    edges = tuple((int(v), k) for k, e in enumerate(H.hyperedges) for v in e)
    return BipartiteGraph(H.num_nodes, H.num_hyperedges, edges)


def hypergraph_from_star(bg: BipartiteGraph) -> list[list[int]]:
    """Recover membership lists from a star expansion (losslessness helper)."""
    members: list[list[int]] = [[] for _ in range(bg.num_right)]
    for v, e in bg.edges:
        members[e].append(v)
    return members


def line_expand(H: Hypergraph) -> LineGraph:
    """Vertices are incidence pairs; adjacency is shared node or shared hyperedge."""
    vertices = tuple((int(v), k) for k, e in enumerate(H.hyperedges) for v in e)

    by_node: dict[int, list[int]] = {}
    for i, (v, _) in enumerate(vertices):
        by_node.setdefault(v, []).append(i)

    edges: set[tuple[int, int]] = set()
    # Same hyperedge: vertices are contiguous per hyperedge by construction.
    offset = 0
    for e in H.hyperedges:
        for a in range(len(e)):
            for b in range(a + 1, len(e)):
                edges.add((offset + a, offset + b))
        offset += len(e)
    # Same node.
    for group in by_node.values():
        for a in range(len(group)):
            for b in range(a + 1, len(group)):
                edges.add((group[a], group[b]))
    return LineGraph(vertices, tuple(sorted(edges)))
