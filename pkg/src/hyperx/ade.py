"""Adaptive expansion of hypergraphs into weighted graphs.

Pipeline: a small gate network turns the globally pooled feature vector into
per-dimension importances; features are rescaled; a per-node scalar signal
(row sum of scaled features) selects, for each hyperedge, the pair of member
nodes with the largest signal gap; remaining members become mediators joined
to both selected nodes; edge weights come from an exponential kernel over
scaled-feature differences with learnable per-dimension bandwidths and a
precomputed Euclidean distance prior, normalized to sum to one per hyperedge,
then accumulated into a symmetric adjacency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .autodiff import glorot_uniform
from .core import Hypergraph, WeightedGraph

# Numeric guards: the kernel exponent is clamped to >= -EXPONENT_CLAMP before
# exponentiation, per-hyperedge weight sums are floored at DENOM_FLOOR, and
# effective bandwidths never drop below THETA_FLOOR.
EXPONENT_CLAMP = 60.0
DENOM_FLOOR = 1e-30
THETA_FLOOR = 1e-4

_KERNEL_CHUNK = 65536


def default_hidden_width(num_features: int) -> int:
    """Bottleneck width of the gate network when not set explicitly."""
    return max(16, -(-num_features // 4))


@dataclass
class GsiNetParams:
    """Gate-network weights: w1 is hidden x features, w2 is features x hidden."""

    w1: np.ndarray
    w2: np.ndarray

    def __post_init__(self):
        self.w1 = np.asarray(self.w1, dtype=np.float64)
        self.w2 = np.asarray(self.w2, dtype=np.float64)
        if self.w1.ndim != 2 or self.w2.ndim != 2:
            raise ValueError("gate weights must be matrices")
        if self.w1.shape[0] != self.w2.shape[1] or self.w1.shape[1] != self.w2.shape[0]:
            raise ValueError(f"gate shapes do not compose: {self.w1.shape} and {self.w2.shape}")

    @property
    def hidden_width(self) -> int:
        return self.w1.shape[0]

    @property
    def num_features(self) -> int:
        return self.w1.shape[1]

    @classmethod
    def init(cls, num_features: int, seed: int, hidden: int | None = None) -> "GsiNetParams":
        h = default_hidden_width(num_features) if hidden is None else hidden
        w1 = glorot_uniform(h, num_features, rngmod.substream(seed, rngmod.PARAM_INIT, 0))
        w2 = glorot_uniform(num_features, h, rngmod.substream(seed, rngmod.PARAM_INIT, 1))
        return cls(w1, w2)


@dataclass
class KernelParams:
    """Unconstrained bandwidth parameters; effective value is softplus + floor."""

    theta_raw: np.ndarray
    floor: float = THETA_FLOOR

    def __post_init__(self):
        self.theta_raw = np.asarray(self.theta_raw, dtype=np.float64).reshape(1, -1)
        if self.floor <= 0:
            raise ValueError("bandwidth floor must be positive")

    @property
    def num_features(self) -> int:
        return self.theta_raw.shape[1]

    def effective_theta(self) -> np.ndarray:
        """Strictly positive per-dimension bandwidths, shape (b,)."""
        return np.logaddexp(0.0, self.theta_raw).ravel() + self.floor

    @classmethod
    def init(cls, num_features: int, floor: float = THETA_FLOOR) -> "KernelParams":
        # softplus(raw) + floor == 1 exactly at initialization
        raw = np.log(np.expm1(1.0 - floor))
        return cls(np.full((1, num_features), raw), floor)


@dataclass(frozen=True)
class HyperedgeSelection:
    """Representative pair, mediators, and the induced edge set of one hyperedge."""

    hyperedge: int
    v_minus: int
    v_plus: int
    mediators: tuple[int, ...]

    def edge_set(self) -> list[tuple[int, int]]:
        """Edges contributed by this hyperedge: 2|e| - 3 of them for |e| >= 2."""
        if self.v_minus == self.v_plus:  # singleton hyperedge
            return []
        edges = [(self.v_minus, self.v_plus)]
        for m in self.mediators:
            edges.append((m, self.v_minus))
            edges.append((m, self.v_plus))
        return edges


class DistanceCache:
    """Lazy unordered-pair cache of Euclidean distances over the original features.

    Only pairs that are actually requested are ever computed, so memory stays
    proportional to the touched edge set rather than N^2.
    """

    def __init__(self, features: np.ndarray):
        self._X = np.asarray(features, dtype=np.float64)
        self._n = self._X.shape[0]
        self._vals: dict[int, float] = {}

    def __len__(self) -> int:
        return len(self._vals)

    def _key(self, i: int, j: int) -> int:
        a, b = (i, j) if i < j else (j, i)
        return a * self._n + b

    def get(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        key = self._key(i, j)
        val = self._vals.get(key)
        if val is None:
            diff = self._X[i] - self._X[j]
            # same summation as the bulk path so the cached value never
            # depends on which path filled it first
            val = float(np.sqrt((diff * diff).sum()))
            self._vals[key] = val
        return val

    def get_many(self, ii: np.ndarray, jj: np.ndarray) -> np.ndarray:
        """Vectorized lookup for aligned index arrays; fills the cache."""
        ii = np.asarray(ii, dtype=np.int64)
        jj = np.asarray(jj, dtype=np.int64)
        lo = np.minimum(ii, jj)
        hi = np.maximum(ii, jj)
        keys = lo * self._n + hi
        out = np.empty(ii.size)
        missing: list[int] = []
        for pos, key in enumerate(keys.tolist()):
            val = self._vals.get(key)
            if val is None:
                missing.append(pos)
            else:
                out[pos] = val
        if missing:
            miss = np.asarray(missing)
            diff = self._X[lo[miss]] - self._X[hi[miss]]
            vals = np.sqrt((diff * diff).sum(axis=1))
            out[miss] = vals
            for pos, val in zip(missing, vals.tolist()):
                self._vals[int(keys[pos])] = val
        out[ii == jj] = 0.0
        return out


def pair_distance(X: np.ndarray, i: int, j: int, cache: DistanceCache) -> float:
    """Euclidean distance between original feature rows i and j, memoized."""
    return cache.get(i, j)


# ---------------------------------------------------------------------------
# Gate network and signal
# ---------------------------------------------------------------------------


def global_pool(X: np.ndarray) -> np.ndarray:
    """Column-wise mean of the feature matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("global_pool needs at least one feature row")
    return X.mean(axis=0)


def si_net_forward(x_g: np.ndarray, params: GsiNetParams) -> np.ndarray:
    """Per-dimension importances sigmoid(w2 @ relu(w1 @ x_g)), entries in (0, 1)."""
    x_g = np.asarray(x_g, dtype=np.float64).ravel()
    if x_g.size != params.num_features:
        raise ValueError(f"pooled vector has {x_g.size} dims, gate expects {params.num_features}")
    hidden = np.maximum(params.w1 @ x_g, 0.0)
    z = params.w2 @ hidden
    gate = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
    # keep the contract of an open interval even when sigmoid saturates
    return np.clip(gate, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))


def scale_features(X: np.ndarray, gate: np.ndarray) -> np.ndarray:
    """Row-broadcast elementwise product X * gate."""
    X = np.asarray(X, dtype=np.float64)
    gate = np.asarray(gate, dtype=np.float64).ravel()
    if gate.size != X.shape[1]:
        raise ValueError(f"gate has {gate.size} dims, features have {X.shape[1]}")
    return X * gate


def compute_signal(X_a: np.ndarray) -> np.ndarray:
    """Per-node scalar signal: the row sum of the scaled features."""
    return np.asarray(X_a, dtype=np.float64).sum(axis=1)


# ---------------------------------------------------------------------------
# Representative pair selection
# ---------------------------------------------------------------------------


def _unrank_pair(k: int, size: int) -> tuple[int, int]:
    # k-th pair in the (a, b) a < b enumeration over range(size)
    a = 0
    remaining = k
    while remaining >= size - 1 - a:
        remaining -= size - 1 - a
        a += 1
    return a, a + 1 + remaining


def selection_needs_rng(values: np.ndarray) -> bool:
    """True when more than one member pair attains the maximal signal gap."""
    if values.size < 2:
        return False
    mn = values.min()
    mx = values.max()
    if mn == mx:
        return values.size > 2
    return int((values == mn).sum()) * int((values == mx).sum()) > 1


def select_pair(members, signal: np.ndarray, hyperedge: int, rng: np.random.Generator | None = None) -> HyperedgeSelection:
    """Pick the member pair maximizing the signal gap; the rest become mediators.

    ``v_plus`` carries the larger signal (ties inside the chosen pair broken
    toward the smaller node index as ``v_minus``).  When several pairs tie for
    the maximal gap, one is drawn uniformly from the tied set via ``rng``.
    """
    members = tuple(int(v) for v in members)
    if len(members) == 1:
        return HyperedgeSelection(hyperedge, members[0], members[0], ())
    values = np.asarray(signal, dtype=np.float64)[list(members)]
    mn = values.min()
    mx = values.max()

    if mn == mx:
        n_pairs = len(members) * (len(members) - 1) // 2
        if n_pairs == 1:
            pos_a, pos_b = 0, 1
        else:
            if rng is None:
                raise ValueError("tied selection requires an rng substream")
            pos_a, pos_b = _unrank_pair(int(rng.integers(n_pairs)), len(members))
        lo, hi = sorted((members[pos_a], members[pos_b]))
        v_minus, v_plus = lo, hi
        chosen = {pos_a, pos_b}
    else:
        min_pos = np.nonzero(values == mn)[0]
        max_pos = np.nonzero(values == mx)[0]
        count = min_pos.size * max_pos.size
        if count == 1:
            pa, pb = int(min_pos[0]), int(max_pos[0])
        else:
            if rng is None:
                raise ValueError("tied selection requires an rng substream")
            r = int(rng.integers(count))
            pa = int(min_pos[r // max_pos.size])
            pb = int(max_pos[r % max_pos.size])
        v_minus, v_plus = members[pa], members[pb]
        chosen = {pa, pb}

    mediators = tuple(members[p] for p in range(len(members)) if p not in chosen)
    return HyperedgeSelection(hyperedge, v_minus, v_plus, mediators)


def select_all(H: Hypergraph, signal: np.ndarray, seed: int, epoch: int = 0) -> list[HyperedgeSelection]:
    """Representative pairs for every hyperedge; tie substreams keyed by (seed, epoch, index)."""
    selections: list[HyperedgeSelection] = []
    for k, members in enumerate(H.membership_arrays()):
        rng = None
        if selection_needs_rng(signal[members]):
            rng = rngmod.substream(seed, rngmod.TIE_BREAK, epoch, k)
        selections.append(select_pair(members, signal, k, rng))
    return selections


# ---------------------------------------------------------------------------
# Kernel weights
# ---------------------------------------------------------------------------


def kernel_weight(X_a: np.ndarray, distance: float, theta: np.ndarray, i: int, j: int) -> float:
    """Edge weight exp(-(distance / b) * sum_d (X_a[i,d]-X_a[j,d])^2 / theta_d^2)."""
    X_a = np.asarray(X_a, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64).ravel()
    b = X_a.shape[1]
    diff = X_a[i] - X_a[j]
    arg = -(distance / b) * float(np.sum(diff * diff / (theta * theta)))
    return float(np.exp(max(arg, -EXPONENT_CLAMP)))


def kernel_weights_bulk(
    X_a: np.ndarray,
    distances: np.ndarray,
    ii: np.ndarray,
    jj: np.ndarray,
    theta: np.ndarray,
) -> np.ndarray:
    """Vectorized :func:`kernel_weight` over aligned pair arrays, chunked for memory."""
    X_a = np.asarray(X_a, dtype=np.float64)
    theta2 = np.asarray(theta, dtype=np.float64).ravel() ** 2
    b = X_a.shape[1]
    out = np.empty(ii.size)
    for start in range(0, ii.size, _KERNEL_CHUNK):
        stop = min(start + _KERNEL_CHUNK, ii.size)
        diff = X_a[ii[start:stop]] - X_a[jj[start:stop]]
        quad = (diff * diff / theta2).sum(axis=1)
        arg = -(distances[start:stop] / b) * quad
        out[start:stop] = np.exp(np.maximum(arg, -EXPONENT_CLAMP))
    return out


def normalize_weights(edges, raw_weights: np.ndarray) -> np.ndarray:
    """Scale one hyperedge's raw kernel weights so they sum to one."""
    raw = np.asarray(raw_weights, dtype=np.float64)
    if len(edges) != raw.size:
        raise ValueError("edge list and weight array lengths differ")
    if raw.size < 1:
        raise ValueError("cannot normalize an empty edge set")
    if np.any(raw <= 0):
        raise ValueError("raw kernel weights must be positive")
    return raw / max(float(raw.sum()), DENOM_FLOOR)


def assemble_adjacency(
    selections: list[HyperedgeSelection],
    normalized_weights: list[np.ndarray],
    num_nodes: int,
) -> WeightedGraph:
    """Sum per-hyperedge normalized weights into a symmetric weighted adjacency."""
    acc: dict[tuple[int, int], float] = {}
    for sel, weights in zip(selections, normalized_weights):
        edges = sel.edge_set()
        if len(edges) != len(weights):
            raise ValueError(f"hyperedge {sel.hyperedge}: {len(edges)} edges but {len(weights)} weights")
        for (a, b), w in zip(edges, weights):
            key = (a, b) if a < b else (b, a)
            acc[key] = acc.get(key, 0.0) + float(w)
    return WeightedGraph.from_weight_map(num_nodes, acc)


def selection_graph(selections: list[HyperedgeSelection], num_nodes: int) -> WeightedGraph:
    """Unit-weight structural graph over the union of all selection edge sets."""
    pairs = {tuple(sorted(edge)) for sel in selections for edge in sel.edge_set()}
    return WeightedGraph.from_weight_map(num_nodes, {p: 1.0 for p in sorted(pairs)})


# ---------------------------------------------------------------------------
# Slot bookkeeping shared by the value path and the differentiable path
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SelectionSlots:
    """Flat view of all per-hyperedge edges ("slots") plus the unique-pair index.

    A slot is one edge of one hyperedge's edge set; the same node pair may own
    slots in several hyperedges.  ``slot_to_pair`` maps slots onto the sorted
    unique pair arrays ``(pair_u, pair_v)``.
    """

    slot_seg: np.ndarray  # dense segment id per slot (one segment per contributing hyperedge)
    seg_sizes: np.ndarray  # number of slots per segment
    seg_hyperedge: np.ndarray  # original hyperedge index per segment
    pair_u: np.ndarray
    pair_v: np.ndarray
    slot_to_pair: np.ndarray
    num_nodes: int

    @property
    def num_slots(self) -> int:
        return self.slot_seg.size

    @property
    def num_pairs(self) -> int:
        return self.pair_u.size


def selection_slots(selections: list[HyperedgeSelection], num_nodes: int) -> SelectionSlots:
    slot_lo: list[int] = []
    slot_hi: list[int] = []
    slot_seg: list[int] = []
    seg_sizes: list[int] = []
    seg_hyperedge: list[int] = []
    for sel in selections:
        edges = sel.edge_set()
        if not edges:
            continue
        seg = len(seg_sizes)
        seg_sizes.append(len(edges))
        seg_hyperedge.append(sel.hyperedge)
        for a, b in edges:
            lo, hi = (a, b) if a < b else (b, a)
            slot_lo.append(lo)
            slot_hi.append(hi)
            slot_seg.append(seg)
    lo_arr = np.asarray(slot_lo, dtype=np.int64)
    hi_arr = np.asarray(slot_hi, dtype=np.int64)
    keys = lo_arr * num_nodes + hi_arr
    unique_keys, slot_to_pair = np.unique(keys, return_inverse=True)
    return SelectionSlots(
        slot_seg=np.asarray(slot_seg, dtype=np.int64),
        seg_sizes=np.asarray(seg_sizes, dtype=np.int64),
        seg_hyperedge=np.asarray(seg_hyperedge, dtype=np.int64),
        pair_u=unique_keys // num_nodes,
        pair_v=unique_keys % num_nodes,
        slot_to_pair=slot_to_pair.astype(np.int64),
        num_nodes=num_nodes,
    )


# ---------------------------------------------------------------------------
# Full expansion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpansionResult:
    graph: WeightedGraph
    scaled_features: np.ndarray
    selections: tuple[HyperedgeSelection, ...]
    normalized_weights: tuple[np.ndarray, ...]  # aligned with each selection's edge_set()
    gate: np.ndarray
    signal: np.ndarray


def expand(
    H: Hypergraph,
    gsi: GsiNetParams,
    kernel: KernelParams,
    seed: int,
    epoch: int = 0,
    cache: DistanceCache | None = None,
) -> ExpansionResult:
    """Run the full adaptive expansion; deterministic for fixed (params, seed, epoch)."""
    gate = si_net_forward(global_pool(H.features), gsi)
    X_a = scale_features(H.features, gate)
    signal = compute_signal(X_a)
    selections = select_all(H, signal, seed, epoch)
    slots = selection_slots(selections, H.num_nodes)

    if cache is None:
        cache = DistanceCache(H.features)
    theta = kernel.effective_theta()

    norm_per_selection: list[np.ndarray] = []
    if slots.num_slots:
        distances = cache.get_many(slots.pair_u, slots.pair_v)
        pair_w = kernel_weights_bulk(X_a, distances, slots.pair_u, slots.pair_v, theta)
        slot_w = pair_w[slots.slot_to_pair]
        seg_sum = np.zeros(slots.seg_sizes.size)
        np.add.at(seg_sum, slots.slot_seg, slot_w)
        slot_norm = slot_w / np.maximum(seg_sum, DENOM_FLOOR)[slots.slot_seg]
        adj_vals = np.zeros(slots.num_pairs)
        np.add.at(adj_vals, slots.slot_to_pair, slot_norm)
        graph = WeightedGraph(H.num_nodes, slots.pair_u, slots.pair_v, adj_vals)

        pieces = np.split(slot_norm, np.cumsum(slots.seg_sizes)[:-1])
        by_seg = {int(h): piece for h, piece in zip(slots.seg_hyperedge, pieces)}
        for sel in selections:
            norm_per_selection.append(by_seg.get(sel.hyperedge, np.empty(0)))
    else:
        graph = WeightedGraph(H.num_nodes, np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0))
        norm_per_selection = [np.empty(0) for _ in selections]

    return ExpansionResult(graph, X_a, tuple(selections), tuple(norm_per_selection), gate, signal)


def hypergcn_fixed_selections(H: Hypergraph, seed: int) -> list[HyperedgeSelection]:
    """Mediator selections driven by the random-projection signal X @ xi."""
    xi = rngmod.substream(seed, rngmod.SIGNAL_PROJECTION).standard_normal(H.num_features)
    signal = H.features @ xi
    return select_all(H, signal, seed, epoch=0)


def expand_hypergcn_fixed(H: Hypergraph, seed: int) -> WeightedGraph:
    """Fixed-weight mediator expansion: every edge of a hyperedge weighs 1/(2|e|-3)."""
    selections = hypergcn_fixed_selections(H, seed)
    weights = [np.full(len(sel.edge_set()), 1.0 / max(len(sel.edge_set()), 1)) for sel in selections]
    return assemble_adjacency(selections, weights, H.num_nodes)
