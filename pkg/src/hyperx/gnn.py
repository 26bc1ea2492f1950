"""Two-layer GCN on the expanded graph, cross-entropy training, splits, grid search.

The training loop follows the expansion's epoch cadence: every epoch the
hypergraph is re-expanded with the current parameters, the loss graph is
rebuilt on a fresh tape, and one Adam step updates gate, bandwidth, and GCN
weights together.  ``mode`` selects how the adjacency enters propagation:
``paper-literal`` applies the assembled adjacency as-is, ``normalized``
substitutes D^{-1/2} (A + I) D^{-1/2}.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Any

import numpy as np

from . import rng as rngmod
from .ade import (
    DENOM_FLOOR,
    EXPONENT_CLAMP,
    DistanceCache,
    GsiNetParams,
    HyperedgeSelection,
    KernelParams,
    SelectionSlots,
    compute_signal,
    global_pool,
    scale_features,
    select_all,
    selection_slots,
    si_net_forward,
)
from .autodiff import AdamState, Tape, Tensor, adam_step, glorot_uniform
from .core import Hypergraph, WeightedGraph

MODES = ("normalized", "paper-literal")


@dataclass
class GcnParams:
    """Encoder weights: w1 maps features to hidden, w2 hidden to class logits."""

    w1: np.ndarray
    w2: np.ndarray

    def __post_init__(self):
        self.w1 = np.asarray(self.w1, dtype=np.float64)
        self.w2 = np.asarray(self.w2, dtype=np.float64)
        if self.w1.shape[1] != self.w2.shape[0]:
            raise ValueError(f"encoder shapes do not compose: {self.w1.shape} then {self.w2.shape}")

    @property
    def hidden_width(self) -> int:
        return self.w1.shape[1]

    @property
    def num_classes(self) -> int:
        return self.w2.shape[1]

    @classmethod
    def init(cls, num_features: int, hidden: int, num_classes: int, seed: int) -> "GcnParams":
        w1 = glorot_uniform(num_features, hidden, rngmod.substream(seed, rngmod.PARAM_INIT, 2))
        w2 = glorot_uniform(hidden, num_classes, rngmod.substream(seed, rngmod.PARAM_INIT, 3))
        return cls(w1, w2)


@dataclass(frozen=True)
class SplitMask:
    """Disjoint train/validation/test node index sets covering all nodes."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


def make_splits(num_nodes: int, proportions=(0.2, 0.2, 0.6), seed: int = 0) -> SplitMask:
    """Uniform random partition with the given proportions, seeded."""
    props = tuple(float(p) for p in proportions)
    if len(props) != 3:
        raise ValueError("proportions must be (train, val, test)")
    if abs(sum(props) - 1.0) > 1e-9:
        raise ValueError(f"proportions must sum to 1, got {sum(props)}")
    perm = rngmod.substream(seed, rngmod.SPLIT).permutation(num_nodes)
    n_train = int(round(props[0] * num_nodes))
    n_val = int(round(props[1] * num_nodes))
    if n_train + n_val >= num_nodes or n_train == 0 or n_val == 0:
        raise ValueError(f"splits {props} on {num_nodes} nodes yield an empty set")
    return SplitMask(
        train=np.sort(perm[:n_train]),
        val=np.sort(perm[n_train : n_train + n_val]),
        test=np.sort(perm[n_train + n_val :]),
    )


# ---------------------------------------------------------------------------
# Value-path forward (inference, metrics)
# ---------------------------------------------------------------------------


def _propagate(graph: WeightedGraph, X: np.ndarray, mode: str) -> np.ndarray:
    u, v, w = graph.edge_u, graph.edge_v, graph.edge_w
    if mode == "paper-literal":
        out = np.zeros_like(X)
        np.add.at(out, u, w[:, None] * X[v])
        np.add.at(out, v, w[:, None] * X[u])
        return out
    if mode == "normalized":
        deg = np.zeros(graph.num_nodes)
        np.add.at(deg, u, w)
        np.add.at(deg, v, w)
        r = 1.0 / np.sqrt(deg + 1.0)
        what = w * r[u] * r[v]
        out = np.zeros_like(X)
        np.add.at(out, u, what[:, None] * X[v])
        np.add.at(out, v, what[:, None] * X[u])
        out += X * (r * r)[:, None]
        return out
    raise ValueError(f"unknown propagation mode {mode!r}")


def gcn_forward(
    graph: WeightedGraph,
    X_a: np.ndarray,
    params: GcnParams,
    mode: str = "normalized",
    hidden_dropout_mask: np.ndarray | None = None,
) -> np.ndarray:
    """Logits Z = prop(relu(prop(X_a @ w1)) [* dropout mask]) @ w2."""
    if mode not in MODES:
        raise ValueError(f"unknown propagation mode {mode!r}")
    X_a = np.asarray(X_a, dtype=np.float64)
    if X_a.shape != (graph.num_nodes, params.w1.shape[0]):
        raise ValueError(f"feature matrix {X_a.shape} incompatible with graph/encoder")
    hidden = np.maximum(_propagate(graph, X_a @ params.w1, mode), 0.0)
    if hidden_dropout_mask is not None:
        hidden = hidden * hidden_dropout_mask
    return _propagate(graph, hidden, mode) @ params.w2


def log_softmax(Z: np.ndarray) -> np.ndarray:
    shifted = Z - Z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def cross_entropy(Z: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    """Mean negative log-likelihood of the true classes over the masked nodes."""
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ValueError("cross_entropy over an empty mask")
    logp = log_softmax(np.asarray(Z, dtype=np.float64))
    return float(-logp[mask, np.asarray(labels)[mask]].mean())


def accuracy(Z: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ValueError("accuracy over an empty mask")
    pred = np.asarray(Z).argmax(axis=1)
    return float((pred[mask] == np.asarray(labels)[mask]).mean())


def dropout_mask(shape: tuple[int, int], rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout mask: zeros with probability ``rate``, survivors scaled by 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must be in [0, 1)")
    if rate == 0.0:
        return np.ones(shape)
    return (rng.random(shape) >= rate) / (1.0 - rate)


# ---------------------------------------------------------------------------
# Differentiable pipeline (gate -> kernel -> normalization -> GCN -> loss)
# ---------------------------------------------------------------------------


@dataclass
class Pipeline:
    """A fully built loss graph plus handles to its leaves and key values."""

    tape: Tape
    loss: Tensor
    logits: Tensor
    gate: Tensor
    scaled_features: Tensor
    adjacency_values: Tensor | None  # per unique pair, aligned with slots
    slots: SelectionSlots
    leaves: dict[str, Tensor]  # w1, w2, theta_raw, gcn_w1, gcn_w2

    def gradients(self) -> dict[str, np.ndarray]:
        out = {}
        for name, leaf in self.leaves.items():
            out[name] = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
        return out


def build_pipeline(
    H: Hypergraph,
    gsi: GsiNetParams,
    kernel: KernelParams,
    gcn: GcnParams,
    selections: list[HyperedgeSelection],
    mode: str,
    train_idx: np.ndarray,
    cache: DistanceCache,
    hidden_dropout: np.ndarray | None = None,
) -> Pipeline:
    """Assemble the end-to-end loss on a fresh tape for fixed selections.

    Selections are treated as constants: the argmax pair choice is discrete, so
    gradients flow through the kernel and encoder but not the selection itself.
    """
    if mode not in MODES:
        raise ValueError(f"unknown propagation mode {mode!r}")
    t = Tape()
    X = t.constant(H.features)
    n, b = H.features.shape

    w1 = t.leaf(gsi.w1)
    w2 = t.leaf(gsi.w2)
    theta_raw = t.leaf(kernel.theta_raw)
    gcn_w1 = t.leaf(gcn.w1)
    gcn_w2 = t.leaf(gcn.w2)

    # gate vector from the pooled features
    xg_col = t.transpose(t.col_mean(X))  # (b, 1)
    hidden = t.relu(t.matmul(w1, xg_col))
    gate_row = t.transpose(t.sigmoid(t.matmul(w2, hidden)))  # (1, b)
    X_a = t.row_scale(X, gate_row)

    slots = selection_slots(selections, n)
    theta_eff = t.add(t.softplus(theta_raw), t.constant(np.full((1, b), kernel.floor)))

    if slots.num_slots:
        # Kernel weights per unique pair.  Using X_a[i] - X_a[j] = gate * (X[i] - X[j])
        # lets the squared differences of the raw features stay a constant matrix.
        sq_diff = (H.features[slots.pair_u] - H.features[slots.pair_v]) ** 2  # (P, b)
        dist_over_b = cache.get_many(slots.pair_u, slots.pair_v).reshape(-1, 1) / b

        coeff = t.mul(t.mul(gate_row, gate_row), t.reciprocal(t.mul(theta_eff, theta_eff)))  # (1, b)
        quad = t.matmul(t.constant(sq_diff), t.transpose(coeff))  # (P, 1)
        arg = t.clamp_min(t.neg(t.mul(quad, t.constant(dist_over_b))), -EXPONENT_CLAMP)
        pair_w = t.exp(arg)

        slot_w = t.gather_rows(pair_w, slots.slot_to_pair)
        seg_sum = t.segment_sum(slot_w, slots.slot_seg, int(slots.seg_sizes.size))
        inv_denom = t.reciprocal(t.clamp_min(seg_sum, DENOM_FLOOR))
        slot_norm = t.mul(slot_w, t.gather_rows(inv_denom, slots.slot_seg))
        adj_vals = t.segment_sum(slot_norm, slots.slot_to_pair, slots.num_pairs)
    else:
        adj_vals = None

    def propagate(x: Tensor) -> Tensor:
        if adj_vals is None:
            if mode == "paper-literal":
                return t.scale(x, 0.0)
            return x  # degree-0 everywhere: normalized operator is the identity
        if mode == "paper-literal":
            return t.spmm(slots.pair_u, slots.pair_v, adj_vals, x)
        deg = t.add(
            t.segment_sum(adj_vals, slots.pair_u, n),
            t.segment_sum(adj_vals, slots.pair_v, n),
        )
        r = t.rsqrt(t.add(deg, t.constant(np.ones((n, 1)))))
        a_hat = t.mul(adj_vals, t.mul(t.gather_rows(r, slots.pair_u), t.gather_rows(r, slots.pair_v)))
        return t.add(t.spmm(slots.pair_u, slots.pair_v, a_hat, x), t.col_scale(x, t.mul(r, r)))

    h1 = t.relu(propagate(t.matmul(X_a, gcn_w1)))
    if hidden_dropout is not None:
        h1 = t.mul(h1, t.constant(hidden_dropout))
    logits = t.matmul(propagate(h1), gcn_w2)

    logp = t.log_softmax(logits)
    loss = t.masked_mean(t.neg(t.label_pick(logp, H.labels)), train_idx)

    return Pipeline(
        tape=t,
        loss=loss,
        logits=logits,
        gate=gate_row,
        scaled_features=X_a,
        adjacency_values=adj_vals,
        slots=slots,
        leaves={"w1": w1, "w2": w2, "theta_raw": theta_raw, "gcn_w1": gcn_w1, "gcn_w2": gcn_w2},
    )


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    epochs: int = 500
    lr: float = 0.01
    weight_decay: float = 5e-4
    dropout: float = 0.5
    si_hidden: int | None = None
    gcn_hidden: int = 64
    mode: str = "normalized"
    splits: tuple[float, float, float] = (0.2, 0.2, 0.6)

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "epochs": self.epochs,
            "lr": self.lr,
            "weight_decay": self.weight_decay,
            "dropout": self.dropout,
            "si_hidden": self.si_hidden,
            "gcn_hidden": self.gcn_hidden,
            "mode": self.mode,
            "splits": list(self.splits),
        }


@dataclass
class RunReport:
    """Per-epoch curves plus the test accuracy of the best-validation snapshot."""

    seed: int
    config: dict[str, Any]
    losses: list[float]
    train_accuracies: list[float]
    val_accuracies: list[float]
    best_epoch: int
    best_val_accuracy: float
    test_accuracy: float
    wall_clock_sec: float
    embeddings: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self, include_timing: bool = True) -> dict[str, Any]:
        out = {
            "seed": self.seed,
            "config": self.config,
            "losses": self.losses,
            "train_accuracies": self.train_accuracies,
            "val_accuracies": self.val_accuracies,
            "best_epoch": self.best_epoch,
            "best_val_accuracy": self.best_val_accuracy,
            "test_accuracy": self.test_accuracy,
        }
        if include_timing:
            out["wall_clock_sec"] = self.wall_clock_sec
        return out


def train(H: Hypergraph, config: TrainConfig) -> RunReport:
    """Train the full pipeline end to end; deterministic for a fixed config."""
    start = time.perf_counter()
    splits = make_splits(H.num_nodes, config.splits, config.seed)

    b = H.num_features
    gsi = GsiNetParams.init(b, config.seed, hidden=config.si_hidden)
    kernel = KernelParams.init(b)
    gcn = GcnParams.init(b, config.gcn_hidden, H.num_classes, config.seed)
    params = [gsi.w1, gsi.w2, kernel.theta_raw, gcn.w1, gcn.w2]
    adam = AdamState.for_params(params)
    cache = DistanceCache(H.features)

    losses: list[float] = []
    train_accs: list[float] = []
    val_accs: list[float] = []
    best_epoch = -1
    best_val = -1.0
    best_test = 0.0
    best_embeddings: np.ndarray | None = None

    for epoch in range(config.epochs):
        gate = si_net_forward(global_pool(H.features), gsi)
        signal = compute_signal(scale_features(H.features, gate))
        selections = select_all(H, signal, config.seed, epoch)

        mask = None
        if config.dropout > 0.0:
            mask = dropout_mask(
                (H.num_nodes, config.gcn_hidden),
                config.dropout,
                rngmod.substream(config.seed, rngmod.DROPOUT, epoch),
            )
        pipe = build_pipeline(H, gsi, kernel, gcn, selections, config.mode, splits.train, cache, mask)

        # metrics from a dropout-free forward with this epoch's parameters
        if pipe.adjacency_values is not None:
            graph = WeightedGraph(
                H.num_nodes, pipe.slots.pair_u, pipe.slots.pair_v, pipe.adjacency_values.data.ravel()
            )
        else:
            graph = WeightedGraph(H.num_nodes, np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0))
        Z_eval = gcn_forward(graph, pipe.scaled_features.data, gcn, config.mode)

        losses.append(float(pipe.loss.data[0, 0]))
        train_accs.append(accuracy(Z_eval, H.labels, splits.train))
        val_acc = accuracy(Z_eval, H.labels, splits.val)
        val_accs.append(val_acc)
        if val_acc > best_val:
            best_val = val_acc
            best_epoch = epoch
            best_test = accuracy(Z_eval, H.labels, splits.test)
            best_embeddings = Z_eval.copy()

        pipe.tape.backward(pipe.loss)
        grads = pipe.gradients()
        adam_step(
            params,
            [grads["w1"], grads["w2"], grads["theta_raw"], grads["gcn_w1"], grads["gcn_w2"]],
            adam,
            lr=config.lr,
            weight_decay=config.weight_decay,
        )

    return RunReport(
        seed=config.seed,
        config=config.to_dict(),
        losses=losses,
        train_accuracies=train_accs,
        val_accuracies=val_accs,
        best_epoch=best_epoch,
        best_val_accuracy=best_val,
        test_accuracy=best_test,
        wall_clock_sec=time.perf_counter() - start,
        embeddings=best_embeddings,
    )


# ---------------------------------------------------------------------------
# Grid search
# ---------------------------------------------------------------------------


@dataclass
class GridSearchResult:
    best_config: dict[str, Any]
    best_mean_val: float
    test_mean: float
    test_std: float
    reports: list[RunReport]  # every cell x seed, cell-major order

    def to_dict(self) -> dict[str, Any]:
        return {
            "best_config": self.best_config,
            "best_mean_val": self.best_mean_val,
            "test_mean": self.test_mean,
            "test_std": self.test_std,
        }


def _sample_std(values: list[float]) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(np.asarray(values), ddof=1))


def grid_search(H: Hypergraph, grid: dict[str, list], seeds: list[int], base: TrainConfig) -> GridSearchResult:
    """Evaluate every grid cell for every seed; select by mean validation accuracy."""
    if not grid:
        raise ValueError("grid must contain at least one axis")
    keys = sorted(grid)
    cells = [dict(zip(keys, combo)) for combo in product(*(grid[k] for k in keys))]

    from .parallel import parallel_map

    jobs = [(cell, seed) for cell in cells for seed in seeds]

    def run(job):
        cell, seed = job
        return train(H, replace(base, seed=seed, **cell))

    reports = parallel_map(run, jobs)

    best_idx = -1
    best_mean_val = -1.0
    for idx, cell in enumerate(cells):
        cell_reports = reports[idx * len(seeds) : (idx + 1) * len(seeds)]
        mean_val = float(np.mean([r.best_val_accuracy for r in cell_reports]))
        if mean_val > best_mean_val:
            best_mean_val = mean_val
            best_idx = idx
    best_reports = reports[best_idx * len(seeds) : (best_idx + 1) * len(seeds)]
    tests = [r.test_accuracy for r in best_reports]
    return GridSearchResult(
        best_config=cells[best_idx],
        best_mean_val=best_mean_val,
        test_mean=float(np.mean(tests)),
        test_std=_sample_std(tests),
        reports=reports,
    )
