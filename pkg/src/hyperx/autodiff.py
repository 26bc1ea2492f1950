"""Minimal dense-matrix reverse-mode automatic differentiation.

All values are 2-D float64 arrays (scalars are 1x1).  Operations append nodes
to a :class:`Tape` in creation order, which is already a topological order, so
the backward pass is a single reversed sweep.  Besides the dense primitives
there are a few structural ones (gather/segment-sum/sparse-matmul) so that
edge-list adjacencies and per-hyperedge weight normalization stay
differentiable without ever materializing an N x N matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


class Tensor:
    """A node in the tape: value, optional gradient, and a backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "_backward")

    def __init__(self, data: np.ndarray, requires_grad: bool):
        if data.ndim != 2:
            raise ValueError(f"tensors are 2-D, got shape {data.shape}")
        self.data = data
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._backward: Callable[[], None] | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            # copy: g may be a read-only broadcast view owned by the caller
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad += g


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Tape:
    """Ordered record of operations; rebuilt from scratch for every epoch."""

    def __init__(self):
        self._nodes: list[Tensor] = []

    # -- node construction ---------------------------------------------------

    def _new(self, data: np.ndarray, requires_grad: bool) -> Tensor:
        t = Tensor(data, requires_grad)
        self._nodes.append(t)
        return t

    def leaf(self, data: np.ndarray) -> Tensor:
        """A trainable leaf; gradients accumulate here."""
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        return self._new(arr, True)

    def constant(self, data: np.ndarray) -> Tensor:
        """A non-trainable input; no gradient is computed for it."""
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        return self._new(arr, False)

    # -- primitives ------------------------------------------------------

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        if a.shape[1] != b.shape[0]:
            raise ValueError(f"matmul shape mismatch {a.shape} @ {b.shape}")
        out = self._new(a.data @ b.data, a.requires_grad or b.requires_grad)

        def backward():
            g = out.grad
            if a.requires_grad:
                a._accumulate(g @ b.data.T)
            if b.requires_grad:
                b._accumulate(a.data.T @ g)

        out._backward = backward
        return out

    def _elementwise_pair(self, a: Tensor, b: Tensor, name: str) -> None:
        if a.shape != b.shape:
            raise ValueError(f"{name} shape mismatch {a.shape} vs {b.shape}")

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        self._elementwise_pair(a, b, "add")
        out = self._new(a.data + b.data, a.requires_grad or b.requires_grad)

        def backward():
            if a.requires_grad:
                a._accumulate(out.grad)
            if b.requires_grad:
                b._accumulate(out.grad)

        out._backward = backward
        return out

    def sub(self, a: Tensor, b: Tensor) -> Tensor:
        self._elementwise_pair(a, b, "sub")
        out = self._new(a.data - b.data, a.requires_grad or b.requires_grad)

        def backward():
            if a.requires_grad:
                a._accumulate(out.grad)
            if b.requires_grad:
                b._accumulate(-out.grad)

        out._backward = backward
        return out

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        self._elementwise_pair(a, b, "mul")
        out = self._new(a.data * b.data, a.requires_grad or b.requires_grad)

        def backward():
            if a.requires_grad:
                a._accumulate(out.grad * b.data)
            if b.requires_grad:
                b._accumulate(out.grad * a.data)

        out._backward = backward
        return out

    def row_scale(self, x: Tensor, v: Tensor) -> Tensor:
        """Row-broadcast multiply: every row of x is scaled elementwise by v (1 x n)."""
        if v.shape != (1, x.shape[1]):
            raise ValueError(f"row_scale needs (1, {x.shape[1]}), got {v.shape}")
        out = self._new(x.data * v.data, x.requires_grad or v.requires_grad)

        def backward():
            if x.requires_grad:
                x._accumulate(out.grad * v.data)
            if v.requires_grad:
                v._accumulate((out.grad * x.data).sum(axis=0, keepdims=True))

        out._backward = backward
        return out

    def col_scale(self, x: Tensor, s: Tensor) -> Tensor:
        """Column-broadcast multiply: row i of x is scaled by the scalar s[i, 0]."""
        if s.shape != (x.shape[0], 1):
            raise ValueError(f"col_scale needs ({x.shape[0]}, 1), got {s.shape}")
        out = self._new(x.data * s.data, x.requires_grad or s.requires_grad)

        def backward():
            if x.requires_grad:
                x._accumulate(out.grad * s.data)
            if s.requires_grad:
                s._accumulate((out.grad * x.data).sum(axis=1, keepdims=True))

        out._backward = backward
        return out

    def relu(self, x: Tensor) -> Tensor:
        out = self._new(np.maximum(x.data, 0.0), x.requires_grad)

        def backward():
            if x.requires_grad:
                x._accumulate(out.grad * (x.data > 0))

        out._backward = backward
        return out

    def sigmoid(self, x: Tensor) -> Tensor:
        s = _stable_sigmoid(x.data)
        out = self._new(s, x.requires_grad)

        def backward():
            if x.requires_grad:
                x._accumulate(out.grad * s * (1.0 - s))

        out._backward = backward
        return out

    def exp(self, x: Tensor) -> Tensor:
        e = np.exp(x.data)
        out = self._new(e, x.requires_grad)

        def backward():
            if x.requires_grad:
                x._accumulate(out.grad * e)

        out._backward = backward
        return out

    def neg(self, x: Tensor) -> Tensor:
        out = self._new(-x.data, x.requires_grad)

        def backward():
            if x.requires_grad:
                x._accumulate(-out.grad)

        out._backward = backward
        return out

    def scale(self, x: Tensor, c: float) -> Tensor:
        out = self._new(x.data * c, x.requires_grad)

        def backward():
            if x.requires_grad:
                x._accumulate(out.grad * c)

        out._backward = backward
        return out

    def softplus(self, x: Tensor) -> Tensor:
        out = self._new(np.logaddexp(0.0, x.data), x.requires_grad)

        def backward():
            if x.requires_grad:
                x._accumulate(out.grad * _stable_sigmoid(x.data))

        out._backward = backward
        return out

    def reciprocal(self, x: Tensor) -> Tensor:
        r = 1.0 / x.data
        out = self._new(r, x.requires_grad)

        def backward():
            if x.requires_grad:
                x._accumulate(-out.grad * r * r)

        out._backward = backward
        return out

    def rsqrt(self, x: Tensor) -> Tensor:
        r = 1.0 / np.sqrt(x.data)
        out = self._new(r, x.requires_grad)

        def backward():
            if x.requires_grad:
                x._accumulate(-0.5 * out.grad * r / x.data)

        out._backward = backward
        return out

    def clamp_min(self, x: Tensor, floor: float) -> Tensor:
        out = self._new(np.maximum(x.data, floor), x.requires_grad)

        def backward():
            if x.requires_grad:
                x._accumulate(out.grad * (x.data > floor))

        out._backward = backward
        return out

    def row_sum(self, x: Tensor) -> Tensor:
        out = self._new(x.data.sum(axis=1, keepdims=True), x.requires_grad)

        def backward():
            if x.requires_grad:
                x._accumulate(np.broadcast_to(out.grad, x.shape))

        out._backward = backward
        return out

    def col_mean(self, x: Tensor) -> Tensor:
        n = x.shape[0]
        out = self._new(x.data.mean(axis=0, keepdims=True), x.requires_grad)

        def backward():
            if x.requires_grad:
                x._accumulate(np.broadcast_to(out.grad / n, x.shape))

        out._backward = backward
        return out

    def transpose(self, x: Tensor) -> Tensor:
        out = self._new(np.ascontiguousarray(x.data.T), x.requires_grad)

        def backward():
            if x.requires_grad:
                x._accumulate(out.grad.T)

        out._backward = backward
        return out

    def log_softmax(self, x: Tensor) -> Tensor:
        shifted = x.data - x.data.max(axis=1, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        out = self._new(shifted - lse, x.requires_grad)

        def backward():
            if x.requires_grad:
                soft = np.exp(out.data)
                x._accumulate(out.grad - soft * out.grad.sum(axis=1, keepdims=True))

        out._backward = backward
        return out

    def gather_rows(self, x: Tensor, idx: np.ndarray) -> Tensor:
        idx = np.asarray(idx, dtype=np.int64)
        out = self._new(x.data[idx], x.requires_grad)

        def backward():
            if x.requires_grad:
                g = np.zeros_like(x.data)
                np.add.at(g, idx, out.grad)
                x._accumulate(g)

        out._backward = backward
        return out

    def segment_sum(self, x: Tensor, segments: np.ndarray, num_segments: int) -> Tensor:
        segments = np.asarray(segments, dtype=np.int64)
        if segments.shape != (x.shape[0],):
            raise ValueError("segment ids must align with rows")
        data = np.zeros((num_segments, x.shape[1]))
        np.add.at(data, segments, x.data)
        out = self._new(data, x.requires_grad)

        def backward():
            if x.requires_grad:
                x._accumulate(out.grad[segments])

        out._backward = backward
        return out

    def label_pick(self, x: Tensor, labels: np.ndarray) -> Tensor:
        labels = np.asarray(labels, dtype=np.int64)
        rows = np.arange(x.shape[0])
        out = self._new(x.data[rows, labels].reshape(-1, 1), x.requires_grad)

        def backward():
            if x.requires_grad:
                g = np.zeros_like(x.data)
                g[rows, labels] = out.grad[:, 0]
                x._accumulate(g)

        out._backward = backward
        return out

    def masked_mean(self, x: Tensor, idx: np.ndarray) -> Tensor:
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size == 0:
            raise ValueError("masked_mean over an empty index set")
        if x.shape[1] != 1:
            raise ValueError("masked_mean expects a column vector")
        out = self._new(np.array([[x.data[idx, 0].mean()]]), x.requires_grad)

        def backward():
            if x.requires_grad:
                g = np.zeros_like(x.data)
                np.add.at(g[:, 0], idx, out.grad[0, 0] / idx.size)
                x._accumulate(g)

        out._backward = backward
        return out

    def spmm(self, u_idx: np.ndarray, v_idx: np.ndarray, w: Tensor, x: Tensor) -> Tensor:
        """Symmetric sparse-times-dense: out[i] = sum over edges {i,j} of w * x[j].

        The adjacency is given as an undirected edge list (u_idx, v_idx) with a
        column vector of weights; both orientations are applied.
        """
        u_idx = np.asarray(u_idx, dtype=np.int64)
        v_idx = np.asarray(v_idx, dtype=np.int64)
        if w.shape != (u_idx.size, 1):
            raise ValueError(f"spmm weights must be ({u_idx.size}, 1), got {w.shape}")
        data = np.zeros_like(x.data)
        np.add.at(data, u_idx, w.data * x.data[v_idx])
        np.add.at(data, v_idx, w.data * x.data[u_idx])
        out = self._new(data, w.requires_grad or x.requires_grad)

        def backward():
            g = out.grad
            if x.requires_grad:
                gx = np.zeros_like(x.data)
                np.add.at(gx, v_idx, w.data * g[u_idx])
                np.add.at(gx, u_idx, w.data * g[v_idx])
                x._accumulate(gx)
            if w.requires_grad:
                gw = (g[u_idx] * x.data[v_idx]).sum(axis=1) + (g[v_idx] * x.data[u_idx]).sum(axis=1)
                w._accumulate(gw.reshape(-1, 1))

        out._backward = backward
        return out

    # -- backward pass -----------------------------------------------------

    def backward(self, loss: Tensor) -> None:
        """Populate gradients for every tensor contributing to the scalar loss."""
        if loss.data.size != 1:
            raise ValueError(f"loss must be scalar, got shape {loss.shape}")
        for node in self._nodes:
            node.grad = None
        loss.grad = np.ones_like(loss.data)
        for node in reversed(self._nodes):
            if node._backward is not None and node.grad is not None:
                node._backward()


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    """First/second moment estimates and the shared step counter."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0

    @classmethod
    def for_params(cls, params: list[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> None:
    """One in-place Adam update with bias correction.

    Weight decay enters as an additive ``weight_decay * param`` term on the
    gradient before the moment updates.
    """
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise ValueError("parameter/gradient/state length mismatch")
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError("gradient shape mismatch")
        g_eff = g + weight_decay * p
        m *= beta1
        m += (1.0 - beta1) * g_eff
        v *= beta2
        v += (1.0 - beta2) * g_eff * g_eff
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def glorot_uniform(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Glorot/Xavier uniform initialization for a rows x cols weight matrix."""
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))
