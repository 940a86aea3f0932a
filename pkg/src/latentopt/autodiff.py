"""Dense reverse-mode automatic differentiation over 2-D float64 arrays.

A :class:`Graph` is a static program (a Wengert list): nodes are appended in
topological order and refer to their parents by index.  The same graph is
evaluated many times with different bindings of its named inputs, which is
how both the autoencoder trainer and the latent-space solver use it.

Tensors are plain ``numpy`` arrays of shape ``(rows, cols)``; 1-D inputs are
promoted to column vectors and scalars to ``(1, 1)``.
"""
from __future__ import annotations

from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np

OP_KINDS = (
    "input",
    "const",
    "matmul",
    "add",
    "relu",
    "square",
    "pos",
    "scale",
    "sum",
    "concat",
    "slice",
)


class GraphError(Exception):
    """Base class for graph evaluation errors."""


class GraphShapeError(GraphError):
    def __init__(self, node: int, kind: str, msg: str):
        self.node = node
        self.kind = kind
        super().__init__(f"node {node} ({kind}): {msg}")


class NonFiniteError(GraphError):
    def __init__(self, msg: str, coordinate=None):
        self.coordinate = coordinate
        super().__init__(msg)


def as_tensor(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        return arr.reshape(1, 1)
    if arr.ndim == 1:
        return arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"tensors are 2-D, got shape {arr.shape}")
    return arr


class Graph:
    """Append-only computation graph.

    Builder methods return the integer index of the new node.  The output of
    the graph is the last node added unless :meth:`set_output` is called.
    """

    def __init__(self) -> None:
        self.kinds: List[str] = []
        self.parents: List[tuple] = []
        self.attrs: List[object] = []
        self.values: List[Optional[np.ndarray]] = []
        self.grads: List[Optional[np.ndarray]] = []
        self.input_index: Dict[str, int] = {}
        self.output: Optional[int] = None
        self._forward_done = False
        self._needs_grad: List[bool] = []

    def __len__(self) -> int:
        return len(self.kinds)

    def _add(self, kind: str, parents: Sequence[int], attr=None) -> int:
        idx = len(self.kinds)
        for p in parents:
            if not 0 <= p < idx:
                raise ValueError(f"parent {p} of new node {idx} is not an earlier node")
        self.kinds.append(kind)
        self.parents.append(tuple(parents))
        self.attrs.append(attr)
        self.values.append(None)
        self.grads.append(None)
        if kind == "input":
            self._needs_grad.append(True)
        else:
            self._needs_grad.append(any(self._needs_grad[p] for p in parents))
        return idx

    # leaves
    def input(self, name: str) -> int:
        if name in self.input_index:
            return self.input_index[name]
        idx = self._add("input", (), name)
        self.input_index[name] = idx
        return idx

    def const(self, value) -> int:
        idx = self._add("const", (), as_tensor(value))
        self.values[idx] = self.attrs[idx]
        return idx

    # operations
    def matmul(self, a: int, b: int) -> int:
        return self._add("matmul", (a, b))

    def add(self, a: int, b: int) -> int:
        """Elementwise sum; ``b`` may be a (1, cols) row or a (1, 1) scalar."""
        return self._add("add", (a, b))

    def relu(self, a: int) -> int:
        return self._add("relu", (a,))

    def pos(self, a: int) -> int:
        """Positive part ``[a, 0]_+``; same map as ReLU, kept as its own kind."""
        return self._add("pos", (a,))

    def square(self, a: int) -> int:
        return self._add("square", (a,))

    def scale(self, a: int, c: float) -> int:
        return self._add("scale", (a,), float(c))

    def sum(self, a: int) -> int:
        return self._add("sum", (a,))

    def concat(self, nodes: Sequence[int], axis: int = 1) -> int:
        if axis not in (0, 1):
            raise ValueError("axis must be 0 or 1")
        return self._add("concat", tuple(nodes), axis)

    def slice(self, a: int, rows=None, cols=None) -> int:
        rows = slice(None) if rows is None else rows
        cols = slice(None) if cols is None else cols
        if isinstance(rows, int):
            rows = slice(rows, rows + 1)
        if isinstance(cols, int):
            cols = slice(cols, cols + 1)
        return self._add("slice", (a,), (rows, cols))

    # composite helpers built only from the primitive kinds
    def sub(self, a: int, b: int) -> int:
        return self.add(a, self.scale(b, -1.0))

    def dense(self, x: int, weight: int, bias: int, activation: bool) -> int:
        z = self.add(self.matmul(x, weight), bias)
        return self.relu(z) if activation else z

    def set_output(self, node: int) -> None:
        if not 0 <= node < len(self.kinds):
            raise ValueError(f"no node {node}")
        self.output = node

    @property
    def root(self) -> int:
        if not self.kinds:
            raise GraphError("empty graph")
        return self.output if self.output is not None else len(self.kinds) - 1


def _eval_node(i: int, kind: str, attr, args: List[np.ndarray]) -> np.ndarray:
    if kind == "matmul":
        a, b = args
        if a.shape[1] != b.shape[0]:
            raise GraphShapeError(i, kind, f"cannot multiply {a.shape} by {b.shape}")
        return a @ b
    if kind == "add":
        a, b = args
        if b.shape != a.shape and not (b.shape[0] == 1 and b.shape[1] in (1, a.shape[1])):
            raise GraphShapeError(i, kind, f"cannot add {b.shape} to {a.shape}")
        return a + b
    if kind in ("relu", "pos"):
        return np.maximum(args[0], 0.0)
    if kind == "square":
        return args[0] * args[0]
    if kind == "scale":
        return attr * args[0]
    if kind == "sum":
        return np.array([[args[0].sum()]])
    if kind == "concat":
        other = 1 - attr
        if len({a.shape[other] for a in args}) != 1:
            raise GraphShapeError(i, kind, f"incompatible shapes {[a.shape for a in args]}")
        return np.concatenate(args, axis=attr)
    if kind == "slice":
        rows, cols = attr
        out = args[0][rows, cols]
        if out.size == 0:
            raise GraphShapeError(i, kind, f"empty slice of {args[0].shape}")
        return out
    raise GraphError(f"node {i}: unknown op kind {kind!r}")


def graph_forward(graph: Graph, inputs: Mapping[str, object]) -> np.ndarray:
    """Evaluate ``graph`` with ``inputs`` bound; caches every intermediate value."""
    missing = set(graph.input_index) - set(inputs)
    if missing:
        raise GraphError(f"unbound inputs: {sorted(missing)}")
    values = graph.values
    kinds, parents, attrs = graph.kinds, graph.parents, graph.attrs
    for name, idx in graph.input_index.items():
        val = as_tensor(inputs[name])
        if not np.isfinite(val).all():
            raise NonFiniteError(f"input {name!r} has non-finite entries")
        values[idx] = val
    for i in range(len(kinds)):
        kind = kinds[i]
        if kind == "input" or kind == "const":
            continue
        values[i] = _eval_node(i, kind, attrs[i], [values[p] for p in parents[i]])
    out = values[graph.root]
    if not np.isfinite(out).all():
        raise NonFiniteError("graph output is non-finite")
    graph._forward_done = True
    return out


def _reduce_to(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape == (1, 1):
        return np.array([[g.sum()]])
    return g.sum(axis=0, keepdims=True)


def graph_backward(graph: Graph) -> Dict[str, np.ndarray]:
    """Reverse sweep from the scalar root; returns d(root)/d(input) per input name."""
    if not graph._forward_done:
        raise GraphError("forward pass has not been run")
    root = graph.root
    values, kinds, parents, attrs = graph.values, graph.kinds, graph.parents, graph.attrs
    if values[root].shape != (1, 1):
        raise GraphError(f"root must be scalar, got shape {values[root].shape}")
    needs = graph._needs_grad
    grads: List[Optional[np.ndarray]] = [None] * len(kinds)
    grads[root] = np.ones((1, 1))
    for i in range(root, -1, -1):
        g = grads[i]
        if g is None:
            continue
        kind = kinds[i]
        if kind == "input" or kind == "const":
            continue
        ps = parents[i]
        if kind == "matmul":
            a, b = values[ps[0]], values[ps[1]]
            contrib = [g @ b.T if needs[ps[0]] else None, a.T @ g if needs[ps[1]] else None]
        elif kind == "add":
            contrib = [g, _reduce_to(g, values[ps[1]].shape)]
        elif kind in ("relu", "pos"):
            contrib = [g * (values[ps[0]] > 0.0)]
        elif kind == "square":
            contrib = [2.0 * values[ps[0]] * g]
        elif kind == "scale":
            contrib = [attrs[i] * g]
        elif kind == "sum":
            contrib = [np.full(values[ps[0]].shape, g[0, 0])]
        elif kind == "concat":
            axis = attrs[i]
            sizes = np.cumsum([values[p].shape[axis] for p in ps])[:-1]
            contrib = np.split(g, sizes, axis=axis)
        elif kind == "slice":
            rows, cols = attrs[i]
            full = np.zeros(values[ps[0]].shape)
            full[rows, cols] = g
            contrib = [full]
        else:
            raise GraphError(f"node {i}: unknown op kind {kind!r}")
        for p, c in zip(ps, contrib):
            if not needs[p]:
                continue
            grads[p] = c if grads[p] is None else grads[p] + c
    graph.grads = grads
    out = {}
    for name, idx in graph.input_index.items():
        g = grads[idx]
        out[name] = np.zeros(values[idx].shape) if g is None else g
    return out


def finite_diff_grad(
    f: Callable[[np.ndarray], float],
    x,
    h: float = 1e-6,
    central: bool = False,
    fx: Optional[float] = None,
) -> np.ndarray:
    """Per-coordinate difference quotient of a scalar function.

    Forward differences by default; ``central=True`` is the grad-check variant.
    ``fx`` may supply an already known ``f(x)`` to save one evaluation.
    Returns an array shaped like ``x``.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    x = np.array(x, dtype=np.float64)
    flat = x.reshape(-1)
    grad = np.empty_like(flat)
    base = None if central else float(f(x) if fx is None else fx)
    if base is not None and not np.isfinite(base):
        raise NonFiniteError("f(x) is non-finite", coordinate=None)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = float(f(x))
        if central:
            flat[i] = orig - h
            down = float(f(x))
            flat[i] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NonFiniteError(f"f non-finite near coordinate {i}", coordinate=i)
            grad[i] = (up - down) / (2.0 * h)
        else:
            flat[i] = orig
            if not np.isfinite(up):
                raise NonFiniteError(f"f non-finite at coordinate {i}", coordinate=i)
            grad[i] = (up - base) / h
    return grad.reshape(x.shape)
