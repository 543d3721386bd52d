"""Scalar computation-graph reverse-mode differentiation.

The engine records scalar operations on a tape (a ``DualGraph``).  A graph is
built once through :class:`GraphBuilder`, frozen into flat arrays, and can then
be evaluated many times on fresh inputs.  Evaluation and the backward sweep run
through numba kernels and support batching: the same graph topology evaluated
on many independent input columns at once (used to process a whole candidate
population per step).

Non-smooth operations carry declared one-sided subgradients:

* ``min(0, x)`` has subgradient 0 at exactly 0 (a point sitting exactly on a
  surface is not pushed).
* binary ``min``/``max`` route the gradient to the first argument on ties.
* ``abs`` has subgradient 0 at 0.
* ``sqrt`` has subgradient 0 at 0 (zero-length offsets are not pushed in an
  arbitrary direction).
* ``acos`` clamps its gradient argument to ``[-1 + 1e-7, 1 - 1e-7]`` so the
  derivative stays finite at alignment; the value itself is exact.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

__all__ = [
    "GraphBuilder",
    "DualGraph",
    "Node",
    "GraphInputError",
    "GraphNumericsError",
]


class GraphInputError(ValueError):
    """Raised when supplied inputs do not match the graph's declared inputs."""


class GraphNumericsError(ArithmeticError):
    """Raised when a non-finite value appears mid-graph; names the node."""


# Opcodes. Kept dense and stable: the numba kernels switch on these.
OP_CONST = 0
OP_INPUT = 1
OP_ADD = 2
OP_SUB = 3
OP_MUL = 4
OP_DIV = 5
OP_NEG = 6
OP_ABS = 7
OP_SQRT = 8
OP_SQUARE = 9
OP_SIN = 10
OP_COS = 11
OP_TANH = 12
OP_EXP = 13
OP_ACOS = 14
OP_MIN0 = 15
OP_MIN2 = 16
OP_MAX2 = 17
OP_RELU = 18
OP_FMA = 19  # a * b + c
OP_GRADSCALE = 20  # identity forward, adjoint scaled by aux on the way back

_OP_NAMES = {
    OP_CONST: "const",
    OP_INPUT: "input",
    OP_ADD: "add",
    OP_SUB: "sub",
    OP_MUL: "mul",
    OP_DIV: "div",
    OP_NEG: "neg",
    OP_ABS: "abs",
    OP_SQRT: "sqrt",
    OP_SQUARE: "square",
    OP_SIN: "sin",
    OP_COS: "cos",
    OP_TANH: "tanh",
    OP_EXP: "exp",
    OP_ACOS: "acos",
    OP_MIN0: "min0",
    OP_MIN2: "min2",
    OP_MAX2: "max2",
    OP_RELU: "relu",
    OP_FMA: "fma",
    OP_GRADSCALE: "gradscale",
}

_ACOS_CLAMP = 1.0 - 1e-7
_SQRT_FLOOR = 1e-24


@njit(cache=True, error_model="numpy")
def _forward(ops, p0, p1, p2, aux, values):
    n, ncols = values.shape
    for i in range(n):
        op = ops[i]
        if op == OP_CONST:
            for c in range(ncols):
                values[i, c] = aux[i]
        elif op == OP_INPUT:
            pass  # caller preloaded this row
        elif op == OP_ADD:
            a, b = p0[i], p1[i]
            for c in range(ncols):
                values[i, c] = values[a, c] + values[b, c]
        elif op == OP_SUB:
            a, b = p0[i], p1[i]
            for c in range(ncols):
                values[i, c] = values[a, c] - values[b, c]
        elif op == OP_MUL:
            a, b = p0[i], p1[i]
            for c in range(ncols):
                values[i, c] = values[a, c] * values[b, c]
        elif op == OP_DIV:
            a, b = p0[i], p1[i]
            for c in range(ncols):
                values[i, c] = values[a, c] / values[b, c]
        elif op == OP_NEG:
            a = p0[i]
            for c in range(ncols):
                values[i, c] = -values[a, c]
        elif op == OP_ABS:
            a = p0[i]
            for c in range(ncols):
                values[i, c] = abs(values[a, c])
        elif op == OP_SQRT:
            a = p0[i]
            for c in range(ncols):
                values[i, c] = math.sqrt(values[a, c])
        elif op == OP_SQUARE:
            a = p0[i]
            for c in range(ncols):
                v = values[a, c]
                values[i, c] = v * v
        elif op == OP_SIN:
            a = p0[i]
            for c in range(ncols):
                values[i, c] = math.sin(values[a, c])
        elif op == OP_COS:
            a = p0[i]
            for c in range(ncols):
                values[i, c] = math.cos(values[a, c])
        elif op == OP_TANH:
            a = p0[i]
            for c in range(ncols):
                values[i, c] = math.tanh(values[a, c])
        elif op == OP_EXP:
            a = p0[i]
            for c in range(ncols):
                values[i, c] = math.exp(values[a, c])
        elif op == OP_ACOS:
            a = p0[i]
            for c in range(ncols):
                v = values[a, c]
                if v > 1.0:
                    v = 1.0
                elif v < -1.0:
                    v = -1.0
                values[i, c] = math.acos(v)
        elif op == OP_MIN0:
            a = p0[i]
            for c in range(ncols):
                v = values[a, c]
                values[i, c] = v if v < 0.0 else 0.0
        elif op == OP_MIN2:
            a, b = p0[i], p1[i]
            for c in range(ncols):
                va, vb = values[a, c], values[b, c]
                values[i, c] = va if va <= vb else vb
        elif op == OP_MAX2:
            a, b = p0[i], p1[i]
            for c in range(ncols):
                va, vb = values[a, c], values[b, c]
                values[i, c] = va if va >= vb else vb
        elif op == OP_RELU:
            a = p0[i]
            for c in range(ncols):
                v = values[a, c]
                values[i, c] = v if v > 0.0 else 0.0
        elif op == OP_FMA:
            a, b, d = p0[i], p1[i], p2[i]
            for c in range(ncols):
                values[i, c] = values[a, c] * values[b, c] + values[d, c]
        elif op == OP_GRADSCALE:
            a = p0[i]
            for c in range(ncols):
                values[i, c] = values[a, c]


@njit(cache=True, error_model="numpy")
def _backward(ops, p0, p1, p2, aux, values, adjoints):
    n, ncols = values.shape
    for i in range(n - 1, -1, -1):
        op = ops[i]
        if op == OP_CONST or op == OP_INPUT:
            continue
        a = p0[i]
        if op == OP_ADD:
            b = p1[i]
            for c in range(ncols):
                g = adjoints[i, c]
                adjoints[a, c] += g
                adjoints[b, c] += g
        elif op == OP_SUB:
            b = p1[i]
            for c in range(ncols):
                g = adjoints[i, c]
                adjoints[a, c] += g
                adjoints[b, c] -= g
        elif op == OP_MUL:
            b = p1[i]
            for c in range(ncols):
                g = adjoints[i, c]
                adjoints[a, c] += g * values[b, c]
                adjoints[b, c] += g * values[a, c]
        elif op == OP_DIV:
            b = p1[i]
            for c in range(ncols):
                g = adjoints[i, c]
                vb = values[b, c]
                adjoints[a, c] += g / vb
                adjoints[b, c] -= g * values[a, c] / (vb * vb)
        elif op == OP_NEG:
            for c in range(ncols):
                adjoints[a, c] -= adjoints[i, c]
        elif op == OP_ABS:
            for c in range(ncols):
                v = values[a, c]
                if v > 0.0:
                    adjoints[a, c] += adjoints[i, c]
                elif v < 0.0:
                    adjoints[a, c] -= adjoints[i, c]
        elif op == OP_SQRT:
            for c in range(ncols):
                v = values[a, c]
                if v > _SQRT_FLOOR:
                    adjoints[a, c] += adjoints[i, c] * 0.5 / values[i, c]
        elif op == OP_SQUARE:
            for c in range(ncols):
                adjoints[a, c] += adjoints[i, c] * 2.0 * values[a, c]
        elif op == OP_SIN:
            for c in range(ncols):
                adjoints[a, c] += adjoints[i, c] * math.cos(values[a, c])
        elif op == OP_COS:
            for c in range(ncols):
                adjoints[a, c] -= adjoints[i, c] * math.sin(values[a, c])
        elif op == OP_TANH:
            for c in range(ncols):
                t = values[i, c]
                adjoints[a, c] += adjoints[i, c] * (1.0 - t * t)
        elif op == OP_EXP:
            for c in range(ncols):
                adjoints[a, c] += adjoints[i, c] * values[i, c]
        elif op == OP_ACOS:
            for c in range(ncols):
                v = values[a, c]
                if v > _ACOS_CLAMP:
                    v = _ACOS_CLAMP
                elif v < -_ACOS_CLAMP:
                    v = -_ACOS_CLAMP
                adjoints[a, c] -= adjoints[i, c] / math.sqrt(1.0 - v * v)
        elif op == OP_MIN0:
            for c in range(ncols):
                if values[a, c] < 0.0:
                    adjoints[a, c] += adjoints[i, c]
        elif op == OP_MIN2:
            b = p1[i]
            for c in range(ncols):
                if values[a, c] <= values[b, c]:
                    adjoints[a, c] += adjoints[i, c]
                else:
                    adjoints[b, c] += adjoints[i, c]
        elif op == OP_MAX2:
            b = p1[i]
            for c in range(ncols):
                if values[a, c] >= values[b, c]:
                    adjoints[a, c] += adjoints[i, c]
                else:
                    adjoints[b, c] += adjoints[i, c]
        elif op == OP_RELU:
            for c in range(ncols):
                if values[a, c] > 0.0:
                    adjoints[a, c] += adjoints[i, c]
        elif op == OP_FMA:
            b, d = p1[i], p2[i]
            for c in range(ncols):
                g = adjoints[i, c]
                adjoints[a, c] += g * values[b, c]
                adjoints[b, c] += g * values[a, c]
                adjoints[d, c] += g
        elif op == OP_GRADSCALE:
            k = aux[i]
            for c in range(ncols):
                adjoints[a, c] += adjoints[i, c] * k


class Node:
    """Handle to one scalar node of a graph under construction."""

    __slots__ = ("builder", "idx")

    def __init__(self, builder: "GraphBuilder", idx: int):
        self.builder = builder
        self.idx = idx

    def _coerce(self, other) -> "Node":
        if isinstance(other, Node):
            return other
        return self.builder.const(float(other))

    def __add__(self, other):
        return self.builder.add(self, self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.builder.sub(self, self._coerce(other))

    def __rsub__(self, other):
        return self.builder.sub(self._coerce(other), self)

    def __mul__(self, other):
        return self.builder.mul(self, self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self.builder.div(self, self._coerce(other))

    def __rtruediv__(self, other):
        return self.builder.div(self._coerce(other), self)

    def __neg__(self):
        return self.builder.neg(self)


class GraphBuilder:
    """Records scalar operations in topological order, then freezes them."""

    def __init__(self):
        self._ops: list[int] = []
        self._p0: list[int] = []
        self._p1: list[int] = []
        self._p2: list[int] = []
        self._aux: list[float] = []
        self._inputs: list[int] = []
        self._const_cache: dict[float, int] = {}

    def __len__(self) -> int:
        return len(self._ops)

    def _emit(self, op: int, a: int = -1, b: int = -1, d: int = -1, aux: float = 0.0) -> Node:
        idx = len(self._ops)
        self._ops.append(op)
        self._p0.append(a)
        self._p1.append(b)
        self._p2.append(d)
        self._aux.append(aux)
        return Node(self, idx)

    def inp(self) -> Node:
        node = self._emit(OP_INPUT)
        self._inputs.append(node.idx)
        return node

    def inputs(self, count: int) -> list[Node]:
        return [self.inp() for _ in range(count)]

    def const(self, value: float) -> Node:
        value = float(value)
        cached = self._const_cache.get(value)
        if cached is not None:
            return Node(self, cached)
        node = self._emit(OP_CONST, aux=value)
        self._const_cache[value] = node.idx
        return node

    def add(self, a: Node, b: Node) -> Node:
        return self._emit(OP_ADD, a.idx, b.idx)

    def sub(self, a: Node, b: Node) -> Node:
        return self._emit(OP_SUB, a.idx, b.idx)

    def mul(self, a: Node, b: Node) -> Node:
        return self._emit(OP_MUL, a.idx, b.idx)

    def div(self, a: Node, b: Node) -> Node:
        return self._emit(OP_DIV, a.idx, b.idx)

    def neg(self, a: Node) -> Node:
        return self._emit(OP_NEG, a.idx)

    def absval(self, a: Node) -> Node:
        return self._emit(OP_ABS, a.idx)

    def sqrt(self, a: Node) -> Node:
        return self._emit(OP_SQRT, a.idx)

    def square(self, a: Node) -> Node:
        return self._emit(OP_SQUARE, a.idx)

    def sin(self, a: Node) -> Node:
        return self._emit(OP_SIN, a.idx)

    def cos(self, a: Node) -> Node:
        return self._emit(OP_COS, a.idx)

    def tanh(self, a: Node) -> Node:
        return self._emit(OP_TANH, a.idx)

    def exp(self, a: Node) -> Node:
        return self._emit(OP_EXP, a.idx)

    def acos(self, a: Node) -> Node:
        return self._emit(OP_ACOS, a.idx)

    def min0(self, a: Node) -> Node:
        """min(0, a) with subgradient 0 at a == 0."""
        return self._emit(OP_MIN0, a.idx)

    def minimum(self, a: Node, b: Node) -> Node:
        return self._emit(OP_MIN2, a.idx, b.idx)

    def maximum(self, a: Node, b: Node) -> Node:
        return self._emit(OP_MAX2, a.idx, b.idx)

    def relu(self, a: Node) -> Node:
        return self._emit(OP_RELU, a.idx)

    def fma(self, a: Node, b: Node, c: Node) -> Node:
        """a * b + c as a single node."""
        return self._emit(OP_FMA, a.idx, b.idx, c.idx)

    def grad_scale(self, a: Node, scale: float) -> Node:
        """Identity in value; multiplies the adjoint flowing through by scale."""
        return self._emit(OP_GRADSCALE, a.idx, aux=float(scale))

    # Convenience compounds used all over the losses and kinematics.

    def dot(self, xs: list[Node], ys: list[Node]) -> Node:
        if len(xs) != len(ys):
            raise GraphInputError("dot: length mismatch")
        acc = self.mul(xs[0], ys[0])
        for x, y in zip(xs[1:], ys[1:]):
            acc = self.fma(x, y, acc)
        return acc

    def affine(self, weights: np.ndarray, xs: list[Node], bias: np.ndarray) -> list[Node]:
        """weights @ xs + bias with constant weights, one FMA chain per row."""
        weights = np.asarray(weights, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        out = []
        for r in range(weights.shape[0]):
            acc = self.const(float(bias[r]))
            for j, x in enumerate(xs):
                wrj = float(weights[r, j])
                if wrj != 0.0:
                    acc = self.fma(self.const(wrj), x, acc)
            out.append(acc)
        return out

    def norm3(self, dx: Node, dy: Node, dz: Node) -> Node:
        s = self.fma(dx, dx, self.fma(dy, dy, self.square(dz)))
        return self.sqrt(s)

    def min_reduce(self, xs: list[Node]) -> Node:
        """Binary min tree; ties route the subgradient to the earliest element."""
        if not xs:
            raise GraphInputError("min_reduce of empty list")
        level = list(xs)
        while len(level) > 1:
            nxt = []
            for i in range(0, len(level) - 1, 2):
                nxt.append(self.minimum(level[i], level[i + 1]))
            if len(level) % 2 == 1:
                nxt.append(level[-1])
            level = nxt
        return level[0]

    def sum_nodes(self, xs: list[Node]) -> Node:
        if not xs:
            return self.const(0.0)
        acc = xs[0]
        for x in xs[1:]:
            acc = self.add(acc, x)
        return acc

    def freeze(self, outputs: list[Node]) -> "DualGraph":
        return DualGraph(
            ops=np.asarray(self._ops, dtype=np.int16),
            p0=np.asarray(self._p0, dtype=np.int32),
            p1=np.asarray(self._p1, dtype=np.int32),
            p2=np.asarray(self._p2, dtype=np.int32),
            aux=np.asarray(self._aux, dtype=np.float64),
            input_ids=np.asarray(self._inputs, dtype=np.int64),
            output_ids=np.asarray([o.idx for o in outputs], dtype=np.int64),
        )


class DualGraph:
    """Frozen, topologically ordered scalar graph with value/adjoint storage.

    Construction goes through :class:`GraphBuilder`; nodes always reference
    earlier nodes, so topological order holds by construction.
    """

    def __init__(self, ops, p0, p1, p2, aux, input_ids, output_ids):
        self.ops = ops
        self.p0 = p0
        self.p1 = p1
        self.p2 = p2
        self.aux = aux
        self.input_ids = input_ids
        self.output_ids = output_ids
        self.n_nodes = len(ops)

    @property
    def n_inputs(self) -> int:
        return len(self.input_ids)

    def alloc(self, ncols: int = 1) -> np.ndarray:
        return np.zeros((self.n_nodes, ncols), dtype=np.float64)

    def forward(self, values: np.ndarray) -> None:
        """Run the forward sweep in place; input rows must be preloaded."""
        _forward(self.ops, self.p0, self.p1, self.p2, self.aux, values)

    def backward(self, values: np.ndarray, adjoints: np.ndarray) -> None:
        """Accumulate adjoints in place; seed rows must be preloaded."""
        _backward(self.ops, self.p0, self.p1, self.p2, self.aux, values, adjoints)

    def _load_inputs(self, inputs) -> np.ndarray:
        inputs = np.asarray(inputs, dtype=np.float64).reshape(-1)
        if inputs.shape[0] != self.n_inputs:
            raise GraphInputError(
                f"graph expects {self.n_inputs} inputs, got {inputs.shape[0]}"
            )
        values = self.alloc(1)
        values[self.input_ids, 0] = inputs
        return values

    def _check_finite(self, values: np.ndarray) -> None:
        if np.isfinite(values).all():
            return
        bad = np.where(~np.isfinite(values[:, 0]))[0]
        i = int(bad[0])
        name = _OP_NAMES.get(int(self.ops[i]), "?")
        raise GraphNumericsError(
            f"non-finite value {values[i, 0]!r} at node {i} (op '{name}')"
        )

    def evaluate(self, inputs) -> float:
        """Value of the (single) output node for the given input vector."""
        if len(self.output_ids) != 1:
            raise GraphInputError("evaluate requires a single-output graph")
        values = self._load_inputs(inputs)
        self.forward(values)
        self._check_finite(values)
        return float(values[self.output_ids[0], 0])

    def gradient(self, inputs) -> np.ndarray:
        """d(output)/d(input) for every input, via one reverse sweep."""
        if len(self.output_ids) != 1:
            raise GraphInputError("gradient requires a single-output graph")
        values = self._load_inputs(inputs)
        self.forward(values)
        self._check_finite(values)
        adjoints = np.zeros_like(values)
        adjoints[self.output_ids[0], 0] = 1.0
        self.backward(values, adjoints)
        return adjoints[self.input_ids, 0].copy()
