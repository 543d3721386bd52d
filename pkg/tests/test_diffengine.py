import math

import numpy as np
import pytest

from graspsynth.diffengine import (
    GraphBuilder,
    GraphInputError,
    GraphNumericsError,
)


def build_square():
    g = GraphBuilder()
    x = g.inp()
    return g.freeze([g.square(x)])


def test_evaluate_square():
    graph = build_square()
    assert graph.evaluate([3.0]) == 9.0


def test_evaluate_acos_at_one():
    g = GraphBuilder()
    x = g.inp()
    graph = g.freeze([g.acos(x)])
    assert graph.evaluate([1.0]) == 0.0


def test_evaluate_min0_times_y():
    g = GraphBuilder()
    x, y = g.inp(), g.inp()
    graph = g.freeze([g.mul(g.min0(x), y)])
    assert graph.evaluate([-2.0, 3.0]) == -6.0


def test_gradient_square():
    graph = build_square()
    assert graph.gradient([3.0])[0] == 6.0


def test_gradient_abs_min0():
    g = GraphBuilder()
    x = g.inp()
    graph = g.freeze([g.absval(g.min0(x))])
    assert graph.gradient([-2.0])[0] == -1.0
    # declared subgradient: exactly on the boundary nothing is pushed
    assert graph.gradient([0.0])[0] == 0.0


def test_dimension_mismatch_rejected():
    graph = build_square()
    with pytest.raises(GraphInputError):
        graph.evaluate([1.0, 2.0])


def test_nan_diagnostic_names_node():
    g = GraphBuilder()
    x = g.inp()
    graph = g.freeze([g.div(g.const(1.0), x)])
    with pytest.raises(GraphNumericsError) as err:
        graph.evaluate([0.0])
    assert "div" in str(err.value)


def test_evaluate_is_pure():
    rng = np.random.default_rng(7)
    graph, _ = _random_composite_graph(rng, n_inputs=6)
    x = rng.normal(size=6)
    a = graph.evaluate(x)
    b = graph.evaluate(x)
    assert a == b


def _random_composite_graph(rng, n_inputs):
    """A random composition using every differentiable op at least once."""
    g = GraphBuilder()
    xs = g.inputs(n_inputs)
    pool = list(xs)

    def pick():
        return pool[rng.integers(len(pool))]

    # keep arguments of domain-limited ops in range via tanh/square
    for _ in range(60):
        k = rng.integers(12)
        a, b = pick(), pick()
        if k == 0:
            n = g.add(a, b)
        elif k == 1:
            n = g.sub(a, b)
        elif k == 2:
            n = g.mul(g.tanh(a), g.tanh(b))
        elif k == 3:
            n = g.div(a, g.add(g.square(b), g.const(1.5)))
        elif k == 4:
            n = g.sin(a)
        elif k == 5:
            n = g.cos(a)
        elif k == 6:
            n = g.exp(g.tanh(a))
        elif k == 7:
            n = g.sqrt(g.add(g.square(a), g.const(0.3)))
        elif k == 8:
            n = g.acos(g.mul(g.tanh(a), g.const(0.9)))
        elif k == 9:
            n = g.fma(a, b, pick())
        elif k == 10:
            n = g.minimum(a, b)
        else:
            n = g.maximum(g.min0(a), g.neg(b))
        pool.append(n)

    out = g.sum_nodes(pool[-8:])
    return g.freeze([out]), g


def _central_difference(graph, x, h=1e-5):
    grad = np.zeros_like(x)
    for i in range(len(x)):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        grad[i] = (graph.evaluate(xp) - graph.evaluate(xm)) / (2 * h)
    return grad


def _skip_near_nonsmooth(graph, x, tol=1e-6):
    """True when some min/max/abs/min0 argument sits within tol of its kink."""
    values = graph._load_inputs(x)
    graph.forward(values)
    from graspsynth import diffengine as de

    for i in range(graph.n_nodes):
        op = graph.ops[i]
        if op in (de.OP_ABS, de.OP_MIN0, de.OP_RELU):
            if abs(values[graph.p0[i], 0]) < tol:
                return True
        elif op in (de.OP_MIN2, de.OP_MAX2):
            if abs(values[graph.p0[i], 0] - values[graph.p1[i], 0]) < tol:
                return True
        elif op == de.OP_ACOS:
            if abs(abs(values[graph.p0[i], 0]) - 1.0) < 1e-4:
                return True
    return False


def test_gradient_matches_finite_differences_random_20_input():
    rng = np.random.default_rng(42)
    graph, _ = _random_composite_graph(rng, n_inputs=20)
    checked = 0
    for _ in range(40):
        x = rng.normal(size=20)
        if _skip_near_nonsmooth(graph, x):
            continue
        ana = graph.gradient(x)
        num = _central_difference(graph, x)
        scale = np.maximum(np.abs(num), 1.0)
        assert np.max(np.abs(ana - num) / scale) < 1e-4
        checked += 1
    assert checked >= 20


@pytest.mark.parametrize("opname", [
    "add", "sub", "mul", "div", "neg", "abs", "sqrt", "square", "sin",
    "cos", "tanh", "exp", "acos", "min0", "min2", "max2", "relu", "fma",
])
def test_each_op_matches_finite_differences(opname):
    rng = np.random.default_rng(hash(opname) % 2**32)
    passed = 0
    for _ in range(100):
        g = GraphBuilder()
        if opname in ("add", "sub", "mul", "div", "min2", "max2"):
            a, b = g.inp(), g.inp()
            x = rng.normal(size=2)
            if opname == "div":
                x[1] = np.sign(x[1]) * (abs(x[1]) + 0.5)
            fn = {
                "add": g.add, "sub": g.sub, "mul": g.mul, "div": g.div,
                "min2": g.minimum, "max2": g.maximum,
            }[opname]
            out = fn(a, b)
            if opname in ("min2", "max2") and abs(x[0] - x[1]) < 1e-5:
                continue
        elif opname == "fma":
            a, b, c = g.inp(), g.inp(), g.inp()
            x = rng.normal(size=3)
            out = g.fma(a, b, c)
        else:
            a = g.inp()
            x = rng.normal(size=1)
            if opname == "sqrt":
                x = np.abs(x) + 0.1
            elif opname == "acos":
                x = np.clip(x, -0.99, 0.99)
            elif opname in ("abs", "min0", "relu"):
                if abs(x[0]) < 1e-5:
                    continue
            fn = {
                "neg": g.neg, "abs": g.absval, "sqrt": g.sqrt,
                "square": g.square, "sin": g.sin, "cos": g.cos,
                "tanh": g.tanh, "exp": g.exp, "acos": g.acos,
                "min0": g.min0, "relu": g.relu,
            }[opname]
            out = fn(a)
        graph = g.freeze([out])
        ana = graph.gradient(x)
        num = _central_difference(graph, np.asarray(x, dtype=float))
        scale = np.maximum(np.abs(num), 1.0)
        assert np.max(np.abs(ana - num) / scale) < 1e-4
        passed += 1
    assert passed >= 80


def test_gradscale_identity_forward_scaled_backward():
    g = GraphBuilder()
    x = g.inp()
    graph = g.freeze([g.square(g.grad_scale(x, 0.25))])
    assert graph.evaluate([3.0]) == 9.0
    assert graph.gradient([3.0])[0] == pytest.approx(6.0 * 0.25)


def test_min_reduce_ties_go_to_first():
    g = GraphBuilder()
    xs = g.inputs(4)
    graph = g.freeze([g.min_reduce(xs)])
    grad = graph.gradient([2.0, 1.0, 1.0, 3.0])
    assert list(grad) == [0.0, 1.0, 0.0, 0.0]


def test_output_adjoint_is_one_after_backward():
    graph = build_square()
    values = graph._load_inputs([2.0])
    graph.forward(values)
    adj = np.zeros_like(values)
    adj[graph.output_ids[0], 0] = 1.0
    graph.backward(values, adj)
    assert adj[graph.output_ids[0], 0] == 1.0


def test_batched_forward_matches_scalar():
    rng = np.random.default_rng(3)
    graph, _ = _random_composite_graph(rng, n_inputs=5)
    xs = rng.normal(size=(5, 8))
    values = graph.alloc(8)
    values[graph.input_ids] = xs
    graph.forward(values)
    out = values[graph.output_ids[0]]
    for c in range(8):
        assert out[c] == graph.evaluate(xs[:, c])


def test_affine_matches_numpy():
    rng = np.random.default_rng(11)
    W = rng.normal(size=(4, 6))
    b = rng.normal(size=4)
    g = GraphBuilder()
    xs = g.inputs(6)
    outs = g.affine(W, xs, b)
    graph = g.freeze([g.sum_nodes(outs)])
    x = rng.normal(size=6)
    assert graph.evaluate(x) == pytest.approx(float((W @ x + b).sum()), abs=1e-12)
