import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentopt.autodiff import (
    Graph,
    GraphError,
    GraphShapeError,
    NonFiniteError,
    as_tensor,
    finite_diff_grad,
    graph_backward,
    graph_forward,
)


def rel_err(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-12)


def test_relu_forward():
    g = Graph()
    g.relu(g.input("x"))
    np.testing.assert_array_equal(graph_forward(g, {"x": [-1.0, 2.0]}).ravel(), [0.0, 2.0])


def test_identity_matmul():
    g = Graph()
    g.matmul(g.const(np.eye(2)), g.input("x"))
    np.testing.assert_array_equal(graph_forward(g, {"x": [3.0, 4.0]}).ravel(), [3.0, 4.0])


def test_hinge_square_sum():
    g = Graph()
    g.sum(g.square(g.pos(g.add(g.input("x"), g.const(-1.0)))))
    assert graph_forward(g, {"x": [0.0, 3.0]})[0, 0] == 4.0


def test_backward_square_and_relu():
    g = Graph()
    g.sum(g.square(g.input("x")))
    graph_forward(g, {"x": [1.0, -2.0]})
    np.testing.assert_array_equal(graph_backward(g)["x"].ravel(), [2.0, -4.0])

    h = Graph()
    h.sum(h.relu(h.input("x")))
    graph_forward(h, {"x": [-1.0, 2.0]})
    np.testing.assert_array_equal(graph_backward(h)["x"].ravel(), [0.0, 1.0])


def test_relu_kink_has_zero_subgradient():
    g = Graph()
    g.sum(g.relu(g.input("x")))
    graph_forward(g, {"x": [0.0]})
    assert graph_backward(g)["x"][0, 0] == 0.0


def test_shape_error_names_node():
    g = Graph()
    node = g.matmul(g.input("a"), g.input("b"))
    with pytest.raises(GraphShapeError) as info:
        graph_forward(g, {"a": np.ones((2, 3)), "b": np.ones((2, 3))})
    assert info.value.node == node and info.value.kind == "matmul"


def test_backward_requires_scalar_root_and_forward():
    g = Graph()
    g.relu(g.input("x"))
    with pytest.raises(GraphError):
        graph_backward(g)
    graph_forward(g, {"x": [1.0, 2.0]})
    with pytest.raises(GraphError):
        graph_backward(g)


def test_unbound_and_nonfinite_inputs():
    g = Graph()
    g.sum(g.input("x"))
    with pytest.raises(GraphError):
        graph_forward(g, {})
    with pytest.raises(NonFiniteError):
        graph_forward(g, {"x": [np.nan]})


def test_parents_precede_children():
    g = Graph()
    x = g.input("x")
    with pytest.raises(ValueError):
        g._add("relu", (x + 1,))


def test_finite_diff_examples():
    np.testing.assert_allclose(finite_diff_grad(lambda x: x.sum(), np.zeros(2), h=1e-6), [1.0, 1.0], atol=1e-9)
    np.testing.assert_allclose(finite_diff_grad(lambda x: x[0] ** 2, np.array([3.0]), h=1e-6), [6.0], atol=1e-5)


def test_finite_diff_reports_coordinate():
    with pytest.raises(NonFiniteError) as info:
        finite_diff_grad(lambda x: np.inf if x[1] > 0.5 else 0.0, np.zeros(3), h=1.0)
    assert info.value.coordinate == 1


def test_finite_diff_known_value_saves_a_call():
    calls = []

    def f(x):
        calls.append(1)
        return float(x.sum())

    finite_diff_grad(f, np.zeros(4), fx=0.0)
    assert len(calls) == 4


def _mlp_graph(rng, n_in=5):
    g = Graph()
    x = g.input("x")
    h = g.dense(x, g.input("W0"), g.input("b0"), activation=True)
    y = g.dense(h, g.input("W1"), g.input("b1"), activation=False)
    g.sum(g.square(y))
    params = {
        "x": rng.normal(size=(1, n_in)),
        "W0": rng.normal(size=(n_in, 7)),
        "b0": rng.normal(size=(1, 7)),
        "W1": rng.normal(size=(7, 3)),
        "b1": rng.normal(size=(1, 3)),
    }
    return g, params


def _check_against_fd(g, inputs, tol):
    graph_forward(g, inputs)
    grads = graph_backward(g)
    for name, value in inputs.items():

        def f(v, name=name):
            return graph_forward(g, {**inputs, name: v})[0, 0]

        fd = finite_diff_grad(f, value, h=1e-5, central=True)
        assert rel_err(grads[name], fd) < tol, name


def test_two_layer_mlp_gradient():
    g, params = _mlp_graph(np.random.default_rng(0))
    _check_against_fd(g, params, 1e-6)


OPS = ["matmul", "add_row", "add_scalar", "relu", "pos", "square", "scale", "sum", "concat0", "concat1", "slice"]


def _op_graph(op, rng):
    g = Graph()
    x = g.input("x")
    inputs = {"x": rng.normal(size=(3, 4))}
    # keep inputs away from the ReLU kink so the difference quotient is smooth
    inputs["x"] += np.sign(inputs["x"]) * 0.05
    if op == "matmul":
        y = g.matmul(x, g.input("w"))
        inputs["w"] = rng.normal(size=(4, 2))
    elif op == "add_row":
        y = g.add(x, g.input("b"))
        inputs["b"] = rng.normal(size=(1, 4))
    elif op == "add_scalar":
        y = g.add(x, g.input("b"))
        inputs["b"] = rng.normal(size=(1, 1))
    elif op == "relu":
        y = g.relu(x)
    elif op == "pos":
        y = g.pos(x)
    elif op == "square":
        y = g.square(x)
    elif op == "scale":
        y = g.scale(x, -1.7)
    elif op == "sum":
        y = g.sum(x)
    elif op == "concat0":
        y = g.concat([x, g.square(x)], axis=0)
    elif op == "concat1":
        y = g.concat([g.input("z"), x], axis=1)
        inputs["z"] = rng.normal(size=(3, 2))
    else:
        y = g.slice(x, rows=slice(1, 3), cols=2)
    # a fixed random projection makes every output entry matter
    w = rng.normal(size=(1, 1)) if op == "sum" else None
    out = g.scale(y, float(w[0, 0])) if w is not None else y
    g.sum(g.square(g.add(out, g.const(0.3))))
    return g, inputs


@pytest.mark.parametrize("op", OPS)
def test_each_op_matches_central_differences(op):
    for seed in range(100):
        g, inputs = _op_graph(op, np.random.default_rng(seed))
        _check_against_fd(g, inputs, 1e-6)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=8))
def test_forward_deterministic_and_pos_nonnegative(xs):
    g = Graph()
    p = g.pos(g.input("x"))
    g.sum(p)
    a = graph_forward(g, {"x": xs}).copy()
    vals = g.values[p].copy()
    b = graph_forward(g, {"x": xs})
    assert np.array_equal(a, b)
    assert (vals >= 0).all()


def test_as_tensor_promotes_shapes():
    assert as_tensor(3.0).shape == (1, 1)
    assert as_tensor([1.0, 2.0]).shape == (2, 1)
    with pytest.raises(ValueError):
        as_tensor(np.zeros((2, 2, 2)))


def test_gradients_skip_constants_and_unused_inputs():
    g = Graph()
    x = g.input("x")
    g.input("unused")
    c = g.const(np.ones((2, 1)))
    g.sum(g.add(g.square(x), c))
    graph_forward(g, {"x": [1.0, 2.0], "unused": [5.0]})
    grads = graph_backward(g)
    assert g.grads[c] is None
    np.testing.assert_array_equal(grads["unused"], np.zeros((1, 1)))
