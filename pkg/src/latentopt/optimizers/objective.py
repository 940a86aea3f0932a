"""The penalised scheduling cost written as network layers.

Each cost term is one of three shapes, each a single layer
``z = phi(W z_prev + b)``:

=========================  ======  ========  ===========  =========
term                       phi     W         input        output
=========================  ======  ========  ===========  =========
``y = w x``                 --     ``w``     ``x``        ``y``
``y = w x^2``               --     ``sqrt w``  ``x``      ``sqrt y``
``y = w [x - x0, 0]_+^2``   ReLU   ``sqrt w``  ``x - x0`` ``sqrt y``
=========================  ======  ========  ===========  =========

The squared outputs are then squared and summed.
"""
from __future__ import annotations

import numpy as np

from ..autodiff import Graph
from .problem import OptProblem


class ObjectiveError(ValueError):
    pass


def _sqrt_weight(w):
    w = np.asarray(w, dtype=np.float64)
    if (w < 0).any():
        raise ObjectiveError("squared-term weights must be nonnegative")
    return np.sqrt(w)


def linear_term(g: Graph, x: int, w) -> int:
    """``y = w x``; a scalar weight is a scale node, a matrix weight a matmul."""
    if np.ndim(w) == 0:
        return g.scale(x, float(w))
    return g.matmul(g.const(w), x)


def square_term(g: Graph, x: int, w) -> int:
    """``y = w x^2`` as ``(sqrt(w) x)^2``."""
    r = _sqrt_weight(w)
    z = g.scale(x, float(r)) if r.ndim == 0 else g.matmul(g.const(r), x)
    return g.square(z)


def hinge_square_term(g: Graph, x: int, x0, w) -> int:
    """``y = w [x - x0, 0]_+^2`` as ``ReLU(sqrt(w) (x - x0))^2``."""
    r = _sqrt_weight(w)
    shifted = g.add(x, g.const(-np.asarray(x0, dtype=np.float64)))
    z = g.scale(shifted, float(r)) if r.ndim == 0 else g.matmul(g.const(r), shifted)
    return g.square(g.pos(z))


def append_objective(g: Graph, a: int, s: int, problem: OptProblem) -> int:
    """Append the scalar penalised objective for action node ``a`` (T x A) and state node ``s`` (T x Z)."""
    rho = problem.action_penalty
    if rho < 0:
        raise ObjectiveError("action penalty must be nonnegative")
    diag_p = np.diag(problem.temp_penalty)
    price_row = (problem.prices * problem.dt).reshape(1, -1)

    power = g.sum(linear_term(g, a, price_row))
    too_hot = g.sum(hinge_square_term(g, s, problem.comfort_upper, diag_p))
    too_cold = g.sum(hinge_square_term(g, g.scale(s, -1.0), -problem.comfort_lower, diag_p))
    over = g.sum(hinge_square_term(g, a, problem.action_upper, rho))
    under = g.sum(hinge_square_term(g, g.scale(a, -1.0), -problem.action_lower, rho))
    total = g.add(g.add(g.add(g.add(power, too_hot), too_cold), over), under)
    g.set_output(total)
    return total


def build_objective_layer(problem: OptProblem) -> Graph:
    """Standalone objective graph with inputs ``a`` and ``s``."""
    g = Graph()
    append_objective(g, g.input("a"), g.input("s"), problem)
    return g
