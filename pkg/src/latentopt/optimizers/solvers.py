"""The five day-ahead solvers and their shared adaptive descent loop."""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from ..autodiff import Graph, NonFiniteError, finite_diff_grad, graph_backward, graph_forward
from ..latent import LatentModelSet, decode, encode
from .linear import LinearModel
from .objective import append_objective
from .problem import (
    Costs,
    IterationLog,
    OptProblem,
    OptResult,
    SolverConfig,
    actual_rollout,
    cost,
    penalty_objective,
    project_actions,
)

METHODS = ("gt", "oriiden", "orisim", "optiden", "optsim")


class SolverError(RuntimeError):
    def __init__(self, iteration: int, msg: str = "objective became non-finite"):
        self.iteration = iteration
        super().__init__(f"iteration {iteration}: {msg}")


@dataclass
class DescentOutcome:
    x: np.ndarray  # best iterate seen
    value: float
    log: IterationLog
    stopped_early: bool


def adaptive_descent(
    x0: np.ndarray,
    evaluate: Callable[[np.ndarray, int], Tuple[float, np.ndarray]],
    config: SolverConfig,
    momentum: float = 0.0,
) -> DescentOutcome:
    """Generic loop ``x <- x - eta * direction + momentum * (x - x_prev)``.

    ``evaluate(x, k)`` returns the objective at ``x`` and a descent direction.
    After K1 consecutive objective increases the step is halved (and the
    streak restarts); after K2 consecutive changes no larger than ``tol`` the
    loop stops.  The best iterate seen is returned.
    """
    x = np.array(x0, dtype=np.float64)
    x_prev = x.copy()
    eta = config.step
    log = IterationLog()
    best_x, best_val = x.copy(), np.inf
    prev = None
    rising = flat = 0
    stopped = False
    for k in range(config.max_iter):
        try:
            val, direction = evaluate(x, k)
        except NonFiniteError as exc:
            raise SolverError(k, str(exc)) from exc
        val = float(val)
        if not np.isfinite(val) or not np.isfinite(direction).all():
            raise SolverError(k)
        if prev is not None:
            rising = rising + 1 if val > prev else 0
            flat = flat + 1 if abs(val - prev) <= config.tol else 0
        log.append(k, val, eta)
        if val < best_val:
            best_x, best_val = x.copy(), val
        prev = val
        if flat >= config.k2:
            stopped = True
            break
        if rising >= config.k1:
            eta *= 0.5
            rising = 0
        x_next = x - eta * direction
        if momentum:
            x_next += momentum * (x - x_prev)
        x_prev, x = x, x_next
    return DescentOutcome(best_x, best_val, log, stopped)


def zeroth_order_direction(f: Callable[[np.ndarray], float], x: np.ndarray, radius: float, rng: np.random.Generator):
    """One-sided two-point estimate ``(f(x + r u) - f(x)) / r * u`` with ``u ~ U[-1, 1]``."""
    fx = float(f(x))
    u = rng.uniform(-1.0, 1.0, size=x.shape)
    return fx, (float(f(x + radius * u)) - fx) / radius * u


def _finish(method, problem, simulator, a_dec, s_pred, outcome, t0, latent=None, calls=0) -> OptResult:
    a_proj = project_actions(a_dec, problem)
    s_act, act = actual_rollout(a_proj, problem, simulator)
    wall = time.monotonic() - t0
    n_iter = max(len(outcome.log), 1)
    return OptResult(
        method=method,
        decoded_actions=a_dec,
        projected_actions=a_proj,
        predicted_states=s_pred,
        actual_states=s_act,
        dec=cost(a_dec, s_pred, problem),
        act=act,
        log=outcome.log,
        stopped_early=outcome.stopped_early,
        wall_time=wall,
        latent_actions=latent,
        sim_calls=calls,
        sim_calls_per_iter=calls / n_iter,
        final_objective=outcome.value,
    )


def _mid_power(problem: OptProblem) -> np.ndarray:
    return 0.5 * (problem.action_lower + problem.action_upper)


def _counted(simulator):
    start = getattr(simulator, "calls", None)
    return lambda: (getattr(simulator, "calls", 0) - start) if start is not None else 0


# latent-space solvers


class LatentPlanGraph:
    """``a_lat (T x n_a) -> D_a -> rollout of F from E_s(s0) -> D_s -> objective`` as one graph."""

    def __init__(self, model: LatentModelSet, problem: OptProblem):
        T = problem.horizon
        g = Graph()
        x = g.input("a_lat")
        sc_a, sc_s = model.scalers["a"], model.scalers["s"]
        a_norm = model.decoders["a"].to_graph(g, x)
        a = g.add(g.matmul(a_norm, g.const(np.diag(sc_a.span[0]))), g.const(sc_a.low))
        d_lat = encode(model, "d", problem.disturbances)
        s_lat = g.const(encode(model, "s", problem.s0).reshape(1, -1))
        rows = []
        for t in range(T):
            z = g.concat([s_lat, g.slice(x, rows=t), g.const(d_lat[t : t + 1])], axis=1)
            s_lat = model.dynamics.to_graph(g, z)
            rows.append(s_lat)
        s_norm = model.decoders["s"].to_graph(g, g.concat(rows, axis=0))
        s = g.add(g.matmul(s_norm, g.const(np.diag(sc_s.span[0]))), g.const(sc_s.low))
        append_objective(g, a, s, problem)
        self.graph, self.actions_node, self.states_node = g, a, s

    def value_and_grad(self, a_lat: np.ndarray):
        val = graph_forward(self.graph, {"a_lat": a_lat})[0, 0]
        return val, graph_backward(self.graph)["a_lat"]

    def plan(self, a_lat: np.ndarray):
        graph_forward(self.graph, {"a_lat": a_lat})
        return self.graph.values[self.actions_node].copy(), self.graph.values[self.states_node].copy()


def initial_latent_actions(model: LatentModelSet, problem: OptProblem) -> np.ndarray:
    return encode(model, "a", _mid_power(problem))


def optiden_solve(problem: OptProblem, model: LatentModelSet, config: SolverConfig, simulator) -> OptResult:
    t0 = time.monotonic()
    plan = LatentPlanGraph(model, problem)
    outcome = adaptive_descent(initial_latent_actions(model, problem), lambda x, k: plan.value_and_grad(x), config)
    a_dec, s_pred = plan.plan(outcome.x)
    return _finish("optiden", problem, simulator, a_dec, s_pred, outcome, t0, latent=outcome.x)


def optsim_solve(problem: OptProblem, model: LatentModelSet, simulator, config: SolverConfig) -> OptResult:
    """Zeroth-order search over latent actions with the simulator as the black-box dynamics."""
    t0 = time.monotonic()
    calls = _counted(simulator)
    rng = np.random.default_rng(config.seed)

    def objective(x):
        a = decode(model, "a", x)
        return penalty_objective(a, simulator(problem.s0, a, problem.disturbances), problem)

    outcome = adaptive_descent(
        initial_latent_actions(model, problem),
        lambda x, k: zeroth_order_direction(objective, x, config.radius, rng),
        config,
        momentum=config.momentum,
    )
    a_dec = decode(model, "a", outcome.x)
    s_pred = simulator(problem.s0, a_dec, problem.disturbances)
    return _finish("optsim", problem, simulator, a_dec, s_pred, outcome, t0, latent=outcome.x, calls=calls())


# original-space solvers


def orisim_solve(problem: OptProblem, simulator, config: SolverConfig) -> OptResult:
    t0 = time.monotonic()
    calls = _counted(simulator)
    rng = np.random.default_rng(config.seed)

    def objective(a):
        return penalty_objective(a, simulator(problem.s0, a, problem.disturbances), problem)

    outcome = adaptive_descent(
        _mid_power(problem),
        lambda x, k: zeroth_order_direction(objective, x, config.radius, rng),
        config,
        momentum=config.momentum,
    )
    s_pred = simulator(problem.s0, outcome.x, problem.disturbances)
    return _finish("orisim", problem, simulator, outcome.x, s_pred, outcome, t0, calls=calls())


def linear_objective_and_grad(a: np.ndarray, problem: OptProblem, lin: LinearModel):
    """Penalised objective under the affine model and its exact gradient (adjoint sweep)."""
    s = lin.rollout(problem.s0, a, problem.disturbances)
    value = penalty_objective(a, s, problem)
    hi = np.maximum(s - problem.comfort_upper, 0.0)
    lo = np.maximum(problem.comfort_lower - s, 0.0)
    g_s = 2.0 * problem.temp_penalty[:, None] * (hi - lo)
    # row t of s is the state after a_t, so d s_t / d a_t = B
    mu = np.empty_like(g_s)
    acc = np.zeros(problem.zones)
    for t in range(problem.horizon - 1, -1, -1):
        acc = g_s[t] + lin.A.T @ acc
        mu[t] = acc
    grad = mu @ lin.B + (problem.prices * problem.dt)[:, None]
    grad += 2.0 * problem.action_penalty * (
        np.maximum(a - problem.action_upper, 0.0) - np.maximum(problem.action_lower - a, 0.0)
    )
    return value, grad, s


def oriiden_solve(problem: OptProblem, lin: LinearModel, config: SolverConfig, simulator) -> OptResult:
    t0 = time.monotonic()
    outcome = adaptive_descent(_mid_power(problem), lambda x, k: linear_objective_and_grad(x, problem, lin)[:2], config)
    s_pred = lin.rollout(problem.s0, outcome.x, problem.disturbances)
    return _finish("oriiden", problem, simulator, outcome.x, s_pred, outcome, t0)


def groundtruth_solve(problem: OptProblem, simulator, config: SolverConfig) -> OptResult:
    """Forward-difference gradient descent on the simulator: T*A + 1 rollouts per iteration."""
    t0 = time.monotonic()
    calls = _counted(simulator)

    def objective(a):
        return penalty_objective(a, simulator(problem.s0, a, problem.disturbances), problem)

    def evaluate(x, k):
        fx = objective(x)
        return fx, finite_diff_grad(objective, x, h=config.fd_step, fx=fx)

    outcome = adaptive_descent(_mid_power(problem), evaluate, config)
    s_pred = simulator(problem.s0, outcome.x, problem.disturbances)
    return _finish("gt", problem, simulator, outcome.x, s_pred, outcome, t0, calls=calls())


def solve(method: str, problem: OptProblem, config: SolverConfig, simulator, model: Optional[LatentModelSet] = None, lin: Optional[LinearModel] = None) -> OptResult:
    if method == "gt":
        return groundtruth_solve(problem, simulator, config)
    if method == "orisim":
        return orisim_solve(problem, simulator, config)
    if method == "oriiden":
        if lin is None:
            raise ValueError("oriiden needs an identified linear model")
        return oriiden_solve(problem, lin, config, simulator)
    if model is None:
        raise ValueError(f"{method} needs a trained latent model")
    if method == "optiden":
        return optiden_solve(problem, model, config, simulator)
    if method == "optsim":
        return optsim_solve(problem, model, simulator, config)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
