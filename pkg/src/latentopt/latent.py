"""Latent state/action/disturbance autoencoders with a latent dynamics net.

Three independent autoencoders compress the zone temperatures, HVAC powers
and disturbances.  A fourth MLP maps ``(s~_t, a~_t, d~_t)`` to ``s~_{t+1}``.
All four are trained jointly on a weighted sum of the one-step prediction
error (through the state decoder) and the reconstruction error of the three
autoencoders, computed on min-max normalised data.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .autodiff import Graph, NonFiniteError, graph_backward, graph_forward
from .thermal import Trajectory

GROUPS = ("s", "a", "d")


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"training loss became non-finite at epoch {epoch}")


class NotFittedError(RuntimeError):
    pass


@dataclass
class MLP:
    """ReLU on hidden layers, identity on the output layer."""

    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias per weight matrix")
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            if b.shape != (1, W.shape[1]):
                raise ValueError(f"layer {k}: bias shape {b.shape} vs weight {W.shape}")
            if k and self.weights[k - 1].shape[1] != W.shape[0]:
                raise ValueError(f"layer {k}: incompatible with previous layer")

    @classmethod
    def init(cls, widths: Sequence[int], rng: np.random.Generator) -> "MLP":
        Ws, bs = [], []
        for n_in, n_out in zip(widths[:-1], widths[1:]):
            Ws.append(rng.normal(0.0, np.sqrt(2.0 / n_in), (n_in, n_out)))
            bs.append(np.zeros((1, n_out)))
        return cls(Ws, bs)

    @property
    def widths(self) -> List[int]:
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]

    @property
    def n_params(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        h = x
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ W + b
            if k < last:
                h = np.maximum(h, 0.0)
        return h

    def to_graph(self, g: Graph, x: int, prefix: Optional[str] = None) -> int:
        """Append this network to ``g``; parameters become named inputs, or constants if ``prefix`` is None."""
        last = len(self.weights) - 1
        h = x
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            if prefix is None:
                Wn, bn = g.const(W), g.const(b)
            else:
                Wn, bn = g.input(f"{prefix}.W{k}"), g.input(f"{prefix}.b{k}")
            h = g.dense(h, Wn, bn, activation=k < last)
        return h

    def param_dict(self, prefix: str) -> Dict[str, np.ndarray]:
        out = {}
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{prefix}.W{k}"] = W
            out[f"{prefix}.b{k}"] = b
        return out


@dataclass
class MinMaxScaler:
    low: np.ndarray
    span: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "MinMaxScaler":
        low = x.min(axis=0)
        span = x.max(axis=0) - low
        span = np.where(span > 0, span, 1.0)
        return cls(low.reshape(1, -1), span.reshape(1, -1))

    def transform(self, x):
        return (x - self.low) / self.span

    def inverse(self, z):
        return z * self.span + self.low


@dataclass
class TrainConfig:
    omega: float = 0.5
    learning_rate: float = 1e-3
    epochs: int = 300
    batch_size: int = 64
    seed: int = 0
    latent_dims: Tuple[int, int, int] = (2, 3, 4)
    state_hidden: Tuple[int, ...] = (32, 16)
    action_hidden: Tuple[int, ...] = (32, 16)
    disturbance_hidden: Tuple[int, ...] = (64, 32)
    dynamics_hidden: Tuple[int, ...] = (32, 32)

    def __post_init__(self):
        if not 0.0 < self.omega < 1.0:
            raise ValueError("omega must lie in (0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("batch size and learning rate must be positive")


@dataclass
class LatentModelSet:
    encoders: Dict[str, MLP]
    decoders: Dict[str, MLP]
    dynamics: MLP
    scalers: Dict[str, Optional[MinMaxScaler]] = field(default_factory=lambda: {g: None for g in GROUPS})

    @classmethod
    def create(cls, dims: Tuple[int, int, int], config: TrainConfig) -> "LatentModelSet":
        """``dims`` are the original (Z, A, D); latent sizes come from ``config``."""
        rng = np.random.default_rng(config.seed)
        hidden = {"s": config.state_hidden, "a": config.action_hidden, "d": config.disturbance_hidden}
        enc, dec = {}, {}
        for grp, n, m in zip(GROUPS, dims, config.latent_dims):
            widths = [n, *hidden[grp], m]
            enc[grp] = MLP.init(widths, rng)
            dec[grp] = MLP.init(widths[::-1], rng)
        n_s, n_a, n_d = config.latent_dims
        dyn = MLP.init([n_s + n_a + n_d, *config.dynamics_hidden, n_s], rng)
        return cls(enc, dec, dyn)

    @property
    def original_dims(self) -> Tuple[int, int, int]:
        return tuple(self.encoders[g].widths[0] for g in GROUPS)

    @property
    def latent_dims(self) -> Tuple[int, int, int]:
        return tuple(self.encoders[g].widths[-1] for g in GROUPS)

    @property
    def reduction_ratio(self) -> float:
        return sum(self.latent_dims) / sum(self.original_dims)

    @property
    def fitted(self) -> bool:
        return all(self.scalers.get(g) is not None for g in GROUPS)

    def fit_scalers(self, traj: Trajectory) -> None:
        self.scalers = {
            "s": MinMaxScaler.fit(traj.states),
            "a": MinMaxScaler.fit(traj.actions),
            "d": MinMaxScaler.fit(traj.disturbances),
        }

    def params(self) -> Dict[str, np.ndarray]:
        out = {}
        for grp in GROUPS:
            out.update(self.encoders[grp].param_dict(f"E_{grp}"))
            out.update(self.decoders[grp].param_dict(f"D_{grp}"))
        out.update(self.dynamics.param_dict("F"))
        return out

    def set_params(self, params: Dict[str, np.ndarray]) -> None:
        nets = [(f"E_{g}", self.encoders[g]) for g in GROUPS]
        nets += [(f"D_{g}", self.decoders[g]) for g in GROUPS]
        nets.append(("F", self.dynamics))
        for prefix, net in nets:
            for k in range(len(net.weights)):
                net.weights[k] = params[f"{prefix}.W{k}"]
                net.biases[k] = params[f"{prefix}.b{k}"]

    def copy(self) -> "LatentModelSet":
        return load_model(json.loads(json.dumps(model_to_dict(self))))


def _check_group(model: LatentModelSet, group: str) -> None:
    if group not in GROUPS:
        raise ValueError(f"group must be one of {GROUPS}")
    if model.scalers.get(group) is None:
        raise NotFittedError(f"normalisation statistics for {group!r} are not fitted")


def _rows(x) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    return (x.reshape(1, -1), True) if x.ndim == 1 else (x, False)


def encode(model: LatentModelSet, group: str, x) -> np.ndarray:
    _check_group(model, group)
    x, single = _rows(x)
    if x.shape[1] != model.encoders[group].widths[0]:
        raise ValueError(f"{group}: expected width {model.encoders[group].widths[0]}, got {x.shape[1]}")
    z = model.encoders[group](model.scalers[group].transform(x))
    return z[0] if single else z


def decode(model: LatentModelSet, group: str, z) -> np.ndarray:
    _check_group(model, group)
    z, single = _rows(z)
    if z.shape[1] != model.decoders[group].widths[0]:
        raise ValueError(f"{group}: expected latent width {model.decoders[group].widths[0]}, got {z.shape[1]}")
    x = model.scalers[group].inverse(model.decoders[group](z))
    return x[0] if single else x


def latent_step(model: LatentModelSet, s_lat, a_lat, d_lat) -> np.ndarray:
    s_lat, single = _rows(s_lat)
    a_lat, _ = _rows(a_lat)
    d_lat, _ = _rows(d_lat)
    n_s, n_a, n_d = model.latent_dims
    if s_lat.shape[1] != n_s or a_lat.shape[1] != n_a or d_lat.shape[1] != n_d:
        raise ValueError("latent widths do not match the model")
    out = model.dynamics(np.concatenate([s_lat, a_lat, d_lat], axis=1))
    return out[0] if single else out


def predict_next(model: LatentModelSet, s, a, d) -> np.ndarray:
    """One-step prediction in original units: ``D_s(F(E_s(s), E_a(a), E_d(d)))``."""
    z = latent_step(model, encode(model, "s", s), encode(model, "a", a), encode(model, "d", d))
    return decode(model, "s", z)


@dataclass
class LossGraph:
    graph: Graph
    total: int
    prediction: int
    reconstruction: int


def build_loss_graph(model: LatentModelSet, omega: float) -> LossGraph:
    """Multi-task loss over a batch; data inputs are ``s, a, d, s_next`` (normalised)."""
    g = Graph()
    x = {grp: g.input(grp) for grp in GROUPS}
    s_next = g.input("s_next")
    z = {grp: model.encoders[grp].to_graph(g, x[grp], f"E_{grp}") for grp in GROUPS}
    recon = []
    for grp in GROUPS:
        xr = model.decoders[grp].to_graph(g, z[grp], f"D_{grp}")
        recon.append(g.sum(g.square(g.sub(xr, x[grp]))))
    l_v = g.add(g.add(recon[0], recon[1]), recon[2])
    z_next = model.dynamics.to_graph(g, g.concat([z["s"], z["a"], z["d"]], axis=1), "F")
    pred = model.decoders["s"].to_graph(g, z_next, "D_s")
    l_m = g.sum(g.square(g.sub(pred, s_next)))
    total = g.add(g.scale(l_m, omega), g.scale(l_v, 1.0 - omega))
    g.set_output(total)
    return LossGraph(g, total, l_m, l_v)


def _normalised_batch(model: LatentModelSet, s, a, d, s_next) -> Dict[str, np.ndarray]:
    sc = model.scalers
    return {
        "s": sc["s"].transform(s),
        "a": sc["a"].transform(a),
        "d": sc["d"].transform(d),
        "s_next": sc["s"].transform(s_next),
    }


def multi_task_loss(model: LatentModelSet, batch, omega: float, loss_graph: Optional[LossGraph] = None):
    """Return ``(L, L_m, L_v, grads)`` for a batch ``(s, a, d, s_next)`` in original units."""
    s, a, d, s_next = batch
    if len(s) == 0:
        raise ValueError("empty batch")
    lg = loss_graph or build_loss_graph(model, omega)
    feed = _normalised_batch(model, s, a, d, s_next)
    feed.update(model.params())
    total = float(graph_forward(lg.graph, feed)[0, 0])
    l_m = float(lg.graph.values[lg.prediction][0, 0])
    l_v = float(lg.graph.values[lg.reconstruction][0, 0])
    grads = graph_backward(lg.graph)
    return total, l_m, l_v, {k: grads[k] for k in model.params()}


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        out = {}
        for k, p in params.items():
            g = grads[k]
            m = self.m.get(k, 0.0) * b1 + (1 - b1) * g
            v = self.v.get(k, 0.0) * b2 + (1 - b2) * g * g
            self.m[k], self.v[k] = m, v
            mhat = m / (1 - b1**self.t)
            vhat = v / (1 - b2**self.t)
            out[k] = p - self.lr * mhat / (np.sqrt(vhat) + self.eps)
        return out


@dataclass
class TrainResult:
    model: LatentModelSet
    history: List[float]
    prediction_history: List[float]
    reconstruction_history: List[float]


def train(
    traj: Trajectory,
    config: TrainConfig,
    model: Optional[LatentModelSet] = None,
    log: Optional[Callable[[int, float], None]] = None,
) -> TrainResult:
    """Mini-batch Adam on the multi-task loss; per-sample epoch means are recorded."""
    if traj.horizon < 2:
        raise ValueError("need at least two time steps to form transitions")
    dims = (traj.states.shape[1], traj.actions.shape[1], traj.disturbances.shape[1])
    if model is None:
        model = LatentModelSet.create(dims, config)
    model.fit_scalers(traj)
    s, a, d, s_next = traj.transitions()
    n = len(s)
    lg = build_loss_graph(model, config.omega)
    data = _normalised_batch(model, s, a, d, s_next)
    params = model.params()
    opt = Adam(config.learning_rate)
    rng = np.random.default_rng([config.seed, 1])
    hist, hist_m, hist_v = [], [], []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        tot = tot_m = tot_v = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            feed = {k: v[idx] for k, v in data.items()}
            feed.update(params)
            try:
                loss = float(graph_forward(lg.graph, feed)[0, 0])
            except NonFiniteError:
                raise TrainingDivergedError(epoch) from None
            tot += loss
            tot_m += float(lg.graph.values[lg.prediction][0, 0])
            tot_v += float(lg.graph.values[lg.reconstruction][0, 0])
            grads = graph_backward(lg.graph)
            params = opt.step(params, grads)
        hist.append(tot / n)
        hist_m.append(tot_m / n)
        hist_v.append(tot_v / n)
        if log is not None:
            log(epoch, hist[-1])
    model.set_params(params)
    return TrainResult(model, hist, hist_m, hist_v)


@dataclass
class ModelErrors:
    rmse: np.ndarray
    mae: np.ndarray
    r2: np.ndarray  # nan marks zones with zero target variance

    def summary(self) -> Dict[str, Tuple[float, float]]:
        r2 = self.r2[np.isfinite(self.r2)]
        return {
            "rmse": (float(self.rmse.mean()), float(self.rmse.std())),
            "mae": (float(self.mae.mean()), float(self.mae.std())),
            "r2": (float(r2.mean()), float(r2.std())) if r2.size else (float("nan"), float("nan")),
        }


def evaluate_model(predictor: Callable, traj: Trajectory) -> ModelErrors:
    """Per-zone one-step-ahead errors of ``predictor(s, a, d) -> s_next``."""
    s, a, d, s_next = traj.transitions()
    pred = np.asarray(predictor(s, a, d), dtype=np.float64)
    err = pred - s_next
    rmse = np.sqrt((err**2).mean(axis=0))
    mae = np.abs(err).mean(axis=0)
    sse = (err**2).sum(axis=0)
    sst = ((s_next - s_next.mean(axis=0)) ** 2).sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = np.where(sst > 0, 1.0 - sse / np.where(sst > 0, sst, 1.0), np.nan)
    return ModelErrors(rmse, mae, r2)


def _mlp_to_dict(net: MLP) -> dict:
    return {
        "widths": net.widths,
        "weights": [W.tolist() for W in net.weights],
        "biases": [b.ravel().tolist() for b in net.biases],
    }


def _mlp_from_dict(d: dict) -> MLP:
    Ws = [np.array(W, dtype=np.float64).reshape(n_in, n_out) for W, n_in, n_out in zip(d["weights"], d["widths"][:-1], d["widths"][1:])]
    bs = [np.array(b, dtype=np.float64).reshape(1, -1) for b in d["biases"]]
    return MLP(Ws, bs)


def model_to_dict(model: LatentModelSet) -> dict:
    out = {
        "format": "latentopt.LatentModelSet/1",
        "latent_dims": list(model.latent_dims),
        "original_dims": list(model.original_dims),
        "encoders": {g: _mlp_to_dict(model.encoders[g]) for g in GROUPS},
        "decoders": {g: _mlp_to_dict(model.decoders[g]) for g in GROUPS},
        "dynamics": _mlp_to_dict(model.dynamics),
        "scalers": {},
    }
    for g in GROUPS:
        sc = model.scalers.get(g)
        out["scalers"][g] = None if sc is None else {"low": sc.low.ravel().tolist(), "span": sc.span.ravel().tolist()}
    return out


def load_model(d: dict) -> LatentModelSet:
    scalers = {}
    for g in GROUPS:
        sc = d["scalers"].get(g)
        scalers[g] = None if sc is None else MinMaxScaler(np.array(sc["low"]).reshape(1, -1), np.array(sc["span"]).reshape(1, -1))
    return LatentModelSet(
        {g: _mlp_from_dict(d["encoders"][g]) for g in GROUPS},
        {g: _mlp_from_dict(d["decoders"][g]) for g in GROUPS},
        _mlp_from_dict(d["dynamics"]),
        scalers,
    )


def save_model_json(model: LatentModelSet, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh)


def load_model_json(path) -> LatentModelSet:
    with open(path) as fh:
        return load_model(json.load(fh))


# 90-zone reference building and its 1080-zone enlargement (metadata only)
FULL_SCALE_CONFIGURATION = {
    "zones": 90,
    "original_dims": (90, 80, 181),
    "latent_dims": (3, 4, 6),
    "reduction": "13/351",
    "large_case": {"original_dims": (1080, 960, 2161), "latent_dims": (3, 5, 7), "reduction": "15/4201"},
}
