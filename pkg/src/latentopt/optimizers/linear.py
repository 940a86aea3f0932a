"""Affine one-step model identified by ridge-damped least squares."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..thermal import Trajectory

RIDGE = 1e-8


class IdentificationError(RuntimeError):
    pass


@dataclass
class LinearModel:
    """``s_{t+1} = A s_t + B a_t + E d_t + c`` with row-vector states."""

    A: np.ndarray  # Z x Z
    B: np.ndarray  # Z x A
    E: np.ndarray  # Z x D
    c: np.ndarray  # Z
    train_rmse: float = float("nan")

    def predict(self, s, a, d) -> np.ndarray:
        return s @ self.A.T + a @ self.B.T + d @ self.E.T + self.c

    def rollout(self, s0, actions, disturbances) -> np.ndarray:
        T = actions.shape[0]
        drive = actions @ self.B.T + disturbances[:T] @ self.E.T + self.c
        out = np.empty((T, self.A.shape[0]))
        s = np.asarray(s0, dtype=np.float64)
        for t in range(T):
            s = self.A @ s + drive[t]
            out[t] = s
        return out

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("A", "B", "E", "c")} | {"train_rmse": self.train_rmse}

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        return cls(*(np.array(d[k], dtype=np.float64) for k in ("A", "B", "E", "c")), train_rmse=d.get("train_rmse", float("nan")))


def oriiden_identify(traj: Trajectory, ridge: float = RIDGE) -> LinearModel:
    s, a, d, s_next = traj.transitions()
    Z, A, D = s.shape[1], a.shape[1], d.shape[1]
    n_feat = Z + A + D + 1
    if len(s) < n_feat:
        raise IdentificationError(f"need at least {n_feat} transitions, got {len(s)}")
    X = np.column_stack([s, a, d, np.ones(len(s))])
    gram = X.T @ X + ridge * np.eye(n_feat)
    try:
        theta = np.linalg.solve(gram, X.T @ s_next)
    except np.linalg.LinAlgError as exc:
        raise IdentificationError(f"regressor matrix is singular even with ridge {ridge}") from exc
    if not np.isfinite(theta).all():
        raise IdentificationError("least-squares solution is non-finite")
    resid = X @ theta - s_next
    th = theta.T
    return LinearModel(
        th[:, :Z].copy(), th[:, Z : Z + A].copy(), th[:, Z + A : Z + A + D].copy(), th[:, -1].copy(),
        train_rmse=float(np.sqrt((resid**2).mean())),
    )
