"""Two-layer diagonal linear network trained by full-batch gradient descent.

The predictor is beta = u*u - v*v with u(0) = v(0) = alpha * ones, the
standard parameterization whose gradient-flow implicit regularizer is the
separable hypentropy potential calibrated in ``calib``.  Training minimizes
L(u, v) = (1/(2n)) ||X beta - Y||^2; with g = (1/n) X^T (X beta - Y) the
updates are u <- u - 2 lr g*u and v <- v + 2 lr g*v, which keeps the
per-coordinate product u_i v_i invariant under the continuous-time flow.

Stopping is on the mean squared training loss (the claims concern the
interpolating predictor, not a fixed epoch count).  An optional per-step
Gaussian gradient perturbation (off by default) exposes the finite
learning-rate, effective-temperature regime.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonFiniteError
from .rng import generator

STATUSES = ("interpolated", "max_epochs", "diverged")


@dataclass(frozen=True)
class DlnConfig:
    alpha: float
    lr: float
    max_epochs: int = 2_000_000
    loss_tol: float = 1e-10      # on ||X beta - Y||^2 / n
    divergence_factor: float = 1e6
    grad_noise_std: float = 0.0  # optional per-step Gaussian gradient noise
    grad_noise_seed: int = 0

    def __post_init__(self) -> None:
        if self.alpha <= 0 or self.lr <= 0 or self.max_epochs <= 0 or self.loss_tol <= 0:
            raise ValueError("alpha, lr, max_epochs, loss_tol must all be positive")
        if self.divergence_factor <= 0:
            raise ValueError("divergence_factor must be positive")


@dataclass
class DlnState:
    u: np.ndarray
    v: np.ndarray
    epoch: int = 0

    @property
    def beta(self) -> np.ndarray:
        return self.u * self.u - self.v * self.v


@dataclass
class TrainReport:
    beta: np.ndarray
    epochs_run: int
    final_loss: float
    status: str


def dln_init(d: int, alpha: float) -> DlnState:
    """u = v = alpha everywhere, so beta(0) = 0 for every alpha."""
    return DlnState(u=np.full(d, float(alpha)), v=np.full(d, float(alpha)), epoch=0)


def dln_step(state: DlnState, X: np.ndarray, Y: np.ndarray, lr: float) -> DlnState:
    """One full-batch gradient step on (u, v)."""
    n, d = X.shape
    if state.u.shape != (d,) or Y.shape != (n,):
        raise DimensionMismatch(f"X {X.shape}, Y {Y.shape}, state dim {state.u.shape}")
    g = (X.T @ (X @ state.beta - Y)) / n
    scale = 2.0 * lr * g
    u = state.u - scale * state.u
    v = state.v + scale * state.v
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise NonFiniteError("parameters left the finite range")
    return DlnState(u=u, v=v, epoch=state.epoch + 1)


def dln_train(X: np.ndarray, Y: np.ndarray, cfg: DlnConfig) -> TrainReport:
    """Run gradient descent until interpolation, the epoch cap, or divergence.

    The loop is the inlined step update: at large epoch counts the two
    matrix-vector products per epoch are the entire budget.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n, d = X.shape
    u = np.full(d, cfg.alpha)
    v = np.full(d, cfg.alpha)
    noise_rng = generator(cfg.grad_noise_seed) if cfg.grad_noise_std > 0 else None

    beta = u * u - v * v
    resid = X @ beta - Y
    loss = float(resid @ resid) / n
    loss_ceiling = cfg.divergence_factor * max(loss, 1e-300)
    if loss <= cfg.loss_tol:
        return TrainReport(beta=beta, epochs_run=0, final_loss=loss, status="interpolated")

    two_lr = 2.0 * cfg.lr
    for epoch in range(1, cfg.max_epochs + 1):
        g = X.T @ resid
        g /= n
        if noise_rng is not None:
            g += cfg.grad_noise_std * noise_rng.standard_normal(d)
        scale = two_lr * g
        u -= scale * u
        v += scale * v
        beta = u * u - v * v
        resid = X @ beta - Y
        loss = float(resid @ resid) / n
        if loss <= cfg.loss_tol:
            return TrainReport(beta=beta, epochs_run=epoch, final_loss=loss, status="interpolated")
        if not np.isfinite(loss) or loss > loss_ceiling:
            return TrainReport(beta=beta, epochs_run=epoch, final_loss=loss, status="diverged")
    return TrainReport(beta=beta, epochs_run=cfg.max_epochs, final_loss=loss, status="max_epochs")
