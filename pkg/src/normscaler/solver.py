"""Minimum-lp interpolation via the unconstrained concave dual.

The constrained primal  min (1/p)||w||_p^p  s.t.  Xw = Y  has the smooth
concave dual

    D(lambda) = <Y, lambda> - (1/q) ||X^T lambda||_q^q,      q = p/(p-1),

and the primal is recovered coordinatewise from the dual correlations
v = X^T lambda through w_i = sgn(v_i) |v_i|^(q-1).  The dual gradient
Y - X w(lambda) is exactly the interpolation residual of that recovered
primal, so ascent stops on the user-facing contract: feasibility of the
recovered interpolator relative to ||Y||.

Ascent uses Barzilai-Borwein steps with a nonmonotone (GLL) Armijo
safeguard that falls back to plain backtracking, warm-started on the label
ray lambda = t Y at the scale t_star where the one-dimensional restriction
D(tY) peaks.  A Newton method is deliberately avoided: the dual Hessian
carries |v|^(q-2) weights that vanish at v = 0 for q > 2.

p = 2 is dispatched to the closed-form least-norm solution through a
symmetric positive-definite factorization of the n x n Gram matrix.

Matrix-vector products run through BLAS; with a fixed thread count the
reduction order, and hence every solve, is deterministic run-to-run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import (
    DegenerateInstance,
    DimensionMismatch,
    DomainError,
    NonFiniteError,
    SingularGram,
)

LINE_SEARCHES = ("barzilai_borwein", "backtracking")

# Armijo parameters shared by both line-search modes.
_ARMIJO_C = 1e-4
_BACKTRACK = 0.5
_MAX_BACKTRACKS = 60
_GLL_MEMORY = 10


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances and ascent controls.

    tol_feas bounds ||X w - Y|| / ||Y||; tol_cert bounds the relative error
    of the primal-dual identities at the returned pair.  p_floor guards the
    numerically explosive q - 1 > 20 power range.
    """

    tol_feas: float = 1e-8
    tol_cert: float = 1e-6
    max_iters: int = 50_000
    p_floor: float = 1.05
    line_search: str = "barzilai_borwein"
    record_history: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.tol_feas < 1.0:
            raise DomainError(f"tol_feas must be in (0, 1), got {self.tol_feas}")
        if self.tol_cert <= 0:
            raise DomainError(f"tol_cert must be positive, got {self.tol_cert}")
        if self.p_floor <= 1.0:
            raise DomainError(f"p_floor must exceed 1, got {self.p_floor}")
        if self.line_search not in LINE_SEARCHES:
            raise DomainError(f"unknown line_search {self.line_search!r}")


@dataclass
class InterpolatorSolution:
    """Primal/dual pair with feasibility and certificate residuals.

    converged implies feas_residual <= tol_feas and cert_residual <= tol_cert.
    """

    w_hat: np.ndarray
    lambda_star: np.ndarray
    t_star_empirical: float
    feas_residual: float
    cert_residual: float
    iters: int
    converged: bool
    dual_history: tuple[float, ...] | None = None


def conjugate_exponent(p: float) -> float:
    """Holder conjugate q = p/(p-1) for p in (1, 2]."""
    if not 1.0 < p <= 2.0:
        raise DomainError(f"need 1 < p <= 2, got {p}")
    return p / (p - 1.0)


def kkt_map(v: np.ndarray, q: float) -> np.ndarray:
    """Coordinatewise primal recovery w_i = sgn(v_i) |v_i|^(q-1).

    v_i = 0 maps to exactly 0; overflow at large q saturates to inf, which
    downstream line searches reject.
    """
    if q < 2.0:
        raise DomainError(f"need q >= 2, got {q}")
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("kkt_map input contains NaN or infinity")
    with np.errstate(over="ignore"):
        return np.sign(v) * np.abs(v) ** (q - 1.0)


def _power_sum(v: np.ndarray, q: float) -> float:
    """sum_i |v_i|^q with the max rescaled out to avoid overflow."""
    m = float(np.max(np.abs(v))) if v.size else 0.0
    if m == 0.0:
        return 0.0
    with np.errstate(over="ignore"):
        return m**q * float(np.sum(np.abs(v / m) ** q))


def dual_objective(lam: np.ndarray, X: np.ndarray, Y: np.ndarray, q: float) -> float:
    """D(lambda) = <Y, lambda> - (1/q) ||X^T lambda||_q^q."""
    lam = np.asarray(lam, dtype=float)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape[0] != Y.shape[0] or lam.shape != Y.shape:
        raise DimensionMismatch(f"X {X.shape}, Y {Y.shape}, lambda {lam.shape}")
    return float(Y @ lam) - _power_sum(X.T @ lam, q) / q


def ray_scale(X: np.ndarray, Y: np.ndarray, q: float) -> float:
    """Maximizer t_star of the ray restriction D(tY): t^(q-1) = ||Y||^2 / ||X^T Y||_q^q.

    Evaluated in log space; ||X^T Y||_q^q easily over/underflows at large q.
    """
    Y = np.asarray(Y, dtype=float)
    v = np.asarray(X, dtype=float).T @ Y
    m = float(np.max(np.abs(v))) if v.size else 0.0
    if m == 0.0:
        raise DegenerateInstance("X^T Y = 0: the dual ray is degenerate")
    yy = float(Y @ Y)
    log_pows = math.log(yy) - q * math.log(m) - math.log(float(np.sum(np.abs(v / m) ** q)))
    return math.exp(log_pows / (q - 1.0))


def min_l2_closed_form(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Least-norm interpolator X^T (X X^T)^{-1} Y via Cholesky on the Gram matrix."""
    return np.asarray(X, dtype=float).T @ _gram_solve(X, Y)


def _gram_solve(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape[0] != Y.shape[0]:
        raise DimensionMismatch(f"X {X.shape} vs Y {Y.shape}")
    gram = X @ X.T
    try:
        return cho_solve(cho_factor(gram), Y)
    except np.linalg.LinAlgError as exc:
        raise SingularGram(f"Gram factorization failed: {exc}") from exc


def _certificate(w: np.ndarray, v: np.ndarray, Y: np.ndarray, lam: np.ndarray,
                 p: float, q: float) -> float:
    """Relative error of the primal-dual identities ||v||_q^q = ||w||_p^p = <Y, lambda>."""
    wp = _power_sum(w, p)
    if wp == 0.0:
        return 0.0
    c1 = abs(_power_sum(v, q) - wp) / wp
    c2 = abs(float(Y @ lam) - wp) / wp
    return max(c1, c2)


def solve_min_lp(
    X: np.ndarray,
    Y: np.ndarray,
    p: float,
    opts: SolverOptions | None = None,
) -> InterpolatorSolution:
    """Compute the minimum-lp interpolator of (X, Y) for p in [p_floor, 2].

    Never raises on slow convergence: the best iterate comes back with
    converged=False.  Y = 0 short-circuits to the exact zero solution.
    """
    opts = opts or SolverOptions()
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape[0] != Y.shape[0]:
        raise DimensionMismatch(f"X {X.shape} vs Y {Y.shape}")
    if not opts.p_floor <= p <= 2.0:
        raise DomainError(f"p={p} outside [{opts.p_floor}, 2]")

    norm_y = float(np.linalg.norm(Y))
    if norm_y == 0.0:
        zero = np.zeros(X.shape[1])
        return InterpolatorSolution(
            w_hat=zero, lambda_star=np.zeros(X.shape[0]), t_star_empirical=0.0,
            feas_residual=0.0, cert_residual=0.0, iters=0, converged=True,
        )

    if p == 2.0:
        return _solve_l2(X, Y, norm_y, opts)
    return _ascend(X, Y, p, norm_y, opts)


def _solve_l2(X: np.ndarray, Y: np.ndarray, norm_y: float, opts: SolverOptions) -> InterpolatorSolution:
    lam = _gram_solve(X, Y)
    w = X.T @ lam
    feas = float(np.linalg.norm(X @ w - Y)) / norm_y
    cert = _certificate(w, w, Y, lam, 2.0, 2.0)  # X^T lambda = w at p = 2
    return InterpolatorSolution(
        w_hat=w, lambda_star=lam, t_star_empirical=ray_scale(X, Y, 2.0),
        feas_residual=feas, cert_residual=cert, iters=0,
        converged=feas <= opts.tol_feas and cert <= opts.tol_cert,
    )


def _ascend(X: np.ndarray, Y: np.ndarray, p: float, norm_y: float,
            opts: SolverOptions) -> InterpolatorSolution:
    q = conjugate_exponent(p)
    t_star = ray_scale(X, Y, q)
    lam = t_star * Y

    def eval_at(lam_try: np.ndarray) -> tuple[float, np.ndarray]:
        """(D, v) at lam_try; one X^T product, shared with the gradient step."""
        v = X.T @ lam_try
        return float(Y @ lam_try) - _power_sum(v, q) / q, v

    dual, v = eval_at(lam)
    w = kkt_map(v, q)
    grad = Y - X @ w
    history = [dual]

    # First step: exact 1-d Newton along the gradient; afterwards BB adapts.
    u = X.T @ grad
    with np.errstate(over="ignore"):
        curv = (q - 1.0) * float(np.sum(np.abs(v) ** (q - 2.0) * u * u))
    step = float(grad @ grad) / curv if (np.isfinite(curv) and curv > 0) else 1.0

    monotone = opts.line_search == "backtracking"
    feas_abs = float(np.linalg.norm(grad))
    best_feas, best = feas_abs, (w, lam, v, grad)
    iters = 0
    tol = opts.tol_feas * norm_y

    while feas_abs > tol and iters < opts.max_iters:
        gg = float(grad @ grad)
        ref = dual if monotone else min(history[-_GLL_MEMORY:])
        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            lam_new = lam + step * grad
            dual_new, v_new = eval_at(lam_new)
            if math.isfinite(dual_new) and dual_new >= ref + _ARMIJO_C * step * gg:
                accepted = True
                break
            step *= _BACKTRACK
        if not accepted:
            break  # step collapsed below float resolution

        w = kkt_map(v_new, q)
        grad_new = Y - X @ w
        s = lam_new - lam
        y_diff = grad_new - grad
        sy = float(s @ y_diff)
        # BB1 step for concave ascent; curvature pair degenerate => grow last step.
        step = float(s @ s) / (-sy) if sy < 0 else step * 2.0

        lam, grad, dual = lam_new, grad_new, dual_new
        history.append(dual)
        iters += 1
        feas_abs = float(np.linalg.norm(grad))
        # Best iterate = smallest interpolation residual, the user-facing contract.
        if feas_abs < best_feas:
            best_feas, best = feas_abs, (w, lam, v_new, grad)

    w, lam, v, grad = best
    feas = best_feas / norm_y
    cert = _certificate(w, v, Y, lam, p, q)
    return InterpolatorSolution(
        w_hat=w, lambda_star=lam, t_star_empirical=t_star,
        feas_residual=feas, cert_residual=cert, iters=iters,
        converged=feas <= opts.tol_feas and cert <= opts.tol_cert,
        dual_history=tuple(history) if opts.record_history else None,
    )
