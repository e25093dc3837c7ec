"""Data-free calibration between initialization scale alpha and an effective p.

The two-layer diagonal network's gradient-flow potential is separable with
link q(z) = 2 - sqrt(4 + z^2) + z asinh(z/2).  Evaluating the potential on
k-sparse unit-l2 probes gives alpha^2 k q(1/(alpha^2 sqrt(k))), whose
log-log slope in k is matched against the exact k^(1 - p/2) law of
||.||_p^p; p_eff(alpha) = 2 (1 - slope).  Everything here is deterministic:
no data, no RNG, bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BracketInvalid, DegenerateFit, DomainError, NonFiniteError

# Below this |z| the closed form loses ~8 digits to the 2 - sqrt(4+z^2)
# cancellation; the series is exact to machine precision there.
SERIES_SWITCH = 1e-4


def _default_k_grid() -> tuple[int, ...]:
    ks = np.unique(np.round(np.logspace(0.0, 4.0, 32)).astype(int))
    return tuple(int(k) for k in ks)


def _default_alpha_grid() -> tuple[float, ...]:
    return tuple(float(a) for a in np.logspace(-6.0, 3.0, 50))


@dataclass(frozen=True)
class CalibrationConfig:
    """Probe grid and numerical switches for the slope fit."""

    k_grid: tuple[int, ...] = field(default_factory=_default_k_grid)
    alpha_grid: tuple[float, ...] = field(default_factory=_default_alpha_grid)
    series_switch: float = SERIES_SWITCH

    def __post_init__(self) -> None:
        if any(k < 1 for k in self.k_grid):
            raise DomainError("k_grid entries must be >= 1")
        if any(b <= a for a, b in zip(self.k_grid, self.k_grid[1:])):
            raise DomainError("k_grid must be strictly increasing")


@dataclass
class CalibrationCurve:
    """Sampled alpha -> p_eff map with per-point fit standard errors."""

    points: list[tuple[float, float, float]]
    monotone_violations: int


def hyp_potential_q(z: float, series_switch: float = SERIES_SWITCH) -> float:
    """Scalar link q(z) = 2 - sqrt(4 + z^2) + z asinh(z/2).

    Even and nonnegative; q(0) = 0.  The first two terms are rewritten as
    -z^2/(2 + sqrt(4 + z^2)), which is algebraically identical but cancels
    nothing; below ``series_switch`` the series takes over outright.
    """
    if not math.isfinite(z):
        raise NonFiniteError(f"q(z) needs finite z, got {z}")
    az = abs(z)
    z2 = az * az
    if az < series_switch:
        return z2 / 4.0 - z2 * z2 / 192.0 + z2 * z2 * z2 / 2560.0
    return az * math.asinh(az / 2.0) - z2 / (2.0 + math.sqrt(4.0 + z2))


def potential_on_probe(alpha: float, k: int, series_switch: float = SERIES_SWITCH) -> float:
    """Separable potential evaluated on a k-sparse unit-l2 probe: alpha^2 k q(1/(alpha^2 sqrt k))."""
    if alpha <= 0:
        raise DomainError(f"need alpha > 0, got {alpha}")
    if k < 1:
        raise DomainError(f"need k >= 1, got {k}")
    return alpha * alpha * k * hyp_potential_q(1.0 / (alpha * alpha * math.sqrt(k)), series_switch)


def _ols_slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Least-squares slope, intercept, and the slope's standard error."""
    xbar, ybar = x.mean(), y.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    slope = float(np.sum((x - xbar) * (y - ybar))) / sxx
    intercept = ybar - slope * xbar
    resid = y - (intercept + slope * x)
    dof = max(len(x) - 2, 1)
    stderr = math.sqrt(float(resid @ resid) / dof / sxx)
    return slope, intercept, stderr


def p_eff(alpha: float, cfg: CalibrationConfig | None = None) -> tuple[float, float]:
    """Slope-matching map: fit log Q_alpha(probe_k) vs log k, return (2(1 - slope), stderr)."""
    cfg = cfg or CalibrationConfig()
    if len(cfg.k_grid) < 3:
        raise DegenerateFit(f"k_grid has {len(cfg.k_grid)} points; need >= 3")
    ks = np.array(cfg.k_grid, dtype=float)
    logq = np.array([
        math.log(potential_on_probe(alpha, int(k), cfg.series_switch)) for k in ks
    ])
    slope, _, stderr = _ols_slope(np.log(ks), logq)
    return 2.0 * (1.0 - slope), stderr


def alpha_for_p(
    p_target: float,
    bracket: tuple[float, float] = (1e-8, 1e4),
    tol: float = 1e-3,
    cfg: CalibrationConfig | None = None,
) -> float:
    """Invert the calibration by bisection in log alpha.

    Requires p_eff(alpha_min) <= p_target <= p_eff(alpha_max); the map is
    monotone in alpha, so the bracket shrinks geometrically.
    """
    cfg = cfg or CalibrationConfig()
    lo, hi = bracket
    if not 0 < lo < hi:
        raise BracketInvalid(f"bad bracket {bracket}")
    p_lo, _ = p_eff(lo, cfg)
    p_hi, _ = p_eff(hi, cfg)
    if not p_lo <= p_target <= p_hi:
        raise BracketInvalid(
            f"p_target={p_target} outside [p_eff({lo:g})={p_lo:.4f}, p_eff({hi:g})={p_hi:.4f}]"
        )
    u_lo, u_hi = math.log(lo), math.log(hi)
    for _ in range(200):
        u_mid = 0.5 * (u_lo + u_hi)
        p_mid, _ = p_eff(math.exp(u_mid), cfg)
        if abs(p_mid - p_target) <= tol:
            return math.exp(u_mid)
        if p_mid < p_target:
            u_lo = u_mid
        else:
            u_hi = u_mid
    return math.exp(0.5 * (u_lo + u_hi))


def calibration_curve(alphas=None, cfg: CalibrationConfig | None = None) -> CalibrationCurve:
    """Sample alpha -> p_eff over a grid, counting monotonicity violations."""
    cfg = cfg or CalibrationConfig()
    alphas = cfg.alpha_grid if alphas is None else tuple(float(a) for a in alphas)
    points = []
    violations = 0
    prev = None
    for a in alphas:
        p, se = p_eff(a, cfg)
        if prev is not None and p < prev:
            violations += 1
        prev = p
        points.append((a, p, se))
    return CalibrationCurve(points=points, monotone_violations=violations)
