"""Domain types, synthetic instance generation, norms, and population risk.

Targets place their support on the first ``s`` coordinates by convention;
the sampled design is permutation-invariant, and a fixed support keeps the
spike/bulk diagnostics trivial to index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, DomainError, SpecInvalid
from .rng import generator

TARGET_KINDS = ("single_spike", "flat_support", "custom")
SIGN_MODES = ("all_positive", "rademacher")


@dataclass(frozen=True)
class TargetSpec:
    """Ground-truth vector with s nonzeros on the first s coordinates.

    ``a`` is the per-coordinate magnitude.  Single spikes default to a=1;
    flat targets default to a = 1/sqrt(s), which makes them unit l2 norm.
    ``custom_values`` (length s) overrides magnitudes entirely.
    """

    kind: str = "single_spike"
    s: int = 1
    a: float | None = None
    custom_values: tuple[float, ...] | None = None
    signs: str = "all_positive"
    sign_seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in TARGET_KINDS:
            raise SpecInvalid(f"unknown target kind {self.kind!r}")
        if self.signs not in SIGN_MODES:
            raise SpecInvalid(f"unknown sign mode {self.signs!r}")
        if self.kind == "single_spike":
            object.__setattr__(self, "s", 1)
        if self.s < 1:
            raise SpecInvalid(f"support size must be >= 1, got {self.s}")
        if self.kind == "custom":
            if self.custom_values is None or len(self.custom_values) != self.s:
                raise SpecInvalid("custom target needs exactly s custom_values")
        if self.custom_values is not None:
            object.__setattr__(self, "custom_values", tuple(float(x) for x in self.custom_values))

    def magnitude(self) -> float:
        """Resolved per-coordinate magnitude (not meaningful for custom targets)."""
        if self.a is not None:
            return float(self.a)
        return 1.0 if self.kind == "single_spike" else 1.0 / math.sqrt(self.s)


@dataclass(frozen=True)
class DesignSpec:
    """Design dimensions: fixed d, or d = ceil(kappa * n) proportional to n."""

    mode: str
    d: int | None = None
    kappa: float | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("fixed_d", "proportional"):
            raise SpecInvalid(f"unknown design mode {self.mode!r}")
        if self.mode == "fixed_d" and (self.d is None or self.d < 1):
            raise SpecInvalid("fixed_d design needs a positive d")
        if self.mode == "proportional" and (self.kappa is None or self.kappa <= 1.0):
            raise SpecInvalid("proportional design needs kappa > 1")

    @classmethod
    def fixed(cls, d: int) -> "DesignSpec":
        return cls("fixed_d", d=int(d))

    @classmethod
    def proportional(cls, kappa: float) -> "DesignSpec":
        return cls("proportional", kappa=float(kappa))

    def resolve_d(self, n: int) -> int:
        """Dimension for sample size n; the instance must be overparameterized."""
        d = self.d if self.mode == "fixed_d" else math.ceil(self.kappa * n)
        if d <= n:
            raise SpecInvalid(f"need d > n, got d={d}, n={n}")
        return int(d)


@dataclass
class ProblemInstance:
    """One synthetic regression task: Y = X w_star + xi, X iid standard normal."""

    X: np.ndarray
    Y: np.ndarray
    w_star: np.ndarray
    xi: np.ndarray
    sigma: float
    seed: int
    n: int
    d: int
    s: int


def gen_target(spec: TargetSpec, d: int) -> np.ndarray:
    """Materialize w_star in R^d for a target spec.

    Nonzeros sit exactly on indices 0..s-1.  Rademacher signs are drawn
    from a dedicated stream keyed by ``spec.sign_seed``.
    """
    if d < spec.s:
        raise SpecInvalid(f"support size s={spec.s} exceeds dimension d={d}")
    w = np.zeros(d)
    if spec.kind == "custom":
        vals = np.array(spec.custom_values, dtype=float)
    else:
        vals = np.full(spec.s, spec.magnitude())
    if spec.signs == "rademacher":
        signs = generator(spec.sign_seed).integers(0, 2, size=spec.s) * 2 - 1
        vals = vals * signs
    w[: spec.s] = vals
    return w


def gen_instance(
    target: TargetSpec,
    design: DesignSpec,
    sigma: float,
    n: int,
    seed: int,
) -> ProblemInstance:
    """Sample one instance, deterministically in ``seed``.

    Draw order is fixed (X first, then xi) so that the design is identical
    across noise levels at the same seed.
    """
    if n < 1:
        raise SpecInvalid(f"need n >= 1, got {n}")
    if sigma < 0:
        raise SpecInvalid(f"need sigma >= 0, got {sigma}")
    d = design.resolve_d(n)
    w_star = gen_target(target, d)
    rng = generator(seed)
    X = rng.standard_normal((n, d))
    xi = sigma * rng.standard_normal(n)
    Y = X @ w_star + xi
    return ProblemInstance(
        X=X, Y=Y, w_star=w_star, xi=xi, sigma=float(sigma),
        seed=int(seed), n=n, d=d, s=target.s,
    )


def lr_norm(w: np.ndarray, r: float) -> float:
    """(sum_i |w_i|^r)^(1/r).

    r >= 1 gives the lr norm; 0 < r < 1 is permitted as a quasi-norm for
    diagnostics.  The max is factored out so large-r powers cannot overflow.
    """
    if r <= 0:
        raise DomainError(f"need r > 0, got {r}")
    w = np.asarray(w, dtype=float)
    if w.size == 0:
        return 0.0
    m = float(np.max(np.abs(w)))
    if m == 0.0:
        return 0.0
    return m * float(np.sum(np.abs(w / m) ** r)) ** (1.0 / r)


def population_risk(w_hat: np.ndarray, w_star: np.ndarray, sigma: float) -> float:
    """Exact test MSE under the isotropic Gaussian design: ||w_hat - w_star||^2 + sigma^2.

    Reported instead of a finite test set; the closed form removes test-set
    variance and is exact for this design.
    """
    w_hat = np.asarray(w_hat, dtype=float)
    w_star = np.asarray(w_star, dtype=float)
    if w_hat.shape != w_star.shape:
        raise DimensionMismatch(f"shapes {w_hat.shape} vs {w_star.shape}")
    diff = w_hat - w_star
    return float(diff @ diff + sigma * sigma)


def empirical_test_mse(
    w_hat: np.ndarray,
    w_star: np.ndarray,
    sigma: float,
    n_test: int,
    seed: int,
) -> float:
    """Finite-test-set MSE on a freshly sampled design; converges to
    population_risk as n_test grows.  Opt-in alternative for callers that
    want test-set variance in the readout."""
    w_hat = np.asarray(w_hat, dtype=float)
    w_star = np.asarray(w_star, dtype=float)
    if w_hat.shape != w_star.shape:
        raise DimensionMismatch(f"shapes {w_hat.shape} vs {w_star.shape}")
    if n_test < 1:
        raise SpecInvalid(f"need n_test >= 1, got {n_test}")
    rng = generator(seed)
    x_test = rng.standard_normal((n_test, w_star.shape[0]))
    noise = sigma * rng.standard_normal(n_test)
    err = x_test @ (w_hat - w_star) - noise
    return float(err @ err) / n_test
