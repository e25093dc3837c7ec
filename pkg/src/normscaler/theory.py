"""Closed-form norm-scaling predictions: ray scale, transition size, regimes.

Every formula hides an absolute constant; predictions here set all of them
to 1, so only slopes, plateaus, orderings, and transition locations carry
meaning.  The n-dependence treats kappa_bulk as the invariant (d - s scales
as kappa_bulk * n), matching the proportional regime the formulas live in;
fixed-d callers rebuild inputs per n.

The q = 2 boundary (p = 2) has no n-driven transition: the transition size
comes back as +inf and predictions carry a boundary flag instead of failing.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .model import TargetSpec, gen_target
from .solver import conjugate_exponent

REGIMES = ("bulk", "spike", "crossover")

# "n >> n_star" is unquantified in the closed forms; a factor-3 band on each
# side keeps regime-labelled slope fits clean at desk scale.
CROSSOVER_BAND = 3.0


@dataclass(frozen=True)
class TheoryInputs:
    """Scalar summaries the closed forms consume.

    W_q = sum over the support of |w*_j|^q, tau_s_sq = ||w*||_2^2 + sigma^2,
    norm_qm1r = ||w*||_{(q-1) r}, kappa_bulk = (d - s)/n.
    """

    p: float
    q: float
    r: float
    n: int
    d: int
    s: int
    kappa_bulk: float
    sigma: float
    W_q: float
    tau_s_sq: float
    norm_qm1r: float
    l2: float
    a: float

    def __post_init__(self) -> None:
        if abs(self.q - conjugate_exponent(self.p)) > 1e-9:
            raise DomainError(f"q={self.q} is not the conjugate of p={self.p}")
        if self.kappa_bulk <= 0:
            raise DomainError(f"need kappa_bulk > 0, got {self.kappa_bulk}")
        if self.tau_s_sq < self.sigma**2 - 1e-15:
            raise DomainError("tau_s_sq below sigma^2")


@dataclass
class Prediction:
    """One evaluated prediction; terms follow the three-term decomposition."""

    value: float
    regime: str
    n_star: float
    r_star: float
    slope: float
    terms: dict[str, float] = field(default_factory=dict)
    boundary_p: bool = False


def theory_inputs(
    target: TargetSpec,
    d: int,
    n: int,
    sigma: float,
    p: float,
    r: float,
) -> TheoryInputs:
    """Build TheoryInputs from a target spec at given (d, n, sigma, p, r)."""
    q = conjugate_exponent(p)
    w = gen_target(target, d)
    support = w[: target.s]
    a = abs(float(support[0])) if target.s else 0.0
    return TheoryInputs(
        p=p, q=q, r=r, n=n, d=d, s=target.s,
        kappa_bulk=(d - target.s) / n, sigma=float(sigma),
        W_q=float(np.sum(np.abs(support) ** q)),
        tau_s_sq=float(support @ support + sigma * sigma),
        norm_qm1r=float(np.sum(np.abs(support) ** ((q - 1.0) * r)) ** (1.0 / ((q - 1.0) * r))),
        l2=float(np.linalg.norm(support)),
        a=a,
    )


def gaussian_abs_moment(t: float) -> float:
    """m_t = E|Z|^t = 2^(t/2) Gamma((t+1)/2) / sqrt(pi) for standard normal Z."""
    if t <= 0:
        raise DomainError(f"need t > 0, got {t}")
    return math.exp(0.5 * t * math.log(2.0) + math.lgamma(0.5 * (t + 1.0)) - 0.5 * math.log(math.pi))


def r_threshold(p: float) -> float:
    """Universal threshold r_star = 2(p - 1) separating plateau from growth."""
    if not 1.0 < p <= 2.0:
        raise DomainError(f"need 1 < p <= 2, got {p}")
    return 2.0 * (p - 1.0)


def transition_n_star(inputs: TheoryInputs) -> float:
    """Transition scale (kappa_bulk tau_s^q / W_q)^(2/(q-2)).

    Returns +inf at the q = 2 boundary (p = 2): no n-driven transition.
    """
    q = inputs.q
    if q <= 2.0:
        return math.inf
    if inputs.W_q == 0.0:
        return math.inf
    tau_q = inputs.tau_s_sq ** (q / 2.0)
    try:
        return (inputs.kappa_bulk * tau_q / inputs.W_q) ** (2.0 / (q - 2.0))
    except OverflowError:
        # q -> 2 blows the exponent past float range; that IS "no transition"
        return math.inf


def ray_scale_prediction(inputs: TheoryInputs, n: float, remainder_weight: float = 1.0) -> float:
    """Predicted ray scale t_star from the three-part balance of ||X^T Y||_q^q.

    Denominator: spike n^q W_q, bulk (d-s) m_q tau^q n^(q/2), and the
    remainder tau^q (s n^(q/2) + s^(1+q/2)) with a configurable weight.
    """
    q = inputs.q
    tau_sq = inputs.tau_s_sq
    tau_q = tau_sq ** (q / 2.0)
    ds = inputs.kappa_bulk * n
    spike = n**q * inputs.W_q
    bulk = ds * gaussian_abs_moment(q) * tau_q * n ** (q / 2.0)
    remainder = remainder_weight * tau_q * (inputs.s * n ** (q / 2.0) + inputs.s ** (1.0 + q / 2.0))
    return (tau_sq * n / (spike + bulk + remainder)) ** (1.0 / (q - 1.0))


def regime_prediction(inputs: TheoryInputs, n: float) -> str:
    """bulk / spike / crossover by position of n against the factor-3 band."""
    n_star = transition_n_star(inputs)
    if n < n_star / CROSSOVER_BAND:
        return "bulk"
    if n > n_star * CROSSOVER_BAND:
        return "spike"
    return "crossover"


def _spike_slope(inputs: TheoryInputs) -> float:
    r_star = r_threshold(inputs.p)
    if inputs.r <= r_star:
        return 1.0 / inputs.r - 1.0 / (2.0 * (inputs.p - 1.0))
    return 0.0


def unified_norm_prediction(inputs: TheoryInputs, n: float) -> Prediction:
    """Three-term maximum: spike main, bulk, spike remainder.

    value = max(terms); the regime label and predicted slope come from the
    position of n relative to the transition scale.
    """
    if not 1.0 <= inputs.r <= inputs.p:
        warnings.warn(f"r={inputs.r} outside [1, p={inputs.p}]; formulas extrapolate", stacklevel=2)
    q, r, s = inputs.q, inputs.r, inputs.s
    t = ray_scale_prediction(inputs, n)
    ds = inputs.kappa_bulk * n
    tau = math.sqrt(inputs.tau_s_sq)
    core = (t * tau * math.sqrt(n)) ** (q - 1.0)
    terms = {
        "spike_main": t ** (q - 1.0) * n ** (q - 1.0) * inputs.norm_qm1r ** (q - 1.0),
        "bulk": ds ** (1.0 / r) * core,
        "spike_remainder": s ** max(1.0 / r, (q - 1.0) / 2.0) * core,
    }
    n_star = transition_n_star(inputs)
    regime = regime_prediction(inputs, n)
    if n < n_star:
        slope = _bulk_terms_slope(inputs, n)[1]
    else:
        slope = _spike_slope(inputs)
    return Prediction(
        value=max(terms.values()), regime=regime, n_star=n_star,
        r_star=r_threshold(inputs.p), slope=slope, terms=terms,
        boundary_p=inputs.q <= 2.0,
    )


def spike_dominated_prediction(inputs: TheoryInputs, n: float) -> Prediction:
    """Regime closed form for n >> n_star.

    Growth branch (tau^(q+1)/W_q) n^(1/r - 1/(2(p-1))) for r <= r_star;
    plateau branch (tau^2/W_q) ||w*||_{(q-1)r}^(q-1) above it.  The boundary
    r = r_star sits on the growth branch with exponent exactly 0.
    """
    q, r, s = inputs.q, inputs.r, inputs.s
    r_star = r_threshold(inputs.p)
    tau_sq = inputs.tau_s_sq
    growth = tau_sq ** ((q + 1.0) / 2.0) / inputs.W_q * n ** (1.0 / r - 1.0 / (2.0 * (inputs.p - 1.0)))
    plateau = tau_sq / inputs.W_q * inputs.norm_qm1r ** (q - 1.0)
    remainder = (
        tau_sq ** ((q + 1.0) / 2.0) / inputs.W_q
        * s ** max(1.0 / r, (q - 1.0) / 2.0)
        * n ** (-1.0 / (2.0 * (inputs.p - 1.0)))
    )
    value = growth if r <= r_star else plateau
    return Prediction(
        value=value, regime=regime_prediction(inputs, n),
        n_star=transition_n_star(inputs), r_star=r_star,
        slope=_spike_slope(inputs),
        terms={"spike_main": plateau, "bulk": growth, "spike_remainder": remainder},
        boundary_p=inputs.q <= 2.0,
    )


def _bulk_terms_slope(inputs: TheoryInputs, n: float) -> tuple[dict[str, float], float]:
    q, r, s = inputs.q, inputs.r, inputs.s
    kb = inputs.kappa_bulk
    tau = math.sqrt(inputs.tau_s_sq)
    terms = {
        "bulk": kb ** (1.0 / r - 1.0) * tau * n ** (1.0 / r - 0.5),
        "spike_main": inputs.norm_qm1r ** (q - 1.0) * tau ** (2.0 - q) / kb * n ** (q / 2.0 - 1.0),
        "spike_remainder": tau / kb * s ** max(1.0 / r, (q - 1.0) / 2.0) * n ** (-0.5),
    }
    exponents = {"bulk": 1.0 / r - 0.5, "spike_main": q / 2.0 - 1.0, "spike_remainder": -0.5}
    argmax = max(terms, key=terms.get)
    return terms, exponents[argmax]


def bulk_dominated_prediction(inputs: TheoryInputs, n: float) -> Prediction:
    """Regime closed form for n << n_star: three-term maximum.

    The predicted slope is the exponent of whichever term attains the max.
    """
    terms, slope = _bulk_terms_slope(inputs, n)
    return Prediction(
        value=max(terms.values()), regime=regime_prediction(inputs, n),
        n_star=transition_n_star(inputs), r_star=r_threshold(inputs.p),
        slope=slope, terms=terms, boundary_p=inputs.q <= 2.0,
    )
