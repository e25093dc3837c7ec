"""Sweep orchestration: run cells, join empirical norms with theory, persist CSV.

A cell is one (sigma, selector value, n, trial).  Cells are pure functions
of the config and a derived seed, so they can run in any order across a
process pool; rows append to the CSV as they complete (crash-safe), and the
finished file is rewritten sorted by (experiment_id, n, seed, r) so reruns
are byte-identical.  ``NORMSCALER_THREADS`` caps the worker count.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .calib import CalibrationConfig, p_eff
from .dln import DlnConfig, dln_train
from .errors import (
    InsufficientPoints,
    NonPositiveValue,
    SchemaMismatch,
    SpecInvalid,
)
from .model import (
    DesignSpec,
    ProblemInstance,
    TargetSpec,
    gen_instance,
    lr_norm,
    population_risk,
)
from .rng import derive_seed
from .solver import SolverOptions, solve_min_lp
from .theory import (
    gaussian_abs_moment,
    ray_scale_prediction,
    theory_inputs,
    unified_norm_prediction,
)

SCHEMA = (
    "experiment_id", "seed", "n", "d", "s", "target_kind", "a", "sigma",
    "selector_kind", "p", "alpha", "lr", "r", "norm_emp", "norm_pred",
    "slope_pred", "regime_pred", "t_star_pred", "n_star_pred", "r_star",
    "test_mse", "feas_residual", "solver_iters", "status",
)

_INT_FIELDS = {"seed", "n", "d", "s", "solver_iters"}
_STR_FIELDS = {"experiment_id", "target_kind", "selector_kind", "regime_pred", "status"}

SELECTOR_KINDS = ("explicit_p", "dln_alpha")


@dataclass(frozen=True)
class Selector:
    """Which interpolator produces w_hat: explicit min-lp or a DLN run."""

    kind: str
    p_list: tuple[float, ...] = ()
    alpha_lr_list: tuple[tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in SELECTOR_KINDS:
            raise SpecInvalid(f"unknown selector kind {self.kind!r}")
        if self.kind == "explicit_p" and not self.p_list:
            raise SpecInvalid("explicit_p selector needs a nonempty p_list")
        if self.kind == "dln_alpha" and not self.alpha_lr_list:
            raise SpecInvalid("dln_alpha selector needs a nonempty alpha_lr_list")
        object.__setattr__(self, "p_list", tuple(float(p) for p in self.p_list))
        object.__setattr__(
            self, "alpha_lr_list",
            tuple((float(a), float(lr)) for a, lr in self.alpha_lr_list),
        )

    def values(self) -> tuple:
        return self.p_list if self.kind == "explicit_p" else self.alpha_lr_list


@dataclass(frozen=True)
class SweepConfig:
    target: TargetSpec
    design: DesignSpec
    sigma_list: tuple[float, ...]
    selector: Selector
    n_grid: tuple[int, ...]
    r_list: tuple[float, ...]
    seeds_per_cell: int
    output_path: str
    experiment_id: str = "sweep"
    base_seed: int = 0
    solver_opts: SolverOptions = field(default_factory=SolverOptions)
    dln_cfg: DlnConfig | None = None

    def __post_init__(self) -> None:
        if not self.sigma_list or not self.n_grid or not self.r_list:
            raise SpecInvalid("sigma_list, n_grid, r_list must be nonempty")
        if self.seeds_per_cell < 1:
            raise SpecInvalid("seeds_per_cell must be >= 1")
        object.__setattr__(self, "sigma_list", tuple(float(s) for s in self.sigma_list))
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "r_list", tuple(float(r) for r in self.r_list))
        # the scaling theory covers r in [1, p]; outside values still run
        r_cap = max(self.selector.p_list) if self.selector.kind == "explicit_p" else 2.0
        if any(r < 1.0 or r > r_cap for r in self.r_list):
            warnings.warn(
                f"r_list {self.r_list} leaves [1, {r_cap}]; predictions extrapolate",
                stacklevel=2,
            )

    @classmethod
    def from_dict(cls, doc: dict) -> "SweepConfig":
        doc = dict(doc)
        target = TargetSpec(**doc.pop("target"))
        design = DesignSpec(**doc.pop("design"))
        selector_doc = dict(doc.pop("selector"))
        if "alpha_lr_list" in selector_doc:
            selector_doc["alpha_lr_list"] = tuple(
                tuple(pair) for pair in selector_doc["alpha_lr_list"]
            )
        selector = Selector(**selector_doc)
        solver_opts = SolverOptions(**doc.pop("solver_opts", {}))
        dln_doc = doc.pop("dln_cfg", None)
        dln_cfg = DlnConfig(**dln_doc) if dln_doc else None
        return cls(target=target, design=design, selector=selector,
                   solver_opts=solver_opts, dln_cfg=dln_cfg, **doc)

    @classmethod
    def from_json(cls, path: str) -> "SweepConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class SweepRecord:
    """One (trial, r) row; field order is the CSV schema."""

    experiment_id: str
    seed: int
    n: int
    d: int
    s: int
    target_kind: str
    a: float
    sigma: float
    selector_kind: str
    p: float
    alpha: float
    lr: float
    r: float
    norm_emp: float
    norm_pred: float
    slope_pred: float
    regime_pred: str
    t_star_pred: float
    n_star_pred: float
    r_star: float
    test_mse: float
    feas_residual: float
    solver_iters: int
    status: str


assert tuple(f.name for f in fields(SweepRecord)) == SCHEMA


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------
def _fmt(value) -> str:
    if isinstance(value, str):
        # commas/newlines would break the no-quoting schema contract
        return value.replace(",", ";").replace("\n", " ")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def record_to_line(rec: SweepRecord) -> str:
    return ",".join(_fmt(getattr(rec, name)) for name in SCHEMA)


def write_csv(records: list[SweepRecord], path: str) -> None:
    """Write header + rows; floats at 17 significant digits round-trip exactly."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(SCHEMA) + "\n")
        for rec in records:
            fh.write(record_to_line(rec) + "\n")


def read_csv(path: str) -> list[SweepRecord]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header.split(",") != list(SCHEMA):
            raise SchemaMismatch(f"header of {path} does not match the sweep schema")
        records = []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            if len(parts) != len(SCHEMA):
                raise SchemaMismatch(f"row with {len(parts)} fields in {path}")
            kwargs = {}
            for name, raw in zip(SCHEMA, parts):
                if name in _STR_FIELDS:
                    kwargs[name] = raw
                elif name in _INT_FIELDS:
                    kwargs[name] = int(raw)
                else:
                    kwargs[name] = float(raw)
            records.append(SweepRecord(**kwargs))
    return records


def _sort_key(rec: SweepRecord):
    return (rec.experiment_id, rec.n, rec.seed, rec.r, rec.sigma, rec.p, rec.alpha)


# ---------------------------------------------------------------------------
# Cell execution
# ---------------------------------------------------------------------------
def cell_seed(cfg: SweepConfig, sigma: float, sel_value, n: int, trial: int) -> int:
    """Derived seed for one cell; the label format is part of reproducibility."""
    label = f"{cfg.experiment_id}|sigma={sigma!r}|sel={sel_value!r}|n={n}"
    return derive_seed(cfg.base_seed, label, trial)


def _failed_records(cfg: SweepConfig, sigma, sel_value, n, seed, err) -> list[SweepRecord]:
    nan = float("nan")
    if cfg.selector.kind == "explicit_p":
        p_val, alpha, lr = float(sel_value), nan, nan
    else:
        alpha, lr = sel_value
        p_val = nan
    return [
        SweepRecord(
            experiment_id=cfg.experiment_id, seed=seed, n=n, d=0, s=cfg.target.s,
            target_kind=cfg.target.kind, a=cfg.target.magnitude(), sigma=sigma,
            selector_kind=cfg.selector.kind, p=p_val, alpha=alpha, lr=lr, r=r,
            norm_emp=nan, norm_pred=nan, slope_pred=nan, regime_pred="failed",
            t_star_pred=nan, n_star_pred=nan, r_star=nan, test_mse=nan,
            feas_residual=nan, solver_iters=0,
            status=f"failed:{type(err).__name__}:{err}",
        )
        for r in cfg.r_list
    ]


def run_cell(cfg: SweepConfig, sigma: float, sel_value, n: int, trial: int) -> list[SweepRecord]:
    """Generate, solve/train, and join theory for a single cell."""
    seed = cell_seed(cfg, sigma, sel_value, n, trial)
    try:
        inst = gen_instance(cfg.target, cfg.design, sigma, n, seed)
        if cfg.selector.kind == "explicit_p":
            p_val = float(sel_value)
            alpha = lr = float("nan")
            sol = solve_min_lp(inst.X, inst.Y, p_val, cfg.solver_opts)
            w_hat = sol.w_hat
            feas, iters = sol.feas_residual, sol.iters
            status = "ok" if sol.converged else "not_converged"
        else:
            alpha, lr = sel_value
            p_val = _p_eff_cached(alpha)
            base = cfg.dln_cfg or DlnConfig(alpha=alpha, lr=lr)
            report = dln_train(inst.X, inst.Y, replace(base, alpha=alpha, lr=lr))
            w_hat = report.beta
            norm_y = float(np.linalg.norm(inst.Y))
            feas = math.sqrt(report.final_loss * inst.n) / norm_y if norm_y else 0.0
            iters = report.epochs_run
            status = "ok" if report.status == "interpolated" else report.status

        mse = population_risk(w_hat, inst.w_star, sigma)
        records = []
        for r in cfg.r_list:
            ti = theory_inputs(cfg.target, inst.d, n, sigma, p_val, r)
            pred = unified_norm_prediction(ti, n)
            records.append(SweepRecord(
                experiment_id=cfg.experiment_id, seed=seed, n=n, d=inst.d, s=inst.s,
                target_kind=cfg.target.kind, a=cfg.target.magnitude(), sigma=sigma,
                selector_kind=cfg.selector.kind, p=p_val, alpha=alpha, lr=lr, r=r,
                norm_emp=lr_norm(w_hat, r), norm_pred=pred.value,
                slope_pred=pred.slope, regime_pred=pred.regime,
                t_star_pred=ray_scale_prediction(ti, n), n_star_pred=pred.n_star,
                r_star=pred.r_star, test_mse=mse, feas_residual=feas,
                solver_iters=iters, status=status,
            ))
        return records
    except Exception as err:  # straggler cells must not abort the sweep
        return _failed_records(cfg, sigma, sel_value, n, seed, err)


_PEFF_CACHE: dict[float, float] = {}


def _p_eff_cached(alpha: float) -> float:
    if alpha not in _PEFF_CACHE:
        _PEFF_CACHE[alpha] = p_eff(alpha, CalibrationConfig())[0]
    return _PEFF_CACHE[alpha]


def _cells(cfg: SweepConfig):
    for sigma in cfg.sigma_list:
        for sel_value in cfg.selector.values():
            for n in cfg.n_grid:
                for trial in range(cfg.seeds_per_cell):
                    yield sigma, sel_value, n, trial


def _run_cell_star(args):
    return run_cell(*args)


def worker_count() -> int:
    raw = os.environ.get("NORMSCALER_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_sweep(cfg: SweepConfig) -> list[SweepRecord]:
    """Execute every cell, appending to the CSV as results arrive.

    Failed cells become status=failed rows; the sweep never aborts on a
    straggler.  On completion the CSV is rewritten in sorted order.
    """
    jobs = [(cfg, sigma, sel, n, trial) for sigma, sel, n, trial in _cells(cfg)]
    records: list[SweepRecord] = []
    out = cfg.output_path
    if out:
        os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    workers = worker_count()

    def append_rows(rows: list[SweepRecord], fh) -> None:
        records.extend(rows)
        if fh is not None:
            for rec in rows:
                fh.write(record_to_line(rec) + "\n")
            fh.flush()

    fh = open(out, "w", encoding="utf-8", newline="\n") if out else None
    try:
        if fh is not None:
            fh.write(",".join(SCHEMA) + "\n")
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for rows in pool.map(_run_cell_star, jobs):
                    append_rows(rows, fh)
        else:
            for job in jobs:
                append_rows(run_cell(*job), fh)
    finally:
        if fh is not None:
            fh.close()

    records.sort(key=_sort_key)
    if out:
        write_csv(records, out)
    return records


# ---------------------------------------------------------------------------
# Fits and diagnostics
# ---------------------------------------------------------------------------
def fit_loglog_slope(points, window: tuple[float, float]) -> tuple[float, float, float]:
    """OLS of log(value) on log(n) inside [n_lo, n_hi]: (slope, intercept, stderr)."""
    n_lo, n_hi = window
    sel = [(n, v) for n, v in points if n_lo <= n <= n_hi]
    if len(sel) < 3:
        raise InsufficientPoints(f"{len(sel)} points in window [{n_lo}, {n_hi}]; need >= 3")
    if any(v <= 0 for _, v in sel):
        raise NonPositiveValue("log-log fit requires positive values")
    x = np.log([n for n, _ in sel])
    y = np.log([v for _, v in sel])
    xbar, ybar = x.mean(), y.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    slope = float(np.sum((x - xbar) * (y - ybar))) / sxx
    intercept = ybar - slope * xbar
    resid = y - (intercept + slope * x)
    dof = max(len(sel) - 2, 1)
    stderr = math.sqrt(float(resid @ resid) / dof / sxx)
    return slope, intercept, stderr


@dataclass
class ElbowFit:
    """Best two-segment continuous fit in log-log coordinates."""

    n_elbow: float
    sse: float
    left_slope: float
    right_slope: float
    no_elbow: bool
    sse_single: float


def detect_elbow(points) -> ElbowFit:
    """Continuous hinge fit y = a + b x + c (x - x0)+ over interior breakpoints.

    If the best breakpoint improves SSE over a single line by less than 1%,
    the flat is flagged: the data are consistent with one power law.
    """
    pts = sorted((float(n), float(v)) for n, v in points)
    if len(pts) < 6:
        raise InsufficientPoints(f"{len(pts)} points; need >= 6 for an elbow fit")
    if any(v <= 0 or n <= 0 for n, v in pts):
        raise NonPositiveValue("elbow fit requires positive n and values")
    x = np.log([n for n, _ in pts])
    y = np.log([v for _, v in pts])

    ones = np.ones_like(x)
    coef_line, res_line, *_ = np.linalg.lstsq(np.column_stack([ones, x]), y, rcond=None)
    sse_line = float(res_line[0]) if res_line.size else float(
        np.sum((y - np.column_stack([ones, x]) @ coef_line) ** 2)
    )

    best = None
    for i in range(2, len(x) - 2):
        x0 = x[i]
        hinge = np.maximum(x - x0, 0.0)
        design = np.column_stack([ones, x, hinge])
        coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
        sse = float(np.sum((y - design @ coef) ** 2))
        if best is None or sse < best[0]:
            best = (sse, x0, float(coef[1]), float(coef[1] + coef[2]))
    sse, x0, left, right = best
    # a single line that already explains the data to float precision is
    # "no elbow" regardless of the relative improvement of the hinge
    sst = float(np.sum((y - y.mean()) ** 2))
    noise_floor = 1e-20 * max(sst, 1.0)
    improvement = 1.0 - sse / sse_line if sse_line > noise_floor else 0.0
    return ElbowFit(
        n_elbow=math.exp(x0), sse=sse, left_slope=left, right_slope=right,
        no_elbow=improvement < 0.01, sse_single=sse_line,
    )


@dataclass
class ConcentrationReport:
    """Empirical checks of the norm, bulk-moment, and spike decompositions."""

    y_sq_ratio: float          # ||Y||^2 / (tau_s^2 n)
    bulk_ratio: float          # mean bulk |<X_j, Y>|^q over m_q ||Y||^q
    bulk_defined: bool
    spike_sum: float           # sum_{j in S} |<X_j, Y>|^q
    spike_pred: float          # n^q W_q
    spike_ratio: float
    total: float               # ||X^T Y||_q^q
    total_pred: float          # three-term decomposition with constants 1
    total_ratio: float


def diagnose_concentration(inst: ProblemInstance, q: float) -> ConcentrationReport:
    """Compare ||Y||^2, bulk moments, spike sum, and the full ||X^T Y||_q^q
    against their predicted scales on one instance."""
    s, n, d = inst.s, inst.n, inst.d
    w_sup = inst.w_star[:s]
    tau_sq = float(w_sup @ w_sup) + inst.sigma**2
    v = inst.X.T @ inst.Y
    abs_v = np.abs(v)
    norm_y = float(np.linalg.norm(inst.Y))
    m_q = gaussian_abs_moment(q)

    y_sq_ratio = norm_y**2 / (tau_sq * n) if tau_sq > 0 else float("nan")

    bulk = abs_v[s:]
    bulk_defined = bulk.size > 0
    if bulk_defined and norm_y > 0:
        bulk_ratio = float(np.mean((bulk / norm_y) ** q)) / m_q
    else:
        bulk_ratio = float("nan")

    spike_sum = float(np.sum(abs_v[:s] ** q))
    W_q = float(np.sum(np.abs(w_sup) ** q))
    spike_pred = n**q * W_q
    spike_ratio = spike_sum / spike_pred if spike_pred > 0 else float("nan")

    total = float(np.sum(abs_v**q))
    tau_q = tau_sq ** (q / 2.0)
    total_pred = spike_pred + (d - s) * m_q * tau_q * n ** (q / 2.0) + tau_q * (
        s * n ** (q / 2.0) + s ** (1.0 + q / 2.0)
    )
    return ConcentrationReport(
        y_sq_ratio=y_sq_ratio, bulk_ratio=bulk_ratio, bulk_defined=bulk_defined,
        spike_sum=spike_sum, spike_pred=spike_pred, spike_ratio=spike_ratio,
        total=total, total_pred=total_pred,
        total_ratio=total / total_pred if total_pred > 0 else float("nan"),
    )
