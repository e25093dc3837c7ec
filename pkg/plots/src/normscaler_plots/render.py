"""Render dual-axis figures (test MSE left, lr norms right) from sweep CSVs.

One figure per (selector value, sigma) group: log-log axes, seeds aggregated
to the median with an interquartile band, and the CSV's theory predictions
drawn as thin dashed guides (optionally shifted vertically by a least-squares
log-space anchor, since only slopes and plateaus carry meaning).

The input contract is the sweep CSV schema reproduced below; this package
never imports the producer.  SVG output is byte-stable for identical inputs.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass, field

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

# Fixed header of the sweep CSV (the producing harness documents this order).
SCHEMA = (
    "experiment_id", "seed", "n", "d", "s", "target_kind", "a", "sigma",
    "selector_kind", "p", "alpha", "lr", "r", "norm_emp", "norm_pred",
    "slope_pred", "regime_pred", "t_star_pred", "n_star_pred", "r_star",
    "test_mse", "feas_residual", "solver_iters", "status",
)

ANCHORS = ("none", "least_squares_shift")
FORMATS = ("svg", "png")

# deterministic SVG ids across processes
matplotlib.rcParams["svg.hashsalt"] = "normscaler-plots"


class SchemaMismatch(ValueError):
    """CSV header does not match the sweep schema."""


class EmptyGroup(ValueError):
    """A selected group contains no plottable rows."""


@dataclass(frozen=True)
class PlotSpec:
    csv_path: str
    output_dir: str
    overlay_theory: bool = True
    anchor: str = "least_squares_shift"
    format: str = "svg"

    def __post_init__(self) -> None:
        if self.anchor not in ANCHORS:
            raise ValueError(f"anchor must be one of {ANCHORS}")
        if self.format not in FORMATS:
            raise ValueError(f"format must be one of {FORMATS}")


def _read_rows(path: str) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != SCHEMA:
            raise SchemaMismatch(f"{path} does not carry the sweep schema")
        rows = []
        for parts in reader:
            row = dict(zip(SCHEMA, parts))
            if row["status"].startswith("failed") or row["status"] == "diverged":
                continue
            for key in ("n", "sigma", "p", "alpha", "r", "norm_emp", "norm_pred", "test_mse"):
                row[key] = float(row[key])
            rows.append(row)
    return rows


def _group_key(row: dict) -> tuple:
    if row["selector_kind"] == "dln_alpha":
        return ("alpha", row["alpha"], row["sigma"])
    return ("p", row["p"], row["sigma"])


def _median_iqr(values_by_n: dict[float, list[float]]):
    ns = sorted(values_by_n)
    med = np.array([np.median(values_by_n[n]) for n in ns])
    lo = np.array([np.percentile(values_by_n[n], 25) for n in ns])
    hi = np.array([np.percentile(values_by_n[n], 75) for n in ns])
    return np.array(ns), med, lo, hi


def _collect(rows, field_name, r=None):
    by_n: dict[float, list[float]] = {}
    for row in rows:
        if r is not None and row["r"] != r:
            continue
        by_n.setdefault(row["n"], []).append(row[field_name])
    return by_n


def _anchor_shift(ns, emp_med, pred_med) -> float:
    """Vertical log-space least-squares shift of the overlay onto the data."""
    mask = (emp_med > 0) & (pred_med > 0) & np.isfinite(pred_med)
    if not np.any(mask):
        return 1.0
    return math.exp(float(np.mean(np.log(emp_med[mask]) - np.log(pred_med[mask]))))


def _slug(value: float) -> str:
    return f"{value:g}".replace(".", "p").replace("-", "m")


def render(spec: PlotSpec) -> list[str]:
    """Render one figure per (selector value, sigma) group; returns file paths."""
    import os

    rows = _read_rows(spec.csv_path)
    if not rows:
        print("warning: no plottable rows; nothing rendered", file=sys.stderr)
        return []

    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault(_group_key(row), []).append(row)

    os.makedirs(spec.output_dir, exist_ok=True)
    outputs = []
    for key in sorted(groups):
        sel_name, sel_value, sigma = key
        grp = groups[key]
        if not grp:
            raise EmptyGroup(f"group {key} has no rows")
        experiment = grp[0]["experiment_id"]

        fig, ax_mse = plt.subplots(figsize=(6.0, 4.2))
        ax_norm = ax_mse.twinx()

        ns, med, lo, hi = _median_iqr(_collect(grp, "test_mse"))
        ax_mse.plot(ns, med, color="black", lw=1.8, label="test MSE")
        ax_mse.fill_between(ns, lo, hi, color="black", alpha=0.15, lw=0)

        r_values = sorted({row["r"] for row in grp})
        cmap = plt.get_cmap("viridis")
        for i, r in enumerate(r_values):
            color = cmap(0.15 + 0.7 * i / max(len(r_values) - 1, 1))
            ns_r, med_r, lo_r, hi_r = _median_iqr(_collect(grp, "norm_emp", r=r))
            ax_norm.plot(ns_r, med_r, color=color, lw=1.5, label=f"$\\ell_{{{r:g}}}$")
            ax_norm.fill_between(ns_r, lo_r, hi_r, color=color, alpha=0.18, lw=0)
            if spec.overlay_theory:
                ns_p, pred_med, _, _ = _median_iqr(_collect(grp, "norm_pred", r=r))
                shift = 1.0
                if spec.anchor == "least_squares_shift":
                    shift = _anchor_shift(ns_p, med_r, pred_med)
                finite = np.isfinite(pred_med) & (pred_med > 0)
                ax_norm.plot(ns_p[finite], shift * pred_med[finite], color=color,
                             lw=0.9, ls="--", alpha=0.9)

        ax_mse.set_xscale("log")
        ax_mse.set_yscale("log")
        ax_norm.set_yscale("log")
        ax_mse.set_xlabel("n")
        ax_mse.set_ylabel("test MSE")
        ax_norm.set_ylabel(r"$\|\hat w\|_r$")
        title_sel = f"{sel_name}={sel_value:g}"
        ax_mse.set_title(f"{experiment}: {title_sel}, $\\sigma$={sigma:g}")
        handles1, labels1 = ax_mse.get_legend_handles_labels()
        handles2, labels2 = ax_norm.get_legend_handles_labels()
        ax_norm.legend(handles1 + handles2, labels1 + labels2, fontsize=8, loc="upper left")
        fig.tight_layout()

        name = f"{experiment}_{sel_name}{_slug(sel_value)}_sigma{_slug(sigma)}.{spec.format}"
        path = os.path.join(spec.output_dir, name)
        # metadata dates would break byte-identical re-renders
        fig.savefig(path, metadata={"Date": None} if spec.format == "svg" else None)
        plt.close(fig)
        outputs.append(path)
    return outputs


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="render", description=__doc__)
    parser.add_argument("--csv", required=True, help="sweep CSV produced by the harness")
    parser.add_argument("--out", required=True, help="output directory for figures")
    parser.add_argument("--no-theory", action="store_true", help="suppress dashed theory overlays")
    parser.add_argument("--anchor", default="least_squares_shift", choices=ANCHORS,
                        help="vertical placement of overlays")
    parser.add_argument("--format", default="svg", choices=FORMATS)
    args = parser.parse_args(argv)
    try:
        spec = PlotSpec(csv_path=args.csv, output_dir=args.out,
                        overlay_theory=not args.no_theory,
                        anchor=args.anchor, format=args.format)
        paths = render(spec)
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    for path in paths:
        print(path)
    return 0


def entry() -> None:
    raise SystemExit(main())
