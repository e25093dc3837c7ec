"""Independent oracles used by the test suite.

These deliberately avoid the dual-ascent code path: the subgradient oracle
works in the primal with explicit affine projections, and the grid oracle
maximizes the one-dimensional ray restriction by brute force.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve


def projected_subgradient_min_lp(X, Y, p, w0, iters=1_000_000, step0=None):
    """Primal projected-(sub)gradient descent on ||w||_p over {w : Xw = Y}.

    The affine projection w |-> P w + b is precomputed densely
    (P = I - X^+ X, b = X^+ Y), so each iteration is one d x d matvec.
    Diminishing steps step0/sqrt(k); returns the best lp norm seen.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    d = X.shape[1]
    gram = cho_factor(X @ X.T)
    pinv_rows = cho_solve(gram, X).T          # X^+ = X^T (XX^T)^{-1}, d x n
    proj = np.eye(d) - pinv_rows @ X
    offset = pinv_rows @ Y

    w = proj @ np.asarray(w0, dtype=float) + offset
    best = np.sum(np.abs(w) ** p) ** (1.0 / p)
    if step0 is None:
        step0 = 0.1 * best / max(np.linalg.norm(w), 1e-12)
    for k in range(1, iters + 1):
        norm = np.sum(np.abs(w) ** p) ** (1.0 / p)
        if norm < best:
            best = norm
        # gradient of ||w||_p (smooth for p > 1 away from 0)
        g = norm ** (1.0 - p) * np.sign(w) * np.abs(w) ** (p - 1.0)
        w -= step0 / np.sqrt(k) * g
        w = proj @ w
        w += offset
    norm = np.sum(np.abs(w) ** p) ** (1.0 / p)
    return min(best, norm)


def ray_scale_grid_oracle(X, Y, q, lo=1e-8, hi=1e4, coarse=2000, refine=4):
    """Brute-force maximizer of D(t) = t ||Y||^2 - (t^q / q) ||X^T Y||_q^q."""
    yy = float(Y @ Y)
    vq = float(np.sum(np.abs(X.T @ Y) ** q))

    def dval(t):
        return t * yy - t**q / q * vq

    grid = np.logspace(np.log10(lo), np.log10(hi), coarse)
    for _ in range(refine):
        vals = dval(grid)
        i = int(np.argmax(vals))
        lo_i, hi_i = max(i - 1, 0), min(i + 1, len(grid) - 1)
        grid = np.linspace(grid[lo_i], grid[hi_i], coarse)
    return float(grid[int(np.argmax(dval(grid)))])
