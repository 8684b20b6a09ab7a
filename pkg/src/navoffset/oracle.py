"""Independent certification solver: joint proximal gradient descent.

This module deliberately avoids the alternating solver's machinery.  It
stacks (W, U) into one variable Z, takes gradient steps on the smooth
residual term, and applies the exact proximal operator of each group norm
(Frobenius soft-thresholding per modality block of W and per frame block of
U).  Because the problem is convex, agreement between this solver and the
alternating one certifies that both reached the global optimum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotConverged
from .model import TrainingSet, WeightU, WeightW


@dataclass(frozen=True)
class OracleOptions:
    step_rule: str = "fixed"  # "fixed" (1/L) or "backtracking"
    max_iters: int = 50000
    tol: float = 1e-10

    def __post_init__(self):
        if self.step_rule not in ("fixed", "backtracking"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")


def group_prox(block: np.ndarray, threshold: float) -> np.ndarray:
    """Proximal operator of ``threshold * ||.||_F``: shrink toward zero.

    Returns max(0, 1 - threshold/||block||_F) * block, i.e. the zero matrix
    whenever ||block||_F <= threshold.
    """
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    block = np.asarray(block, dtype=float)
    norm = float(np.linalg.norm(block))
    if norm <= threshold:
        return np.zeros_like(block)
    return (1.0 - threshold / norm) * block


def _spectral_norm_sq(m: np.ndarray, iters: int = 100) -> float:
    """Power-iteration estimate of sigma_max(m)^2."""
    v = np.full(m.shape[1], 1.0 / np.sqrt(m.shape[1]))
    est = 0.0
    for _ in range(iters):
        w = m.T @ (m @ v)
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        est = norm
        v = w / norm
    return est


def _group_rows(layout) -> list[tuple[np.ndarray, int]]:
    """(row indices into the stacked variable, which penalty) per group.

    Penalty id 0 -> lam1 (modality blocks of W), 1 -> lam2 (frame blocks of U).
    """
    groups = [(layout.modality_rows(i), 0) for i in range(1, layout.m + 1)]
    offset = layout.d
    for k in range(layout.c):
        sl = layout.temporal_slice(k)
        groups.append((np.arange(offset + sl.start, offset + sl.stop), 1))
    return groups


def oracle_fit(
    data: TrainingSet,
    lam1: float,
    lam2: float,
    opts: OracleOptions | None = None,
    return_trace: bool = False,
):
    """Minimize the joint objective over (W, U) by proximal gradient.

    Returns (W, U, final_objective), or (W, U, final_objective, trace) when
    ``return_trace`` is set.  Raises :class:`NotConverged` if the relative
    objective change is still above ``opts.tol`` at the iteration cap.
    """
    opts = opts or OracleOptions()
    lay = data.layout
    m_stack = np.vstack([data.X, data.E])  # (d + r*c) x n
    target = data.Yhat
    groups = _group_rows(lay)
    lams = (lam1, lam2)

    def smooth(z):
        res = target - z.T @ m_stack
        return float(np.vdot(res, res))

    def grad(z):
        return 2.0 * (m_stack @ (m_stack.T @ z) - m_stack @ target.T)

    def penalty(z):
        return sum(lams[which] * float(np.linalg.norm(z[rows])) for rows, which in groups)

    def prox(z, step):
        out = np.empty_like(z)
        for rows, which in groups:
            out[rows] = group_prox(z[rows], step * lams[which])
        return out

    # Fixed step: 1/L with L = 2 sigma_max^2 plus a 1% safety margin.
    lipschitz = 2.0 * _spectral_norm_sq(m_stack) * 1.01
    step = 1.0 / lipschitz if lipschitz > 0 else 1.0

    z = np.zeros((lay.d + lay.r * lay.c, lay.r))
    f_prev = smooth(z) + penalty(z)
    trace = [f_prev]
    converged = False
    for _ in range(opts.max_iters):
        g = grad(z)
        if opts.step_rule == "fixed":
            z_new = prox(z - step * g, step)
        else:
            # Backtracking: halve until the quadratic upper bound holds.
            s = step * 16.0
            g_z = smooth(z)
            while True:
                z_new = prox(z - s * g, s)
                diff = z_new - z
                bound = g_z + float(np.vdot(g, diff)) + float(np.vdot(diff, diff)) / (2.0 * s)
                if smooth(z_new) <= bound + 1e-15 * max(1.0, abs(bound)):
                    break
                s *= 0.5
                if s < 1e-20:
                    break
        z = z_new
        f_cur = smooth(z) + penalty(z)
        trace.append(f_cur)
        if abs(f_prev - f_cur) / max(f_prev, 1e-12) < opts.tol:
            converged = True
            f_prev = f_cur
            break
        f_prev = f_cur

    if not converged:
        raise NotConverged(
            f"proximal gradient did not reach tol={opts.tol} within {opts.max_iters} iterations"
        )

    w = WeightW(z[: lay.d], lay)
    u = WeightU(z[lay.d :], lay)
    if return_trace:
        return w, u, f_prev, trace
    return w, u, f_prev
