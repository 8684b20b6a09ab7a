"""Structured regularizers, their reweighting diagonals, and the objective.

The feature-modality norm sums the Frobenius norms of the per-modality blocks
of W; the temporal norm sums the Frobenius norms of the per-frame blocks of U.
Both are plain (non-overlapping) group norms, so their IRLS reweighting
matrices are diagonal and are stored as vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .model import ModalityLayout, TrainingSet, WeightU, WeightW


def modality_norm(w: WeightW) -> float:
    """Sum over modalities of the Frobenius norm of that modality's block."""
    return float(sum(np.linalg.norm(w.block(i)) for i in range(1, w.layout.m + 1)))


def temporal_norm(u: WeightU) -> float:
    """Sum over history frames of the Frobenius norm of that frame's block."""
    return float(sum(np.linalg.norm(u.block(k)) for k in range(u.layout.c)))


def build_q(w: WeightW, eps: float) -> np.ndarray:
    """Diagonal of the d x d reweighting matrix for W.

    Rows of modality block i carry 1 / (2 * max(||W_i||_F, eps)); the eps
    clamp guards the zero-block singularity.
    """
    if eps <= 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    lay = w.layout
    diag = np.empty(lay.d)
    for i in range(1, lay.m + 1):
        norm_i = max(float(np.linalg.norm(w.block(i))), eps)
        diag[lay.modality_rows(i)] = 1.0 / (2.0 * norm_i)
    return diag


def build_p(u: WeightU, eps: float) -> np.ndarray:
    """Diagonal of the (r*c) x (r*c) reweighting matrix for U."""
    if eps <= 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    lay = u.layout
    diag = np.empty(lay.r * lay.c)
    for k in range(lay.c):
        norm_k = max(float(np.linalg.norm(u.block(k))), eps)
        diag[lay.temporal_slice(k)] = 1.0 / (2.0 * norm_k)
    return diag


@dataclass(frozen=True)
class ObjectiveBreakdown:
    """The three objective terms and their weighted total."""

    loss: float
    modality_penalty: float
    temporal_penalty: float
    total: float


def objective(
    w: WeightW, u: WeightU, data: TrainingSet, lam1: float, lam2: float
) -> ObjectiveBreakdown:
    """Evaluate the regularized objective.

    loss = ||Yhat - W'X - U'E||_F^2, plus lam1 * modality norm of W and
    lam2 * temporal norm of U; the total is accumulated in exactly that order.
    """
    if lam1 < 0 or lam2 < 0:
        raise ValueError("regularization weights must be nonnegative")
    if w.layout != data.layout or u.layout != data.layout:
        raise DimensionMismatch("weights and data use different layouts")
    residual = data.Yhat - w.values.T @ data.X - u.values.T @ data.E
    loss = float(np.vdot(residual, residual))
    mp = modality_norm(w)
    tp = temporal_norm(u)
    total = loss + lam1 * mp + lam2 * tp
    return ObjectiveBreakdown(loss=loss, modality_penalty=mp, temporal_penalty=tp, total=total)
