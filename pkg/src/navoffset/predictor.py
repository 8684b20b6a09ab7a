"""Execution-time behavior generation from trained weights.

During execution the robot keeps a short ring buffer of completed steps
(feature frame, expected behavior, actual behavior).  From that history it
computes the current offset U'e, a predicted future offset obtained by
inverting each temporal block against its frame's behavior residual, and the
final behavior command W'x + predicted + U'e.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .errors import DimensionMismatch, SingularTemporalBlock
from .model import ModalityLayout, WeightU, WeightW, build_differences

# A temporal block counts as singular when its smallest singular value is
# below this fraction of its largest.
SINGULAR_RATIO = 1e-8


class ExecutionState:
    """Ring buffer of the last ``c`` completed steps, newest first."""

    def __init__(self, layout: ModalityLayout):
        self.layout = layout
        self._entries = deque(maxlen=layout.c)

    def push(self, frame, expected, actual) -> None:
        frame = np.asarray(frame, dtype=float).ravel()
        expected = np.asarray(expected, dtype=float).ravel()
        actual = np.asarray(actual, dtype=float).ravel()
        if frame.shape != (self.layout.q,):
            raise DimensionMismatch(f"frame must have length {self.layout.q}")
        if expected.shape != (self.layout.r,) or actual.shape != (self.layout.r,):
            raise DimensionMismatch(f"behaviors must have length {self.layout.r}")
        self._entries.appendleft((frame, expected, actual))

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def full(self) -> bool:
        return len(self._entries) == self.layout.c

    def entry(self, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(frame, expected, actual) for history slot k, 0 = most recent."""
        return self._entries[k]

    def difference_vector(self) -> np.ndarray:
        """Stacked (actual - expected) over the window, most recent first."""
        if not self.full:
            raise DimensionMismatch(
                f"difference vector needs {self.layout.c} entries, have {len(self)}"
            )
        expected = [e for _, e, _ in self._entries]
        actual = [a for _, _, a in self._entries]
        return build_differences(expected, actual, self.layout)


def current_offset(u: WeightU, e) -> np.ndarray:
    """Offset implied by the recent behavior differences: U'e."""
    e = np.asarray(e, dtype=float).ravel()
    if e.shape != (u.layout.r * u.layout.c,):
        raise DimensionMismatch(
            f"difference vector must have length {u.layout.r * u.layout.c}, got {e.shape}"
        )
    return u.values.T @ e


def invert_temporal_blocks(u: WeightU, pseudo_inverse: bool = False) -> np.ndarray:
    """Precompute inv(U_k') for every frame block, shape (c, r, r).

    Raises :class:`SingularTemporalBlock` for any block whose singular-value
    ratio falls below ``SINGULAR_RATIO`` unless pseudo_inverse is set, in
    which case the Moore-Penrose pseudo-inverse is substituted.
    """
    lay = u.layout
    out = np.empty((lay.c, lay.r, lay.r))
    for k in range(lay.c):
        block = u.block(k)
        svals = np.linalg.svd(block, compute_uv=False)
        if svals[0] == 0.0 or svals[-1] < SINGULAR_RATIO * svals[0]:
            if not pseudo_inverse:
                raise SingularTemporalBlock(k)
            out[k] = np.linalg.pinv(block.T)
        else:
            out[k] = np.linalg.inv(block.T)
    return out


def predicted_offset(
    w: WeightW, u: WeightU, state: ExecutionState, pseudo_inverse: bool = False
) -> np.ndarray:
    """Predicted future offset from the stored window.

    Sums, over the c stored frames, the inverse of that frame's temporal
    block applied to the frame's behavior residual (expected minus the
    frame's share of the feed-forward prediction).  Before the window is
    full the prediction is defined as zero.
    """
    lay = state.layout
    if w.layout != lay or u.layout != lay:
        raise DimensionMismatch("weights and state use different layouts")
    if not state.full:
        return np.zeros(lay.r)
    inverses = invert_temporal_blocks(u, pseudo_inverse=pseudo_inverse)
    out = np.zeros(lay.r)
    for k in range(lay.c):
        frame, expected, _ = state.entry(k)
        residual = expected - w.frame(k).T @ frame
        out += inverses[k] @ residual
    return out


def generate_behavior(w: WeightW, u: WeightU, x, e, predicted) -> np.ndarray:
    """Final behavior command: W'x + predicted offset + current offset."""
    x = np.asarray(x, dtype=float).ravel()
    predicted = np.asarray(predicted, dtype=float).ravel()
    if x.shape != (w.layout.d,):
        raise DimensionMismatch(f"instance must have length {w.layout.d}, got {x.shape}")
    if predicted.shape != (w.layout.r,):
        raise DimensionMismatch(f"predicted offset must have length {w.layout.r}")
    return w.values.T @ x + predicted + current_offset(u, e)
