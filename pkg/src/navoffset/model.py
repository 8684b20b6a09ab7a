"""Block-structured data model for windowed multi-modal behavior regression.

Every matrix in the package derives its meaning from a :class:`ModalityLayout`:
feature vectors stack ``c`` frames (most recent first), each frame concatenates
``m`` modalities in layout order, and the two weight matrices partition into
per-modality and per-frame blocks on the same grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange


def _readonly(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ModalityLayout:
    """Block structure: per-modality widths, history length and behavior size.

    widths -- per-modality feature dimensionalities (q_1 .. q_m)
    c      -- number of history frames in one instance window
    r      -- behavior dimensionality
    """

    widths: tuple[int, ...]
    c: int
    r: int

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 1 or any(w < 1 for w in self.widths):
            raise DimensionMismatch(f"every modality width must be >= 1, got {self.widths}")
        if self.c < 1 or self.r < 1:
            raise DimensionMismatch(f"c and r must be >= 1, got c={self.c}, r={self.r}")

    @property
    def m(self) -> int:
        return len(self.widths)

    @property
    def q(self) -> int:
        """Feature dimensions in one frame."""
        return sum(self.widths)

    @property
    def d(self) -> int:
        """Feature dimensions in one stacked window: c * q."""
        return self.c * self.q

    def modality_offset(self, i: int) -> int:
        """Offset of modality ``i`` (1-based) inside a single frame."""
        if not 1 <= i <= self.m:
            raise IndexOutOfRange(f"modality index {i} outside 1..{self.m}")
        return sum(self.widths[: i - 1])

    def modality_rows(self, i: int) -> np.ndarray:
        """Row indices of modality ``i`` gathered across all c frames.

        Rows are frame-major: the slice for frame 0 comes first.
        """
        off = self.modality_offset(i)
        w = self.widths[i - 1]
        frames = np.arange(self.c) * self.q
        return (frames[:, None] + np.arange(off, off + w)[None, :]).ravel()

    def frame_slice(self, k: int) -> slice:
        """Rows of frame ``k`` (0 = most recent) inside a d-vector."""
        if not 0 <= k < self.c:
            raise IndexOutOfRange(f"frame index {k} outside 0..{self.c - 1}")
        return slice(k * self.q, (k + 1) * self.q)

    def temporal_slice(self, k: int) -> slice:
        """Rows of temporal block ``k`` inside an (r*c)-vector."""
        if not 0 <= k < self.c:
            raise IndexOutOfRange(f"frame index {k} outside 0..{self.c - 1}")
        return slice(k * self.r, (k + 1) * self.r)


def build_instance(frames, layout: ModalityLayout) -> np.ndarray:
    """Stack ``c`` feature frames (most recent first) into one window vector.

    Returns a vector of length ``layout.d`` with frames[0] occupying the
    leading ``q`` entries.
    """
    if len(frames) != layout.c:
        raise DimensionMismatch(f"expected {layout.c} frames, got {len(frames)}")
    frames = [np.asarray(f, dtype=float).ravel() for f in frames]
    for f in frames:
        if f.shape != (layout.q,):
            raise DimensionMismatch(f"every frame must have length {layout.q}, got {f.shape}")
    return np.concatenate(frames)


def split_instance(x, layout: ModalityLayout) -> list[np.ndarray]:
    """Inverse of :func:`build_instance`: recover the c frames, most recent first."""
    x = np.asarray(x, dtype=float).ravel()
    if x.shape != (layout.d,):
        raise DimensionMismatch(f"instance must have length {layout.d}, got {x.shape}")
    return [x[layout.frame_slice(k)].copy() for k in range(layout.c)]


def build_differences(expected, actual, layout: ModalityLayout) -> np.ndarray:
    """Stack per-frame behavior differences (actual - expected), most recent first.

    Both inputs are sequences of ``c`` behavior vectors of length ``r``;
    the result has length ``r * c``.
    """
    if len(expected) != layout.c or len(actual) != layout.c:
        raise DimensionMismatch(
            f"expected {layout.c} behavior vectors per stream, "
            f"got {len(expected)} and {len(actual)}"
        )
    blocks = []
    for k in range(layout.c):
        e_k = np.asarray(expected[k], dtype=float).ravel()
        a_k = np.asarray(actual[k], dtype=float).ravel()
        if e_k.shape != (layout.r,) or a_k.shape != (layout.r,):
            raise DimensionMismatch(f"behavior vectors must have length {layout.r}")
        blocks.append(a_k - e_k)
    return np.concatenate(blocks)


@dataclass(frozen=True)
class WeightW:
    """Feature weight matrix, d x r, partitioned into m modality blocks."""

    values: np.ndarray
    layout: ModalityLayout

    def __post_init__(self):
        v = _readonly(self.values)
        if v.shape != (self.layout.d, self.layout.r):
            raise DimensionMismatch(
                f"W must be {self.layout.d}x{self.layout.r}, got {v.shape}"
            )
        object.__setattr__(self, "values", v)

    def block(self, i: int) -> np.ndarray:
        """Rows of modality ``i`` (1-based) across all frames, (c*q_i) x r."""
        return self.values[self.layout.modality_rows(i)]

    def frame(self, k: int) -> np.ndarray:
        """Rows of frame ``k`` (0 = most recent) across all modalities, q x r."""
        return self.values[self.layout.frame_slice(k)]

    @classmethod
    def from_blocks(cls, blocks, layout: ModalityLayout) -> "WeightW":
        """Reassemble from per-modality blocks in layout order."""
        if len(blocks) != layout.m:
            raise DimensionMismatch(f"expected {layout.m} blocks, got {len(blocks)}")
        values = np.empty((layout.d, layout.r))
        for i, b in enumerate(blocks, start=1):
            b = np.asarray(b, dtype=float)
            rows = layout.modality_rows(i)
            if b.shape != (rows.size, layout.r):
                raise DimensionMismatch(
                    f"block {i} must be {rows.size}x{layout.r}, got {b.shape}"
                )
            values[rows] = b
        return cls(values, layout)


@dataclass(frozen=True)
class WeightU:
    """Temporal weight matrix, (r*c) x r, partitioned into c frame blocks."""

    values: np.ndarray
    layout: ModalityLayout

    def __post_init__(self):
        v = _readonly(self.values)
        rc = self.layout.r * self.layout.c
        if v.shape != (rc, self.layout.r):
            raise DimensionMismatch(f"U must be {rc}x{self.layout.r}, got {v.shape}")
        object.__setattr__(self, "values", v)

    def block(self, k: int) -> np.ndarray:
        """The r x r block of frame ``k`` (0 = most recent)."""
        return self.values[self.layout.temporal_slice(k)]

    @classmethod
    def from_blocks(cls, blocks, layout: ModalityLayout) -> "WeightU":
        if len(blocks) != layout.c:
            raise DimensionMismatch(f"expected {layout.c} blocks, got {len(blocks)}")
        values = np.empty((layout.r * layout.c, layout.r))
        for k, b in enumerate(blocks):
            b = np.asarray(b, dtype=float)
            if b.shape != (layout.r, layout.r):
                raise DimensionMismatch(
                    f"block {k} must be {layout.r}x{layout.r}, got {b.shape}"
                )
            values[layout.temporal_slice(k)] = b
        return cls(values, layout)


@dataclass(frozen=True)
class TrainingSet:
    """Aligned training matrices, one column per window instance.

    X    -- d x n stacked feature windows
    Y    -- r x n expected behaviors
    Yhat -- r x n actual behaviors
    E    -- (r*c) x n stacked behavior differences (actual - expected)
    """

    layout: ModalityLayout
    X: np.ndarray
    Y: np.ndarray
    Yhat: np.ndarray
    E: np.ndarray

    def __post_init__(self):
        X = _readonly(self.X)
        Y = _readonly(self.Y)
        Yhat = _readonly(self.Yhat)
        E = _readonly(self.E)
        lay = self.layout
        n = X.shape[1] if X.ndim == 2 else -1
        if n < 1:
            raise DimensionMismatch("training set needs at least one column")
        if X.shape != (lay.d, n):
            raise DimensionMismatch(f"X must be {lay.d}xn, got {X.shape}")
        if Y.shape != (lay.r, n) or Yhat.shape != (lay.r, n):
            raise DimensionMismatch(
                f"Y and Yhat must be {lay.r}x{n}, got {Y.shape} and {Yhat.shape}"
            )
        if E.shape != (lay.r * lay.c, n):
            raise DimensionMismatch(f"E must be {lay.r * lay.c}x{n}, got {E.shape}")
        for name, v in (("X", X), ("Y", Y), ("Yhat", Yhat), ("E", E)):
            object.__setattr__(self, name, v)

    @property
    def n(self) -> int:
        return self.X.shape[1]
