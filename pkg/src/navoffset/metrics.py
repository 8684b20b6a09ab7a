"""Evaluation metrics over simulated runs.

Inconsistency accumulates squared pose error (position plus wrapped heading,
heading weighted 1 per rad^2) between an expected and an actual pose stream.
Jerkiness is the mean absolute third finite difference of position per axis,
in m/s^3.  Aggregation follows the convention that only non-failed runs
contribute to the metric means.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, LengthMismatch, TooShort

HEADING_WEIGHT = 1.0  # m^2 per rad^2


def wrap_angle(a):
    """Wrap angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a, dtype=float), 2.0 * np.pi)


def inconsistency(expected, actual) -> float:
    """Accumulated squared pose error between two aligned pose streams.

    Both streams are (n, 3) arrays of (x, y, heading).  Heading differences
    are wrapped, so pi and -pi agree exactly.
    """
    expected = np.asarray(expected, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if expected.shape != actual.shape:
        raise LengthMismatch(f"pose streams differ: {expected.shape} vs {actual.shape}")
    if expected.ndim != 2 or expected.shape[1] != 3:
        raise LengthMismatch(f"pose streams must be (n, 3), got {expected.shape}")
    dpos = expected[:, :2] - actual[:, :2]
    dhead = wrap_angle(expected[:, 2] - actual[:, 2])
    return float(np.sum(dpos * dpos) + HEADING_WEIGHT * np.sum(dhead * dhead))


def jerkiness(trajectory, dt: float) -> float:
    """Mean absolute third finite difference of position per step, summed over axes.

    Uses the centered stencil where available and one-sided stencils at the
    edges; all three are exact for cubic trajectories.  Needs at least four
    samples.
    """
    pos = np.asarray(trajectory, dtype=float)
    if pos.ndim != 2 or pos.shape[1] < 2:
        raise TooShort(f"trajectory must be (n, >=2), got {pos.shape}")
    pos = pos[:, :2]
    n = pos.shape[0]
    if n < 4:
        raise TooShort(f"need at least 4 samples for a third difference, got {n}")
    d3 = np.empty_like(pos)
    # centered: (p[t+2] - 2 p[t+1] + 2 p[t-1] - p[t-2]) / 2
    if n >= 5:
        d3[2 : n - 2] = (pos[4:] - 2.0 * pos[3 : n - 1] + 2.0 * pos[1 : n - 3] - pos[: n - 4]) / 2.0
    forward = pos[3] - 3.0 * pos[2] + 3.0 * pos[1] - pos[0]
    backward = pos[n - 1] - 3.0 * pos[n - 2] + 3.0 * pos[n - 3] - pos[n - 4]
    d3[0] = d3[1] = forward
    d3[n - 2] = d3[n - 1] = backward
    return float(np.mean(np.sum(np.abs(d3), axis=1))) / dt**3


@dataclass(frozen=True)
class RunMetrics:
    """Per-run outcome; inconsistency and jerkiness are None for failed runs."""

    failed: bool
    traversal_time: float | None
    inconsistency: float | None
    jerkiness: float | None
    failure_reason: str | None = None


@dataclass(frozen=True)
class AggregateSummary:
    n_runs: int
    n_failed: int
    failure_rate: float
    traversal_time: float | None
    inconsistency: float | None
    jerkiness: float | None


def aggregate(runs) -> AggregateSummary:
    """Failure rate over all runs; metric means over the non-failed ones."""
    runs = list(runs)
    if not runs:
        raise EmptyInput("cannot aggregate zero runs")
    ok = [m for m in runs if not m.failed]
    n_failed = len(runs) - len(ok)

    def mean_of(attr):
        values = [getattr(m, attr) for m in ok if getattr(m, attr) is not None]
        return float(np.mean(values)) if values else None

    return AggregateSummary(
        n_runs=len(runs),
        n_failed=n_failed,
        failure_rate=n_failed / len(runs),
        traversal_time=mean_of("traversal_time"),
        inconsistency=mean_of("inconsistency"),
        jerkiness=mean_of("jerkiness"),
    )
