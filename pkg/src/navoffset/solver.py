"""Alternating reweighted least-squares fit of the two weight matrices.

Each iteration rebuilds the diagonal reweighting vectors from the current
blocks, then solves two symmetric positive-definite systems in closed form:

    (X X' + lam1 Q + ridge I) W = X (Yhat - U'E)'
    (E E' + lam2 P + ridge I) U = E (Yhat - W'X)'

With Q carrying 1/(2 max(||W_i||_F, eps)) per row, the W step is the exact
minimizer of the majorizing surrogate

    ||Yhat - W'X - U'E||_F^2 + lam1 sum_i tr(W_i' Q_i W_i),

and symmetrically for U, which is what makes the true objective
non-increasing; the test suite asserts that descent over randomized
instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import NonFiniteObjective, SingularSystem
from .model import TrainingSet, WeightU, WeightW
from .norms import ObjectiveBreakdown, build_p, build_q, objective


@dataclass(frozen=True)
class FitOptions:
    """Hyperparameters and numerical knobs for :func:`fit`.

    seed=None starts both weight matrices at zero (the deterministic
    default); an integer seed draws a small random initialization instead,
    used by robustness tests.
    """

    lam1: float = 0.1
    lam2: float = 10.0
    eps: float = 1e-8
    ridge: float = 1e-10
    tol: float = 1e-8
    max_iters: int = 200
    seed: int | None = None

    def __post_init__(self):
        if self.lam1 < 0 or self.lam2 < 0:
            raise ValueError("lam1 and lam2 must be nonnegative")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.eps <= 0 or self.ridge < 0:
            raise ValueError("eps must be > 0 and ridge >= 0")


@dataclass(frozen=True)
class FitResult:
    W: WeightW
    U: WeightU
    trace: list[ObjectiveBreakdown] = field(repr=False)
    converged: bool
    iterations: int


def _spd_solve(gram: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    try:
        c, low = scipy.linalg.cho_factor(gram, check_finite=False)
        return scipy.linalg.cho_solve((c, low), rhs, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise SingularSystem(f"{what} system is numerically singular: {exc}") from exc


def solve_w(
    data: TrainingSet, u: WeightU, q_diag: np.ndarray, lam1: float, ridge: float = 1e-10
) -> WeightW:
    """Closed-form W update for fixed U and fixed reweighting diagonal."""
    gram = data.X @ data.X.T
    gram[np.diag_indices_from(gram)] += lam1 * q_diag + ridge
    rhs = data.X @ (data.Yhat - u.values.T @ data.E).T
    return WeightW(_spd_solve(gram, rhs, "W"), data.layout)


def solve_u(
    data: TrainingSet, w: WeightW, p_diag: np.ndarray, lam2: float, ridge: float = 1e-10
) -> WeightU:
    """Closed-form U update for fixed W and fixed reweighting diagonal."""
    gram = data.E @ data.E.T
    gram[np.diag_indices_from(gram)] += lam2 * p_diag + ridge
    rhs = data.E @ (data.Yhat - w.values.T @ data.X).T
    return WeightU(_spd_solve(gram, rhs, "U"), data.layout)


def _initial_weights(data: TrainingSet, seed: int | None) -> tuple[WeightW, WeightU]:
    lay = data.layout
    if seed is None:
        return (
            WeightW(np.zeros((lay.d, lay.r)), lay),
            WeightU(np.zeros((lay.r * lay.c, lay.r)), lay),
        )
    rng = np.random.default_rng(seed)
    return (
        WeightW(0.1 * rng.standard_normal((lay.d, lay.r)), lay),
        WeightU(0.1 * rng.standard_normal((lay.r * lay.c, lay.r)), lay),
    )


def fit(data: TrainingSet, opts: FitOptions) -> FitResult:
    """Run the alternating algorithm until the objective stalls.

    The returned trace starts with the objective of the initial weights and
    gains one entry per iteration (evaluated after the U update).  Stops when
    the relative change of the total drops below ``opts.tol`` or after
    ``opts.max_iters`` iterations, whichever comes first.
    """
    w, u = _initial_weights(data, opts.seed)
    trace = [objective(w, u, data, opts.lam1, opts.lam2)]
    if not np.isfinite(trace[0].total):
        raise NonFiniteObjective("objective is not finite at initialization")

    converged = False
    iterations = 0
    for _ in range(opts.max_iters):
        q_diag = build_q(w, opts.eps)
        w = solve_w(data, u, q_diag, opts.lam1, opts.ridge)
        p_diag = build_p(u, opts.eps)
        u = solve_u(data, w, p_diag, opts.lam2, opts.ridge)
        current = objective(w, u, data, opts.lam1, opts.lam2)
        if not np.isfinite(current.total):
            raise NonFiniteObjective(f"objective became non-finite at iteration {iterations + 1}")
        previous = trace[-1]
        trace.append(current)
        iterations += 1
        if abs(previous.total - current.total) / max(previous.total, 1e-12) < opts.tol:
            converged = True
            break

    return FitResult(W=w, U=u, trace=trace, converged=converged, iterations=iterations)
