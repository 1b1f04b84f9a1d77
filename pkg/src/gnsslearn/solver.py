"""Gauss-Newton weighted least-squares position solver.

Iterates dy = (H^T W H)^-1 H^T W (z - h(y)) from an initial state until the
step norm drops below the configured tolerance. Weights may be zero for
individual satellites; those rows stay in the residual vector but do not
count toward solvability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InsufficientSatellites, SingularNormalMatrix
from .observations import Epoch, PositionState, SolveResult, observation_model

ACTIVE_WEIGHT_FLOOR = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 20
    step_tolerance: float = 1e-4  # meters; halt when |dy| falls below
    min_satellites: int = 4
    condition_limit: float = 1e12

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.step_tolerance <= 0 or self.condition_limit <= 0:
            raise ValueError("tolerances must be positive")


def normal_matrix_inverse(h: np.ndarray, w: np.ndarray, condition_limit: float) -> tuple[np.ndarray, float]:
    """Invert A = H^T diag(w) H by explicit Cholesky, with a condition check.

    Returns (A_inverse, condition_estimate). Raises SingularNormalMatrix when
    A is not positive definite or its condition exceeds the limit; a silently
    rank-deficient solve would poison every downstream gradient.
    """
    a = h.T @ (h * w[:, None])
    eigvals = np.linalg.eigvalsh(a)
    if eigvals[0] <= 0.0 or not np.isfinite(eigvals).all():
        raise SingularNormalMatrix("normal matrix not positive definite")
    condition = float(eigvals[-1] / eigvals[0])
    if condition > condition_limit:
        raise SingularNormalMatrix(f"condition estimate {condition:.3e} exceeds limit {condition_limit:.1e}")
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise SingularNormalMatrix("Cholesky factorization failed") from exc
    chol_inv = np.linalg.solve(chol, np.eye(4))
    return chol_inv.T @ chol_inv, condition


def normal_equation_step(h: np.ndarray, w: np.ndarray, r: np.ndarray, condition_limit: float = 1e12) -> tuple[np.ndarray, np.ndarray]:
    """One exact Gauss-Newton step dy = (H^T W H)^-1 H^T W r.

    Returns (dy, A_inverse); A_inverse is reused by the sensitivity
    computations.
    """
    h = np.asarray(h, dtype=float)
    w = np.asarray(w, dtype=float)
    r = np.asarray(r, dtype=float)
    a_inv, _ = normal_matrix_inverse(h, w, condition_limit)
    return a_inv @ (h.T @ (w * r)), a_inv


def solve_wls(
    epoch: Epoch,
    weights: np.ndarray,
    corrections: np.ndarray | None = None,
    y0: PositionState = PositionState(),
    cfg: SolverConfig = SolverConfig(),
) -> SolveResult:
    """Weighted least-squares position solve for one epoch.

    weights is the per-satellite nonnegative vector whose diagonal forms W;
    corrections, when given, are subtracted from the pseudoranges before
    solving (learned bias removal). Non-convergence is flagged on the result,
    not raised.
    """
    n = len(epoch)
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise DimensionMismatch(f"weights shape {w.shape} does not match {n} observations")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    active = int(np.count_nonzero(w > ACTIVE_WEIGHT_FLOOR))
    if active < cfg.min_satellites:
        raise InsufficientSatellites(f"{active} usable satellites, need {cfg.min_satellites}")

    z = epoch.pseudoranges()
    if corrections is not None:
        corrections = np.asarray(corrections, dtype=float)
        if corrections.shape != (n,):
            raise DimensionMismatch(f"corrections shape {corrections.shape} does not match {n} observations")
        z = z - corrections

    sat_positions = epoch.sat_positions()
    y = y0.to_array()
    converged = False
    iterations = 0
    condition = 0.0
    for iterations in range(1, cfg.max_iterations + 1):
        predicted, h = observation_model(y, sat_positions)
        a_inv, condition = normal_matrix_inverse(h, w, cfg.condition_limit)
        dy = a_inv @ (h.T @ (w * (z - predicted)))
        y = y + dy
        if float(np.linalg.norm(dy)) < cfg.step_tolerance:
            converged = True
            break

    predicted, h = observation_model(y, sat_positions)
    return SolveResult(
        state=PositionState.from_array(y),
        residuals=z - predicted,
        geometry=h,
        iterations=iterations,
        converged=converged,
        condition_estimate=condition,
        weights=w,
    )


def solve_equal_weight(epoch: Epoch, cfg: SolverConfig = SolverConfig()) -> SolveResult:
    """Unit-weight solve from the (0, 0, 0, 0) initial state."""
    return solve_wls(epoch, np.ones(len(epoch)), corrections=None, y0=PositionState(), cfg=cfg)
