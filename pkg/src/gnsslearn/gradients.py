"""Sensitivities of the converged solve and the position-loss chain rule.

The solved state is differentiated implicitly at its fixed point with the
geometry matrix and residuals frozen (the Gauss-Newton approximation): the
neglected curvature term is of order baseline/range, far below the test
tolerances. These two sensitivity paths, measurements and weights, are the
only gradients the training loop needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotConverged
from .geodesy import EcefPosition
from .observations import SolveResult
from .solver import normal_matrix_inverse


@dataclass
class GradientBundle:
    """Solver sensitivities and, once filled in, the loss-level gradients.

    d_y_d_z maps pseudorange perturbations to state perturbations (4 x n);
    column k of d_y_d_w is the state derivative w.r.t. weight k.
    """

    d_y_d_z: np.ndarray
    d_y_d_w: np.ndarray
    loss: float | None = None
    d_loss_d_z: np.ndarray | None = None
    d_loss_d_w: np.ndarray | None = None


def position_loss(
    y_gt: EcefPosition,
    result: SolveResult,
    include_clock: bool = False,
    clock_truth: float = 0.0,
) -> tuple[float, np.ndarray]:
    """Half squared position error and its gradient w.r.t. the 4-state.

    The loss covers the three position components; the clock carries zero
    gradient. include_clock adds the clock term (untested variant, off by
    default).
    """
    if not result.converged:
        raise NotConverged("loss is only defined for converged solves")
    err = result.state.to_array()[:3] - y_gt.to_array()
    loss = 0.5 * float(err @ err)
    grad = np.append(err, 0.0)
    if include_clock:
        clock_err = result.state.clock - clock_truth
        loss += 0.5 * clock_err * clock_err
        grad[3] = clock_err
    return loss, grad


def wls_sensitivities(result: SolveResult, weights: np.ndarray, condition_limit: float = 1e12) -> GradientBundle:
    """Derivatives of the converged state w.r.t. pseudoranges and weights.

    With A = H^T W H frozen at the solution: d_y_d_z = A^-1 H^T W and the
    k-th weight column is A^-1 h_k r_k.
    """
    if not result.converged:
        raise NotConverged("sensitivities are only defined at a converged fixed point")
    h = result.geometry
    w = np.asarray(weights, dtype=float)
    a_inv, _ = normal_matrix_inverse(h, w, condition_limit)
    d_y_d_z = a_inv @ (h.T * w[None, :])
    d_y_d_w = a_inv @ (h * result.residuals[:, None]).T
    return GradientBundle(d_y_d_z=d_y_d_z, d_y_d_w=d_y_d_w)


def backprop_to_measurements(bundle: GradientBundle, d_loss_d_y: np.ndarray) -> np.ndarray:
    """Chain the state gradient back onto the corrected pseudorange vector.

    The gradient w.r.t. a learned bias correction is the negation of the
    returned vector, since the correction is subtracted from the measurement.
    """
    return bundle.d_y_d_z.T @ np.asarray(d_loss_d_y, dtype=float)


def backprop_to_weights(bundle: GradientBundle, d_loss_d_y: np.ndarray) -> np.ndarray:
    """Chain the state gradient back onto the per-satellite weight vector."""
    return bundle.d_y_d_w.T @ np.asarray(d_loss_d_y, dtype=float)
