"""Domain types for satellite measurements, epochs, and solver state.

An Epoch holds an ordered list of satellite observations; that order defines
the row order of the measurement vector, the geometry matrix, the residuals,
and the weight vector everywhere else in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DegenerateGeometry
from .geodesy import EcefPosition


class GnssSystem(str, Enum):
    GPS = "GPS"
    BDS = "BDS"
    GAL = "GAL"
    GLO = "GLO"


@dataclass(frozen=True)
class SatelliteObservation:
    """One satellite's measurement at one epoch.

    pseudorange is the corrected pseudorange in meters: atmosphere and
    satellite clock are assumed already removed. Optional truth labels
    (los_truth, bias_truth) are populated by the synthetic generator.
    """

    sat_id: str
    system: GnssSystem
    sat_pos: EcefPosition
    pseudorange: float
    cn0: float
    elevation: float
    los_truth: bool | None = None
    bias_truth: float | None = None


@dataclass(frozen=True)
class Epoch:
    """All observations of one measurement instant, plus optional ground truth."""

    t: float
    observations: tuple[SatelliteObservation, ...]
    truth_pos: EcefPosition | None = None

    def __post_init__(self):
        object.__setattr__(self, "observations", tuple(self.observations))

    def sat_positions(self) -> np.ndarray:
        """(n, 3) satellite ECEF positions in observation order."""
        return np.array([o.sat_pos.to_array() for o in self.observations])

    def pseudoranges(self) -> np.ndarray:
        return np.array([o.pseudorange for o in self.observations])

    def __len__(self) -> int:
        return len(self.observations)


@dataclass(frozen=True)
class PositionState:
    """Receiver state: ECEF position in meters plus clock bias in meters.

    The clock component stores c*dt, so the Jacobian clock column is 1 and
    all four unknowns share the same unit.
    """

    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    clock: float = 0.0

    def position(self) -> EcefPosition:
        return EcefPosition(self.x, self.y, self.z)

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.clock], dtype=float)

    @staticmethod
    def from_array(a) -> "PositionState":
        return PositionState(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


@dataclass
class SolveResult:
    """Converged (or flagged) output of a weighted least-squares solve.

    residuals and the rows of geometry follow the epoch's observation order;
    condition_estimate is the condition number of H^T W H at the solution.
    """

    state: PositionState
    residuals: np.ndarray
    geometry: np.ndarray
    iterations: int
    converged: bool
    condition_estimate: float
    weights: np.ndarray = field(default_factory=lambda: np.empty(0))


def predicted_pseudorange(state: PositionState, obs: SatelliteObservation) -> float:
    """Geometric range to the satellite plus the receiver clock bias, meters."""
    d = obs.sat_pos.to_array() - state.to_array()[:3]
    rng = math.sqrt(float(d @ d))
    if rng < 1.0:
        raise DegenerateGeometry(f"range {rng:.3f} m below 1 m for {obs.sat_id}")
    return rng + state.clock


def jacobian_row(state: PositionState, obs: SatelliteObservation) -> np.ndarray:
    """Row of the geometry matrix for one satellite.

    First three entries are the unit vector from satellite toward receiver
    (the derivative of range w.r.t. receiver position); the clock entry is 1.
    """
    rec = state.to_array()[:3]
    d = rec - obs.sat_pos.to_array()
    rng = math.sqrt(float(d @ d))
    if rng < 1.0:
        raise DegenerateGeometry(f"range {rng:.3f} m below 1 m for {obs.sat_id}")
    return np.array([d[0] / rng, d[1] / rng, d[2] / rng, 1.0])


def observation_model(state_vec: np.ndarray, sat_positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized predicted pseudoranges and geometry matrix for a whole epoch.

    state_vec is the 4-vector (x, y, z, clock); returns (predicted, H) with
    predicted shape (n,) and H shape (n, 4).
    """
    diff = state_vec[:3] - sat_positions
    ranges = np.linalg.norm(diff, axis=1)
    if np.any(ranges < 1.0):
        raise DegenerateGeometry("satellite range below 1 m")
    h = np.empty((sat_positions.shape[0], 4))
    h[:, :3] = diff / ranges[:, None]
    h[:, 3] = 1.0
    return ranges + state_vec[3], h
