"""Shared helpers: a scene builder independent of the production generator.

Scenes built here construct satellite positions and pseudoranges directly
from spherical angles, so solver and gradient tests do not depend on the
simulate module they may be used to check.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from gnsslearn.geodesy import EcefPosition, GeodeticPosition, geodetic_to_ecef
from gnsslearn.observations import Epoch, GnssSystem, SatelliteObservation


def receiver_at(lat_deg: float = 48.0, lon_deg: float = 11.0, height: float = 80.0) -> EcefPosition:
    return geodetic_to_ecef(GeodeticPosition(math.radians(lat_deg), math.radians(lon_deg), height))


def make_scene(
    seed: int,
    n_sats: int = 8,
    noise_sigma: float = 0.0,
    biases: np.ndarray | None = None,
    clock: float = 0.0,
    min_elevation_deg: float = 10.0,
    sat_range: float = 2.2e7,
    receiver: EcefPosition | None = None,
) -> Epoch:
    """Epoch with satellites at random look angles and exact pseudoranges."""
    rng = np.random.default_rng(seed)
    rec = receiver if receiver is not None else receiver_at()
    rec_vec = rec.to_array()

    up = rec_vec / np.linalg.norm(rec_vec)
    east = np.cross(np.array([0.0, 0.0, 1.0]), up)
    east /= np.linalg.norm(east)
    north = np.cross(up, east)

    observations = []
    for k in range(n_sats):
        el = rng.uniform(math.radians(min_elevation_deg), math.pi / 2)
        az = rng.uniform(0.0, 2.0 * math.pi)
        direction = (
            math.cos(el) * math.sin(az) * east
            + math.cos(el) * math.cos(az) * north
            + math.sin(el) * up
        )
        sat_vec = rec_vec + sat_range * direction
        rng_true = float(np.linalg.norm(sat_vec - rec_vec))
        pr = rng_true + clock
        if biases is not None:
            pr += float(biases[k])
        if noise_sigma > 0:
            pr += float(rng.normal(0.0, noise_sigma))
        observations.append(
            SatelliteObservation(
                sat_id=f"G{k + 1:02d}",
                system=GnssSystem.GPS,
                sat_pos=EcefPosition.from_array(sat_vec),
                pseudorange=pr,
                cn0=float(rng.uniform(30.0, 50.0)),
                elevation=el,
            )
        )
    return Epoch(t=0.0, observations=tuple(observations), truth_pos=rec)


@pytest.fixture
def receiver() -> EcefPosition:
    return receiver_at()
