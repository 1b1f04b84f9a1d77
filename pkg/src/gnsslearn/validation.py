"""Input validation helpers for epochs and estimator arguments."""

from __future__ import annotations

import math
from typing import Iterable

from .observations import Epoch, SatelliteObservation

SAT_RADIUS_RANGE = (2.0e7, 5.0e7)  # plausible ECEF norm for a GNSS satellite, m
PSEUDORANGE_RANGE = (1.5e7, 5.0e7)
CN0_RANGE = (0.0, 65.0)


def check_observation(obs: SatelliteObservation) -> None:
    radius = obs.sat_pos.norm()
    if not SAT_RADIUS_RANGE[0] <= radius <= SAT_RADIUS_RANGE[1]:
        raise ValueError(f"{obs.sat_id}: satellite radius {radius:.3e} m outside {SAT_RADIUS_RANGE}")
    if not PSEUDORANGE_RANGE[0] <= obs.pseudorange <= PSEUDORANGE_RANGE[1]:
        raise ValueError(f"{obs.sat_id}: pseudorange {obs.pseudorange:.3e} m outside {PSEUDORANGE_RANGE}")
    if not CN0_RANGE[0] <= obs.cn0 <= CN0_RANGE[1]:
        raise ValueError(f"{obs.sat_id}: C/N0 {obs.cn0:.1f} dB-Hz outside {CN0_RANGE}")
    if not -math.pi / 2 <= obs.elevation <= math.pi / 2:
        raise ValueError(f"{obs.sat_id}: elevation {obs.elevation:.3f} rad outside [-pi/2, pi/2]")


def check_epoch(epoch: Epoch) -> None:
    """Range checks plus sat-id uniqueness; raises ValueError on violation."""
    ids = [o.sat_id for o in epoch.observations]
    if len(set(ids)) != len(ids):
        raise ValueError(f"epoch t={epoch.t}: duplicate sat_ids")
    for obs in epoch.observations:
        check_observation(obs)


def as_epoch_list(x: Iterable, require_truth: bool = False) -> list[Epoch]:
    """Coerce estimator input to a list of Epoch, optionally requiring truth."""
    if isinstance(x, Epoch):
        x = [x]
    epochs = list(x)
    if not epochs:
        raise ValueError("expected at least one epoch")
    for i, epoch in enumerate(epochs):
        if not isinstance(epoch, Epoch):
            raise TypeError(f"element {i} is {type(epoch).__name__}, expected Epoch")
        if require_truth and epoch.truth_pos is None:
            raise ValueError(f"epoch {i} (t={epoch.t}) lacks the ground-truth position needed for fitting")
    return epochs

