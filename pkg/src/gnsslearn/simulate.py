"""Synthetic urban-canyon scenario generator with known ground truth.

Epochs are generated from the same forward model the solver inverts, so a
noise- and bias-free scene is solved exactly; reflected (NLOS) satellites
carry a deterministic positive range bias driven by the same quantities the
learned models see, which makes the learning problem realizable and the
end-to-end tests meaningful.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigInvalid
from .geodesy import EcefPosition, EnuVector, GeodeticPosition, _enu_rotation, ecef_to_geodetic, enu_to_ecef, geodetic_to_ecef
from .observations import Epoch, GnssSystem, SatelliteObservation

ORBIT_RADIUS = 26_560_000.0  # GPS-like orbital radius from Earth center, m

_SYSTEM_PREFIX = {GnssSystem.GPS: "G", GnssSystem.BDS: "C", GnssSystem.GAL: "E", GnssSystem.GLO: "R"}
_SYSTEMS = tuple(_SYSTEM_PREFIX)

TRAJECTORY_STATIC = "static"
TRAJECTORY_RANDOM_WALK = "random-walk"


@dataclass(frozen=True)
class NlosBiasParams:
    """Deterministic NLOS range bias: largest for low, weak satellites."""

    b0: float = 30.0  # meters at the worst corner of the feature space
    cn0_knee: float = 45.0  # dB-Hz above which the bias vanishes


def default_nlos_bias(cn0: float, elevation: float, params: NlosBiasParams = NlosBiasParams()) -> float:
    """Smooth positive bias in meters; zero at zenith or strong signal."""
    elev_term = max(0.0, 1.0 - elevation / (math.pi / 2.0))
    cn0_term = max(0.0, (params.cn0_knee - cn0) / params.cn0_knee)
    return params.b0 * elev_term * cn0_term


@dataclass(frozen=True)
class Cn0Model:
    """Mean C/N0 rises with elevation; NLOS signals arrive depressed."""

    horizon_mean: float = 38.0  # dB-Hz at zero elevation, line of sight
    zenith_gain: float = 12.0  # added at zenith
    nlos_offset: float = -12.0
    jitter_sigma: float = 1.5
    nlos_max: float = 40.0  # cap keeps the NLOS bias strictly positive
    floor: float = 5.0
    ceiling: float = 55.0


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    epochs: int = 100
    satellites_min: int = 8
    satellites_max: int = 15
    trajectory: str = TRAJECTORY_STATIC
    step_sigma: float = 1.0  # random-walk horizontal step, m per epoch
    noise_sigma: float = 2.0
    clock_walk_sigma: float = 1.0  # receiver clock random walk, m per epoch
    nlos_fraction: float = 0.3
    nlos_bias: NlosBiasParams = NlosBiasParams()
    elevation_mask: float = math.radians(5.0)
    cn0_model: Cn0Model = Cn0Model()
    origin_latitude: float = math.radians(40.7)
    origin_longitude: float = math.radians(-74.0)
    origin_height: float = 50.0
    epoch_interval: float = 1.0

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigInvalid("epochs must be >= 1")
        if not 4 <= self.satellites_min <= self.satellites_max:
            raise ConfigInvalid("satellite range must satisfy 4 <= min <= max")
        if not 0.0 <= self.nlos_fraction <= 1.0:
            raise ConfigInvalid("nlos_fraction must lie in [0, 1]")
        if min(self.noise_sigma, self.clock_walk_sigma, self.step_sigma) < 0:
            raise ConfigInvalid("sigmas must be nonnegative")
        if not 0.0 < self.elevation_mask < math.pi / 2:
            raise ConfigInvalid("elevation_mask must lie in (0, pi/2)")
        if self.trajectory not in (TRAJECTORY_STATIC, TRAJECTORY_RANDOM_WALK):
            raise ConfigInvalid(f"unknown trajectory {self.trajectory!r}")

    def to_dict(self) -> dict:
        return asdict(self)


PRESETS: dict[str, ScenarioConfig] = {
    "open-sky": ScenarioConfig(
        satellites_min=8,
        satellites_max=12,
        nlos_fraction=0.0,
        elevation_mask=math.radians(15.0),
    ),
    "light-urban": ScenarioConfig(),
    "deep-urban": ScenarioConfig(
        satellites_min=6,
        satellites_max=12,
        nlos_fraction=0.5,
        noise_sigma=3.0,
        nlos_bias=NlosBiasParams(b0=40.0),
    ),
}


def _place_satellite(receiver: np.ndarray, los_ecef: np.ndarray) -> np.ndarray:
    """Point along the line of sight lying on the nominal orbital sphere."""
    pu = float(receiver @ los_ecef)
    rr = float(receiver @ receiver)
    dist = -pu + math.sqrt(pu * pu + ORBIT_RADIUS * ORBIT_RADIUS - rr)
    return receiver + dist * los_ecef


def generate_dataset(cfg: ScenarioConfig) -> list[Epoch]:
    """Sequentially seeded epoch list with truth position and truth labels."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    cn0m = cfg.cn0_model

    start = geodetic_to_ecef(
        GeodeticPosition(cfg.origin_latitude, cfg.origin_longitude, cfg.origin_height)
    )
    east = north = 0.0
    clock = 0.0
    epochs: list[Epoch] = []
    for k in range(cfg.epochs):
        if cfg.trajectory == TRAJECTORY_RANDOM_WALK:
            east += rng.normal(0.0, cfg.step_sigma)
            north += rng.normal(0.0, cfg.step_sigma)
        receiver = enu_to_ecef(EnuVector(east, north, 0.0), start)
        receiver_vec = receiver.to_array()
        enu_axes = _enu_rotation(ecef_to_geodetic(receiver))  # rows: e, n, u
        clock += rng.normal(0.0, cfg.clock_walk_sigma)

        n_sats = int(rng.integers(cfg.satellites_min, cfg.satellites_max + 1))
        per_system_count = {sys: 0 for sys in _SYSTEMS}
        observations = []
        for _ in range(n_sats):
            elevation = float(rng.uniform(cfg.elevation_mask, math.pi / 2))
            azimuth = float(rng.uniform(0.0, 2.0 * math.pi))
            cos_el = math.cos(elevation)
            los_enu = np.array(
                [math.sin(azimuth) * cos_el, math.cos(azimuth) * cos_el, math.sin(elevation)]
            )
            sat_vec = _place_satellite(receiver_vec, enu_axes.T @ los_enu)
            geometric_range = float(np.linalg.norm(sat_vec - receiver_vec))

            system = _SYSTEMS[int(rng.integers(0, len(_SYSTEMS)))]
            per_system_count[system] += 1
            sat_id = f"{_SYSTEM_PREFIX[system]}{per_system_count[system]:02d}"

            nlos = bool(rng.uniform() < cfg.nlos_fraction)
            cn0 = cn0m.horizon_mean + cn0m.zenith_gain * (elevation / (math.pi / 2))
            if nlos:
                cn0 += cn0m.nlos_offset
            cn0 += rng.normal(0.0, cn0m.jitter_sigma)
            ceiling = cn0m.nlos_max if nlos else cn0m.ceiling
            cn0 = float(min(max(cn0, cn0m.floor), ceiling))

            bias = default_nlos_bias(cn0, elevation, cfg.nlos_bias) if nlos else 0.0
            noise = float(rng.normal(0.0, cfg.noise_sigma)) if cfg.noise_sigma > 0 else 0.0
            observations.append(
                SatelliteObservation(
                    sat_id=sat_id,
                    system=system,
                    sat_pos=EcefPosition.from_array(sat_vec),
                    pseudorange=geometric_range + clock + bias + noise,
                    cn0=cn0,
                    elevation=elevation,
                    los_truth=not nlos,
                    bias_truth=bias,
                )
            )
        epochs.append(Epoch(t=k * cfg.epoch_interval, observations=tuple(observations), truth_pos=receiver))
    return epochs
