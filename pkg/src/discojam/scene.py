"""Scene configuration, geometry, and large-scale propagation terms.

All distances are metres, powers dBm unless a name says watts, and path
losses dB. Large-scale gains are linear power ratios and carry no
per-draw randomness; everything random lives in `channel` and below.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = [
    "SceneConfig",
    "LargeScaleGains",
    "path_loss_los_db",
    "path_loss_nlos_db",
    "noise_power_dbm",
    "dbm_to_watts",
    "db_loss_to_gain",
    "rng_stream",
    "place_users",
    "large_scale",
]


def path_loss_los_db(distance_m: float) -> float:
    """Line-of-sight path loss, 35.6 + 22 log10(d) dB."""
    if distance_m <= 0.0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    return 35.6 + 22.0 * math.log10(distance_m)


def path_loss_nlos_db(distance_m: float) -> float:
    """Non-line-of-sight path loss, 32.6 + 36.7 log10(d) dB."""
    if distance_m <= 0.0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    return 32.6 + 36.7 * math.log10(distance_m)


def noise_power_dbm(bandwidth_hz: float) -> float:
    """Thermal noise power over the given bandwidth, -170 dBm/Hz density."""
    if bandwidth_hz <= 0.0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth_hz}")
    return -170.0 + 10.0 * math.log10(bandwidth_hz)


def dbm_to_watts(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def db_loss_to_gain(loss_db: float) -> float:
    """Linear power gain corresponding to a path loss in dB (gain < 1)."""
    return 10.0 ** (-loss_db / 10.0)


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for a namespaced substream of the run seed.

    Streams are keyed, not split sequentially, so the same (seed, key)
    yields the same draws no matter how many other streams were opened.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.SFC64(ss))


_POSITION_FIELDS = ("bs_position", "dirs_position", "lu_region_center", "aj_position")


@dataclass(frozen=True)
class SceneConfig:
    """Full static description of one simulated uplink scene.

    Defaults reproduce the reference urban micro cell: a 256-antenna base
    station, a 4096-element reflector two metres off its boresight, and
    eight single-antenna users in a 10 m disk 160 m away.
    """

    n_antennas: int = 256
    n_dirs_elements: int = 4096
    n_users: int = 8
    bs_position: tuple[float, float, float] = (0.0, 0.0, 2.0)
    dirs_position: tuple[float, float, float] = (-2.0, 0.0, 2.0)
    lu_region_center: tuple[float, float, float] = (0.0, 160.0, 0.0)
    lu_region_radius: float = 10.0
    aj_position: tuple[float, float, float] | None = None
    p_d_dbm: float = 6.0
    p_j_dbm: float = 4.0
    bandwidth_hz: float = 180e3
    rician_factors: float | tuple[float, ...] = 10.0
    theta_a: float = math.pi / 2
    element_spacing_over_wavelength: float = 0.5
    phase_bits: int | None = 1
    trials: int = 500
    seed: int = 0
    redraw_users_per_trial: bool = False
    redraw_aoa_per_trial: bool = True

    def __post_init__(self):
        if self.n_antennas < 1:
            raise ConfigError(f"n_antennas must be >= 1, got {self.n_antennas}")
        if self.n_dirs_elements < 0:
            raise ConfigError(
                f"n_dirs_elements must be >= 0, got {self.n_dirs_elements}"
            )
        if self.n_users < 1:
            raise ConfigError(f"n_users must be >= 1, got {self.n_users}")
        if self.n_antennas <= self.n_users:
            raise ConfigError(
                f"n_antennas ({self.n_antennas}) must exceed n_users "
                f"({self.n_users}) for the detectors used here"
            )
        # Radius zero is allowed: it pins every user to the region center,
        # which the tests use to make large-scale gains exactly equal.
        if self.lu_region_radius < 0.0:
            raise ConfigError(
                f"lu_region_radius must be >= 0, got {self.lu_region_radius}"
            )
        if not 0.0 < self.theta_a <= math.pi:
            raise ConfigError(f"theta_a must be in (0, pi], got {self.theta_a}")
        if self.element_spacing_over_wavelength <= 0.0:
            raise ConfigError(
                "element_spacing_over_wavelength must be positive, got "
                f"{self.element_spacing_over_wavelength}"
            )
        if self.bandwidth_hz <= 0.0:
            raise ConfigError(f"bandwidth_hz must be positive, got {self.bandwidth_hz}")
        if self.phase_bits is not None:
            if not isinstance(self.phase_bits, int) or isinstance(self.phase_bits, bool):
                raise ConfigError(f"phase_bits must be an int or None, got {self.phase_bits!r}")
            if self.phase_bits < 1:
                raise ConfigError(f"phase_bits must be >= 1, got {self.phase_bits}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        for name in _POSITION_FIELDS:
            value = getattr(self, name)
            if value is None:
                continue
            if len(value) != 3 or not all(math.isfinite(v) for v in value):
                raise ConfigError(f"{name} must be a finite (x, y, z) triple, got {value!r}")
            object.__setattr__(self, name, tuple(float(v) for v in value))
        kappa = self.rician_factors
        if isinstance(kappa, (int, float)):
            if kappa < 0.0 or not math.isfinite(kappa):
                raise ConfigError(f"rician_factors must be >= 0, got {kappa}")
            object.__setattr__(self, "rician_factors", float(kappa))
        else:
            kappa = tuple(float(v) for v in kappa)
            if len(kappa) != self.n_antennas:
                raise ConfigError(
                    f"rician_factors must have one entry per antenna "
                    f"({self.n_antennas}), got {len(kappa)}"
                )
            if any(v < 0.0 or not math.isfinite(v) for v in kappa):
                raise ConfigError("rician_factors entries must be finite and >= 0")
            object.__setattr__(self, "rician_factors", kappa)

    def rician_vector(self) -> np.ndarray:
        """Per-antenna Rician factors as a length n_antennas array."""
        if isinstance(self.rician_factors, float):
            return np.full(self.n_antennas, self.rician_factors)
        return np.asarray(self.rician_factors, dtype=float)

    def noise_watts(self) -> float:
        return dbm_to_watts(noise_power_dbm(self.bandwidth_hz))

    def p_d_watts(self) -> float:
        return dbm_to_watts(self.p_d_dbm)

    def p_j_watts(self) -> float:
        return dbm_to_watts(self.p_j_dbm)

    def replace(self, **changes) -> "SceneConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, raw: dict) -> "SceneConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown scene keys: {', '.join(unknown)}")
        kwargs = dict(raw)
        if isinstance(kwargs.get("phase_bits"), str):
            if kwargs["phase_bits"] != "continuous":
                raise ConfigError(
                    f"phase_bits must be an integer or \"continuous\", got {kwargs['phase_bits']!r}"
                )
            kwargs["phase_bits"] = None
        for name in _POSITION_FIELDS:
            if kwargs.get(name) is not None:
                kwargs[name] = tuple(kwargs[name])
        if isinstance(kwargs.get("rician_factors"), list):
            kwargs["rician_factors"] = tuple(kwargs["rician_factors"])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        if out["phase_bits"] is None:
            out["phase_bits"] = "continuous"
        for name in _POSITION_FIELDS:
            if out[name] is not None:
                out[name] = list(out[name])
        if isinstance(out["rician_factors"], tuple):
            out["rician_factors"] = list(out["rician_factors"])
        return out


@dataclass
class LargeScaleGains:
    """Linear power gains of every link in the scene.

    bs_dirs is the LOS reflector backhaul; bs_lu and dirs_lu are per-user
    NLOS vectors; bs_aj is None when no active jammer is placed.
    """

    bs_dirs: float
    bs_lu: np.ndarray
    dirs_lu: np.ndarray
    bs_aj: float | None = None


def _distance(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


def place_users(cfg: SceneConfig, rng: np.random.Generator) -> np.ndarray:
    """Drop n_users points uniformly over the configured disk.

    The disk is horizontal at the region center's height. Radii use the
    sqrt transform so density is uniform in area, not in radius.
    """
    cx, cy, cz = cfg.lu_region_center
    r = cfg.lu_region_radius * np.sqrt(rng.random(cfg.n_users))
    ang = rng.random(cfg.n_users) * (2.0 * math.pi)
    pos = np.empty((cfg.n_users, 3))
    pos[:, 0] = cx + r * np.cos(ang)
    pos[:, 1] = cy + r * np.sin(ang)
    pos[:, 2] = cz
    return pos


def large_scale(cfg: SceneConfig, lu_positions: np.ndarray) -> LargeScaleGains:
    """Evaluate every link's large-scale gain for fixed node positions."""
    lu_positions = np.asarray(lu_positions, dtype=float)
    if lu_positions.shape != (cfg.n_users, 3):
        raise ValueError(
            f"lu_positions must have shape ({cfg.n_users}, 3), got {lu_positions.shape}"
        )

    d_bd = _distance(cfg.bs_position, cfg.dirs_position)
    if d_bd <= 0.0:
        raise ValueError("base station and reflector positions coincide")
    bs_dirs = db_loss_to_gain(path_loss_los_db(d_bd))

    bs_lu = np.empty(cfg.n_users)
    dirs_lu = np.empty(cfg.n_users)
    for k in range(cfg.n_users):
        d_bk = _distance(cfg.bs_position, lu_positions[k])
        d_ik = _distance(cfg.dirs_position, lu_positions[k])
        if d_bk <= 0.0 or d_ik <= 0.0:
            raise ValueError(f"user {k} coincides with an infrastructure node")
        bs_lu[k] = db_loss_to_gain(path_loss_nlos_db(d_bk))
        dirs_lu[k] = db_loss_to_gain(path_loss_nlos_db(d_ik))

    bs_aj = None
    if cfg.aj_position is not None:
        d_aj = _distance(cfg.bs_position, cfg.aj_position)
        if d_aj <= 0.0:
            raise ValueError("active jammer coincides with the base station")
        bs_aj = db_loss_to_gain(path_loss_nlos_db(d_aj))

    return LargeScaleGains(bs_dirs=bs_dirs, bs_lu=bs_lu, dirs_lu=dirs_lu, bs_aj=bs_aj)
