"""Closed-form ergodic-rate lower bounds and the identities behind them.

Everything here is a pure function of scene statistics; linear watts in,
bits/s/Hz out. The Monte Carlo estimators in this module exist as test
oracles for the closed forms, not as production paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scene import LargeScaleGains, SceneConfig

__all__ = [
    "BoundInput",
    "lower_bound_mrc",
    "lower_bound_zf",
    "wishart_trace_expect",
    "aca_interference_expect",
    "jensen_bound_from_sinr_samples",
]


@dataclass(frozen=True)
class BoundInput:
    """Scene statistics a bound needs, untangled from draw machinery."""

    n_antennas: int
    n_users: int
    n_dirs_elements: int
    p_d_watts: float
    noise_watts: float
    gains: LargeScaleGains
    target_user: int

    @classmethod
    def from_scene(cls, cfg: SceneConfig, gains: LargeScaleGains,
                   target_user: int) -> "BoundInput":
        return cls(
            n_antennas=cfg.n_antennas,
            n_users=cfg.n_users,
            n_dirs_elements=cfg.n_dirs_elements,
            p_d_watts=cfg.p_d_watts(),
            noise_watts=cfg.noise_watts(),
            gains=gains,
            target_user=target_user,
        )

    def _check_user(self):
        if not 0 <= self.target_user < self.n_users:
            raise ValueError(
                f"target_user {self.target_user} outside [0, {self.n_users})"
            )


def aca_interference_expect(gains: LargeScaleGains, n_dirs_elements: int,
                            p_d_watts: float) -> float:
    """Expected reflector-induced interference power, p_d N_D sum_i l_G l_I,i."""
    return p_d_watts * n_dirs_elements * float(gains.bs_dirs * np.sum(gains.dirs_lu))


def lower_bound_mrc(bi: BoundInput) -> float:
    """Asymptotic MRC rate floor of the target user, in bits/s/Hz.

    Needs at least 3 antennas; below that the inverse-moment the bound
    rests on does not exist.
    """
    if bi.n_antennas < 3:
        raise ValueError(f"MRC bound needs n_antennas >= 3, got {bi.n_antennas}")
    bi._check_user()
    k = bi.target_user
    l_d = bi.gains.bs_lu
    inter = bi.p_d_watts * (float(np.sum(l_d)) - float(l_d[k]))
    aca = aca_interference_expect(bi.gains, bi.n_dirs_elements, bi.p_d_watts)
    num = bi.p_d_watts * (bi.n_antennas - 1) * float(l_d[k])
    return math.log2(1.0 + num / (inter + aca + bi.noise_watts))


def lower_bound_zf(bi: BoundInput) -> float:
    """Asymptotic ZF rate floor of the target user, in bits/s/Hz."""
    if bi.n_antennas <= bi.n_users:
        raise ValueError(
            f"ZF bound needs n_antennas > n_users, got {bi.n_antennas} <= {bi.n_users}"
        )
    bi._check_user()
    k = bi.target_user
    aca = aca_interference_expect(bi.gains, bi.n_dirs_elements, bi.p_d_watts)
    num = bi.p_d_watts * (bi.n_antennas - bi.n_users) * float(bi.gains.bs_lu[k])
    return math.log2(1.0 + num / (aca + bi.noise_watts))


def wishart_trace_expect(m: int, n: int) -> float:
    """E[tr(W^-1)] = m/(n-m) for W = H^H H, H an n x m standard complex
    gaussian matrix; defined only for n > m."""
    if n <= m:
        raise ValueError(f"wishart trace moment needs n > m, got n={n}, m={m}")
    return m / (n - m)


def jensen_bound_from_sinr_samples(sinr_samples: np.ndarray) -> float:
    """Monte Carlo form of the harmonic-mean rate bound log2(1+1/E[1/sinr]).

    Test oracle only: cross-checks that the closed forms above sit below
    this sampled bound, which itself sits below the sampled mean rate.
    """
    inv_mean = float(np.mean(1.0 / np.asarray(sinr_samples)))
    return math.log2(1.0 + 1.0 / inv_mean)
