"""Linear uplink detectors built from the direct channel only.

The receiver never estimates the reflector cascade, so both detectors
below see h_d alone; everything the cascade does to them shows up later
as uncancelled interference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularChannelError

__all__ = ["DetectorMatrix", "mrc", "zf", "COND_LIMIT", "RESIDUAL_LIMIT"]

COND_LIMIT = 1e10
RESIDUAL_LIMIT = 1e-10


@dataclass
class DetectorMatrix:
    """Per-user combining columns, (n_antennas, n_users), plus the rule name."""

    w: np.ndarray
    kind: str


def mrc(h_d: np.ndarray) -> DetectorMatrix:
    """Maximum ratio combining: w_k is user k's own channel column."""
    return DetectorMatrix(w=h_d, kind="mrc")


def zf(h_d: np.ndarray) -> DetectorMatrix:
    """Zero forcing: W^H = (h_d^H h_d)^{-1} h_d^H, so W^H h_d = I.

    Raises SingularChannelError when the Gram matrix condition number
    exceeds COND_LIMIT or the achieved residual max|W^H h_d - I| is
    worse than RESIDUAL_LIMIT.
    """
    h_d = np.asarray(h_d)
    n_t, k = h_d.shape
    if n_t < k:
        raise SingularChannelError(
            f"zero forcing needs at least as many antennas ({n_t}) as users ({k})"
        )
    gram = h_d.conj().T @ h_d
    cond = float(np.linalg.cond(gram))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularChannelError(
            f"direct-channel Gram matrix is ill conditioned (cond={cond:.3e})",
            cond=cond,
        )
    wh = np.linalg.solve(gram, h_d.conj().T)
    residual = float(np.max(np.abs(wh @ h_d - np.eye(k))))
    if residual > RESIDUAL_LIMIT:
        raise SingularChannelError(
            f"zero-forcing residual {residual:.3e} exceeds {RESIDUAL_LIMIT:.0e}",
            cond=cond,
        )
    return DetectorMatrix(w=wh.conj().T, kind="zf")


def combined_noise_gains(det: DetectorMatrix) -> np.ndarray:
    """Per-user noise amplification ||w_k||^2 as a length n_users array."""
    return np.sum(np.abs(det.w) ** 2, axis=0).real
