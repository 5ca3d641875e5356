"""Reflector phase states: random launch, quantization, and the AJ term.

The reflector never transmits; its whole control surface is one phase
per element, either free-running (continuous) or snapped to a b-bit
uniform grid over [0, 2 pi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PhaseVector",
    "random_phases",
    "quantize_phases",
    "aj_interference_power",
]

TWO_PI = 2.0 * math.pi


@dataclass
class PhaseVector:
    """Element phases in [0, 2 pi) with their unit-modulus coefficients.

    bits is None for continuous phases, else the grid resolution; the
    grid has 2^bits points spaced 2 pi / 2^bits starting at 0.
    """

    phases: np.ndarray
    coeffs: np.ndarray
    bits: int | None = None

    @classmethod
    def from_phases(cls, phases: np.ndarray, bits: int | None = None) -> "PhaseVector":
        phases = np.asarray(phases, dtype=float)
        return cls(phases=phases, coeffs=np.exp(1j * phases), bits=bits)

    def __len__(self) -> int:
        return self.phases.shape[0]


def random_phases(n: int, bits: int | None, rng: np.random.Generator) -> PhaseVector:
    """Independent uniform phases, on the b-bit grid or continuous.

    Grid draws take floor(u * 2^bits) levels from one uniform block, so
    every level is exactly equiprobable and the continuous and gridded
    cases consume the same amount of stream.
    """
    u = rng.random(n)
    if bits is None:
        return PhaseVector.from_phases(TWO_PI * u, bits=None)
    levels = np.floor(u * (1 << bits))
    return PhaseVector.from_phases(levels * (TWO_PI / (1 << bits)), bits=bits)


def quantize_phases(pv: PhaseVector, bits: int | None) -> PhaseVector:
    """Snap each phase to the nearest b-bit grid point.

    Distance is angular (wrap-aware); exact midpoints resolve toward the
    numerically smaller of the two candidate grid values, so a tie in the
    top cell goes to 0, not to the lower neighbor. bits=None returns the
    input unchanged.
    """
    if bits is None:
        return pv
    n_levels = 1 << bits
    step = TWO_PI / n_levels
    wrapped = np.mod(pv.phases, TWO_PI)
    scaled = wrapped / step
    levels = np.floor(scaled)
    frac = scaled - levels
    levels += frac > 0.5
    # midpoint between the last grid point and 2 pi: the wrapped label 0 wins
    levels[(frac == 0.5) & (levels == n_levels - 1)] += 1
    levels = np.mod(levels, n_levels)
    return PhaseVector.from_phases(levels * step, bits=bits)


def aj_interference_power(w_k: np.ndarray, h_j: np.ndarray, p_j_watts: float) -> float:
    """Received active-jammer power p_J |w_k^H h_j|^2 at one detector output."""
    return p_j_watts * float(np.abs(np.vdot(w_k, h_j)) ** 2)
