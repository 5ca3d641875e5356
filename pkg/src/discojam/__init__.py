"""Monte Carlo study of fully passive reflector jamming in MU-MISO uplinks.

A reflecting surface near a multi-antenna base station launches random
phase flips during data transmission, aging the pilot-derived channel
estimate. The package evaluates the resulting ergodic rates for MRC and
ZF detectors, compares against active and CSI-based passive jammers,
and checks the closed-form rate floors the random strategy admits.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DegenerateChannelError,
    MissingJammerError,
    NumericalError,
    RetractionError,
    SingularChannelError,
)
from .scene import LargeScaleGains, SceneConfig

__all__ = [
    "__version__",
    "SceneConfig",
    "LargeScaleGains",
    "ConfigError",
    "MissingJammerError",
    "SingularChannelError",
    "DegenerateChannelError",
    "RetractionError",
    "NumericalError",
]
