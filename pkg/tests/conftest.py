"""Shared fixtures. Scenes here are sized so one trial costs well under 10 ms."""

import pytest

from discojam.scene import SceneConfig, large_scale, place_users, rng_stream


@pytest.fixture
def tiny_cfg():
    return SceneConfig(
        n_antennas=16,
        n_dirs_elements=32,
        n_users=4,
        aj_position=(20.0, 160.0, 0.0),
        trials=8,
        seed=7,
    )


@pytest.fixture
def tiny_setup(tiny_cfg):
    """Config plus one fixed user drop and its large-scale gains."""
    users = place_users(tiny_cfg, rng_stream(tiny_cfg.seed, 0))
    gains = large_scale(tiny_cfg, users)
    return tiny_cfg, users, gains
