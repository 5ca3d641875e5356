"""Geometry, unit conversions, and scene config validation."""

import math

import numpy as np
import pytest

from discojam.errors import ConfigError
from discojam.scene import (
    SceneConfig,
    db_loss_to_gain,
    dbm_to_watts,
    large_scale,
    noise_power_dbm,
    path_loss_los_db,
    path_loss_nlos_db,
    place_users,
    rng_stream,
)

# Reference values evaluated independently at 50-digit precision (mpmath)
# and frozen here. Tests compare against these, not against the module.
PL_LOS_2M = 42.222659904607586295
PL_NLOS_160M = 113.49120336347243946
NOISE_180KHZ_DBM = -117.4472749489669393
GAIN_BS_DIRS_2M = 5.99423837284348596e-5
DIST_BS_CENTER = 160.01249951175689325
GAIN_BS_CENTER = 4.47460963047065243e-12
GAIN_DIRS_CENTER = 4.47332716042986034e-12
GAIN_BS_AJ_REF = 4.3491192032539641e-12


class TestConversions:
    def test_los_path_loss_at_two_metres(self):
        assert path_loss_los_db(2.0) == pytest.approx(PL_LOS_2M, rel=1e-14)

    def test_nlos_path_loss_at_160_metres(self):
        assert path_loss_nlos_db(160.0) == pytest.approx(PL_NLOS_160M, rel=1e-14)

    @pytest.mark.parametrize("d", [0.5, 1.0, 7.3, 200.0])
    def test_path_loss_formulas(self, d):
        assert path_loss_los_db(d) == pytest.approx(35.6 + 22.0 * math.log10(d))
        assert path_loss_nlos_db(d) == pytest.approx(32.6 + 36.7 * math.log10(d))

    @pytest.mark.parametrize("d", [0.0, -1.0])
    def test_path_loss_rejects_nonpositive_distance(self, d):
        with pytest.raises(ValueError, match="distance"):
            path_loss_los_db(d)
        with pytest.raises(ValueError, match="distance"):
            path_loss_nlos_db(d)

    def test_noise_power_reference(self):
        assert noise_power_dbm(180e3) == pytest.approx(NOISE_180KHZ_DBM, rel=1e-14)

    def test_noise_power_decade_step_is_exact(self):
        # 10x bandwidth adds exactly 10 dB; log10(10b) - log10(b) is exact
        # in float64 only up to rounding, but the difference of the two
        # affine forms lands on 10.0 here.
        assert noise_power_dbm(1.8e6) - noise_power_dbm(1.8e5) == 10.0

    @pytest.mark.parametrize("bw", [1.0, 180e3, 1e7])
    def test_noise_watts_is_density_times_bandwidth(self, bw):
        # -170 dBm/Hz is 1e-20 W/Hz, so the linear power must be 1e-20 * bw.
        watts = dbm_to_watts(noise_power_dbm(bw))
        assert watts == pytest.approx(1e-20 * bw, rel=1e-12)

    def test_dbm_to_watts(self):
        assert dbm_to_watts(30.0) == 1.0
        assert dbm_to_watts(0.0) == pytest.approx(1e-3, rel=1e-15)
        assert dbm_to_watts(-20.0) == pytest.approx(1e-5, rel=1e-15)

    def test_loss_to_gain_reference(self):
        gain = db_loss_to_gain(path_loss_los_db(2.0))
        assert gain == pytest.approx(GAIN_BS_DIRS_2M, rel=1e-12)

    def test_loss_to_gain_roundtrip(self):
        for loss in (0.0, 42.0, 113.5):
            assert -10.0 * math.log10(db_loss_to_gain(loss)) == pytest.approx(loss)


class TestRngStream:
    def test_same_key_reproduces(self):
        a = rng_stream(3, 1, 5, 0).random(8)
        b = rng_stream(3, 1, 5, 0).random(8)
        assert np.array_equal(a, b)

    def test_distinct_keys_differ(self):
        a = rng_stream(3, 1, 5, 0).random(8)
        b = rng_stream(3, 1, 6, 0).random(8)
        c = rng_stream(4, 1, 5, 0).random(8)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)


class TestSceneConfig:
    def test_defaults(self):
        cfg = SceneConfig()
        assert cfg.n_antennas == 256
        assert cfg.n_dirs_elements == 4096
        assert cfg.n_users == 8
        assert cfg.bs_position == (0.0, 0.0, 2.0)
        assert cfg.dirs_position == (-2.0, 0.0, 2.0)
        assert cfg.lu_region_center == (0.0, 160.0, 0.0)
        assert cfg.lu_region_radius == 10.0
        assert cfg.aj_position is None
        assert cfg.p_d_dbm == 6.0
        assert cfg.p_j_dbm == 4.0
        assert cfg.rician_factors == 10.0
        assert cfg.theta_a == pytest.approx(math.pi / 2)
        assert cfg.phase_bits == 1
        assert cfg.trials == 500
        assert cfg.seed == 0

    def test_power_properties(self):
        cfg = SceneConfig(p_d_dbm=30.0, p_j_dbm=0.0)
        assert cfg.p_d_watts() == 1.0
        assert cfg.p_j_watts() == pytest.approx(1e-3)
        assert cfg.noise_watts() == pytest.approx(1.8e-15, rel=1e-12)

    @pytest.mark.parametrize(
        "changes, field",
        [
            ({"n_antennas": 0}, "n_antennas"),
            ({"n_dirs_elements": -1}, "n_dirs_elements"),
            ({"n_users": 0}, "n_users"),
            ({"n_antennas": 4, "n_users": 8}, "n_antennas"),
            ({"lu_region_radius": -0.1}, "lu_region_radius"),
            ({"theta_a": 0.0}, "theta_a"),
            ({"theta_a": 3.2}, "theta_a"),
            ({"element_spacing_over_wavelength": 0.0}, "element_spacing"),
            ({"bandwidth_hz": 0.0}, "bandwidth_hz"),
            ({"phase_bits": 0}, "phase_bits"),
            ({"phase_bits": 2.0}, "phase_bits"),
            ({"phase_bits": True}, "phase_bits"),
            ({"trials": 0}, "trials"),
            ({"bs_position": (0.0, 1.0)}, "bs_position"),
            ({"aj_position": (0.0, float("nan"), 0.0)}, "aj_position"),
            ({"rician_factors": -1.0}, "rician_factors"),
            ({"rician_factors": (1.0, 2.0)}, "rician_factors"),
        ],
    )
    def test_rejects_invalid_fields(self, changes, field):
        with pytest.raises(ConfigError, match=field):
            SceneConfig(**changes)

    def test_radius_zero_allowed(self):
        cfg = SceneConfig(lu_region_radius=0.0)
        users = place_users(cfg, rng_stream(0, 0))
        assert np.array_equal(users, np.tile([0.0, 160.0, 0.0], (8, 1)))

    def test_rician_vector_scalar_and_tuple(self):
        cfg = SceneConfig(n_antennas=16, n_users=4, rician_factors=3.0)
        assert np.array_equal(cfg.rician_vector(), np.full(16, 3.0))
        kappas = tuple(float(i) for i in range(16))
        cfg = SceneConfig(n_antennas=16, n_users=4, rician_factors=kappas)
        assert np.array_equal(cfg.rician_vector(), np.arange(16.0))

    def test_replace_is_functional(self):
        cfg = SceneConfig()
        other = cfg.replace(p_d_dbm=-4.0)
        assert other.p_d_dbm == -4.0
        assert cfg.p_d_dbm == 6.0

    def test_dict_roundtrip(self):
        cfg = SceneConfig(
            n_antennas=32,
            n_users=4,
            n_dirs_elements=64,
            aj_position=(20.0, 160.0, 0.0),
            phase_bits=None,
        )
        raw = cfg.to_dict()
        assert raw["phase_bits"] == "continuous"
        assert raw["aj_position"] == [20.0, 160.0, 0.0]
        assert SceneConfig.from_dict(raw) == cfg

    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(ConfigError, match="n_antenas"):
            SceneConfig.from_dict({"n_antenas": 8})

    def test_from_dict_rejects_bad_phase_bits_string(self):
        with pytest.raises(ConfigError, match="phase_bits"):
            SceneConfig.from_dict({"phase_bits": "coarse"})


class TestPlacement:
    def test_reproducible(self):
        cfg = SceneConfig()
        a = place_users(cfg, rng_stream(11, 0))
        b = place_users(cfg, rng_stream(11, 0))
        assert np.array_equal(a, b)

    def test_inside_disk_at_region_height(self):
        cfg = SceneConfig(lu_region_radius=10.0)
        users = place_users(cfg, rng_stream(1, 0))
        center = np.asarray(cfg.lu_region_center)
        r = np.linalg.norm(users[:, :2] - center[:2], axis=1)
        assert np.all(r <= cfg.lu_region_radius + 1e-12)
        assert np.all(users[:, 2] == center[2])

    def test_uniform_area_density(self):
        # E[r^2] = R^2 / 2 for a uniform disk; with R = 10 that is 50.
        # 1e5 points puts the standard error near 0.09, so +-1 is a 10
        # sigma band.
        cfg = SceneConfig(n_users=100_000, n_antennas=100_001)
        users = place_users(cfg, rng_stream(5, 0))
        center = np.asarray(cfg.lu_region_center)
        r2 = np.sum((users[:, :2] - center[:2]) ** 2, axis=1)
        assert abs(r2.mean() - 50.0) < 1.0
        # Angles should not cluster: the circular mean of 1e5 uniform
        # angles stays within ~4 sigma of zero.
        ang = np.arctan2(users[:, 1] - center[1], users[:, 0] - center[0])
        assert abs(np.exp(1j * ang).mean()) < 4.0 / math.sqrt(len(ang))


class TestLargeScale:
    def test_reference_scene_gains(self):
        cfg = SceneConfig(aj_position=(20.0, 160.0, 0.0))
        users = np.tile(np.asarray(cfg.lu_region_center), (cfg.n_users, 1))
        gains = large_scale(cfg, users)
        assert gains.bs_dirs == pytest.approx(GAIN_BS_DIRS_2M, rel=1e-12)
        assert gains.bs_lu == pytest.approx(GAIN_BS_CENTER, rel=1e-12)
        assert gains.dirs_lu == pytest.approx(GAIN_DIRS_CENTER, rel=1e-12)
        assert gains.bs_aj == pytest.approx(GAIN_BS_AJ_REF, rel=1e-12)

    def test_no_jammer_means_no_jammer_gain(self):
        cfg = SceneConfig()
        users = place_users(cfg, rng_stream(0, 0))
        assert large_scale(cfg, users).bs_aj is None

    def test_farther_user_weaker_gain(self):
        cfg = SceneConfig(n_users=2, lu_region_radius=0.0)
        users = np.array([[0.0, 150.0, 0.0], [0.0, 170.0, 0.0]])
        gains = large_scale(cfg, users)
        assert gains.bs_lu[0] > gains.bs_lu[1]

    def test_rejects_wrong_shape(self):
        cfg = SceneConfig()
        with pytest.raises(ValueError, match="shape"):
            large_scale(cfg, np.zeros((3, 3)))

    def test_rejects_coincident_nodes(self):
        cfg = SceneConfig(dirs_position=(0.0, 0.0, 2.0))
        users = place_users(cfg, rng_stream(0, 0))
        with pytest.raises(ValueError, match="coincide"):
            large_scale(cfg, users)

    def test_user_on_top_of_bs_rejected(self):
        cfg = SceneConfig(n_users=1, n_antennas=2, lu_region_radius=0.0)
        users = np.array([[0.0, 0.0, 2.0]])
        with pytest.raises(ValueError):
            large_scale(cfg, users)
