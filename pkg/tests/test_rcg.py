"""Phase optimizer: objective oracle, manifold algebra, and descent behavior."""

import csv
import math

import numpy as np
import pytest

from discojam import channel, detect, rcg
from discojam.errors import RetractionError
from discojam.jam import PhaseVector, random_phases
from discojam.rcg import (
    ARMIJO_SHRINK,
    optimize,
    pj_objective,
    retract,
    riemannian_gradient,
    search_direction,
)
from discojam.scene import LargeScaleGains, SceneConfig, large_scale, place_users, rng_stream


def _cn(rng, shape):
    return rng.standard_normal(shape + (2,)).view(np.complex128)[..., 0] * math.sqrt(0.5)


def _problem(seed=0, n_t=8, n_u=2, n_d=16):
    """Random well-conditioned instance with a zero-forcing detector."""
    rng = rng_stream(seed, 60)
    gains = LargeScaleGains(1.0, np.ones(n_u), np.ones(n_u))
    h_d = _cn(rng, (n_t, n_u))
    g = _cn(rng, (n_d, n_t))
    h_i = _cn(rng, (n_d, n_u))
    real = channel.ChannelRealization(g=g, h_i=h_i, h_d=h_d, gains=gains,
                                      aoa=np.zeros(n_d))
    return real, detect.zf(h_d)


def _objective_loops(coeffs, real, det, p_d, noise):
    """Sum rate recomputed with explicit loops, no shared code with rcg."""
    n_t, n_u = real.h_d.shape
    n_d = real.g.shape[0]
    total = 0.0
    for k in range(n_u):
        w_k = det.w[:, k]
        a = np.zeros(n_u, dtype=complex)
        for i in range(n_u):
            acc = 0.0 + 0.0j
            for n in range(n_t):
                h_eff = real.h_d[n, i]
                for r in range(n_d):
                    h_eff += np.conj(real.g[r, n]) * coeffs[r] * real.h_i[r, i]
                acc += np.conj(w_k[n]) * h_eff
            a[i] = acc
        sig = p_d * abs(a[k]) ** 2
        inter = p_d * (float(np.sum(np.abs(a) ** 2)) - abs(a[k]) ** 2)
        noise_k = noise * float(np.sum(np.abs(w_k) ** 2))
        total += math.log2(1.0 + sig / (inter + noise_k))
    return total


class TestObjective:
    def test_matches_loop_oracle(self):
        real, det = _problem()
        coeffs = np.exp(2j * np.pi * rng_stream(1, 60).random(16))
        got = pj_objective(coeffs, real, det, 2.0, 1e-3)
        want = _objective_loops(coeffs, real, det, 2.0, 1e-3)
        assert got == pytest.approx(want, rel=1e-12)

    def test_accepts_phase_vector(self):
        real, det = _problem()
        pv = random_phases(16, None, rng_stream(2, 60))
        assert pj_objective(pv, real, det, 1.0, 1e-3) == pytest.approx(
            pj_objective(pv.coeffs, real, det, 1.0, 1e-3), rel=1e-15)

    def test_empty_cascade_gives_clean_sum_rate(self):
        real, det = _problem(n_d=0)
        p_d, noise = 2.0, 1e-3
        got = pj_objective(np.empty(0, dtype=complex), real, det, p_d, noise)
        # with no reflector the detector is exact: per-user p/(sigma2||w||^2)
        # up to the zero-forcing residual
        want = sum(
            math.log2(1.0 + p_d / (noise * float(np.sum(np.abs(det.w[:, k]) ** 2))))
            for k in range(2)
        )
        assert got == pytest.approx(want, rel=1e-6)

    def test_perfect_cancellation_toy(self):
        # g = h_d = 1, h_i = -1: coefficient +1 makes the effective channel
        # zero, so the jammed sum rate is exactly zero.
        gains = LargeScaleGains(1.0, np.ones(1), np.ones(1))
        real = channel.ChannelRealization(
            g=np.array([[1.0 + 0.0j]]), h_i=np.array([[-1.0 + 0.0j]]),
            h_d=np.array([[1.0 + 0.0j]]), gains=gains, aoa=np.zeros(1))
        det = detect.zf(real.h_d)
        assert pj_objective(np.array([1.0 + 0.0j]), real, det, 1.0, 1e-9) == 0.0


class TestGradient:
    def test_finite_difference_euclidean(self):
        # central differences on 10 coordinates, real and imaginary parts
        real, det = _problem()
        problem = rcg._PjProblem(real, det, 2.0, 1e-3)
        phi = np.exp(2j * np.pi * rng_stream(3, 60).random(16))
        grad = problem.euclid_grad(phi)
        h = 1e-6
        rng = rng_stream(4, 60)
        for idx in rng.choice(16, size=10, replace=False):
            for unit in (1.0, 1.0j):
                up = phi.copy()
                dn = phi.copy()
                up[idx] += h * unit
                dn[idx] -= h * unit
                fd = (problem.objective(up) - problem.objective(dn)) / (2 * h)
                # df = Re(conj(grad) dz) with the 2x Wirtinger convention
                want = float(np.real(np.conj(grad[idx]) * unit))
                assert fd == pytest.approx(want, rel=1e-4, abs=1e-12)

    def test_riemannian_is_tangent(self):
        real, det = _problem()
        problem = rcg._PjProblem(real, det, 2.0, 1e-3)
        phi = np.exp(2j * np.pi * rng_stream(5, 60).random(16))
        rgrad = riemannian_gradient(phi, problem.euclid_grad(phi))
        tangency = np.max(np.abs(np.real(rgrad * phi.conj())))
        assert tangency < 1e-14

    def test_radial_component_removed(self):
        phi = np.exp(1j * np.array([0.3, -1.2, 2.5]))
        # a purely radial field projects to zero
        assert np.max(np.abs(riemannian_gradient(phi, 2.5 * phi))) < 1e-15
        # a tangential field is untouched
        tang = 1j * phi
        assert np.allclose(riemannian_gradient(phi, tang), tang, rtol=1e-15)


class TestSearchDirection:
    def test_zero_beta_is_steepest_descent(self):
        phi = np.exp(1j * np.array([0.1, 0.7]))
        rgrad = 1j * phi * np.array([0.5, -0.2])
        d = search_direction(rgrad, None, phi, 0.0)
        assert np.array_equal(d, -rgrad)

    def test_history_is_reprojected(self):
        phi = np.exp(1j * np.array([0.4, -0.9]))
        rgrad = 1j * phi * np.array([1.0, 2.0])
        prev = 1j * phi * np.array([0.3, 0.1]) + 0.7 * phi  # stale radial part
        d = search_direction(rgrad, prev, phi, 0.5)
        want = -rgrad + 0.5 * (1j * phi * np.array([0.3, 0.1]))
        assert np.allclose(d, want, atol=1e-15)


class TestRetract:
    def test_zero_step_identity(self):
        phi = np.exp(1j * np.array([0.2, 1.9]))
        out = retract(phi, 1j * phi, 0.0)
        assert np.array_equal(out.coeffs, phi)

    def test_unit_modulus_restored(self):
        rng = rng_stream(6, 60)
        phi = np.exp(2j * np.pi * rng.random(32))
        d = riemannian_gradient(phi, _cn(rng, (32,)))
        out = retract(phi, d, 0.7)
        assert np.max(np.abs(np.abs(out.coeffs) - 1.0)) < 1e-12

    def test_known_direction(self):
        # from 1 along j with unit step: (1 + j)/sqrt(2)
        out = retract(np.array([1.0 + 0.0j]), np.array([1.0j]), 1.0)
        want = (1.0 + 1.0j) / math.sqrt(2.0)
        assert out.coeffs[0] == pytest.approx(want, rel=1e-15)
        assert out.phases[0] == pytest.approx(math.pi / 4, rel=1e-15)

    def test_underflow_rejected(self):
        with pytest.raises(RetractionError, match="underflow"):
            retract(np.array([1.0 + 0.0j]), np.array([-1.0 + 0.0j]), 1.0)


class TestOptimize:
    def test_one_element_matches_grid_search(self):
        # single reflector element: the objective is a function of one
        # phase, so a fine grid finds the global minimum
        real, det = _problem(seed=7, n_t=4, n_u=2, n_d=1)
        cfg = SceneConfig(n_antennas=4, n_users=2, n_dirs_elements=1,
                          phase_bits=None, seed=7)
        result = optimize(real, det, cfg, restarts=4)
        grid = np.exp(2j * np.pi * np.arange(64) / 64)
        grid_best = min(pj_objective(np.array([z]), real, det,
                                     cfg.p_d_watts(), cfg.noise_watts())
                        for z in grid)
        assert result.objective_continuous <= grid_best + 1e-6

    def test_beats_random_phases(self):
        real, det = _problem(seed=8)
        cfg = SceneConfig(n_antennas=8, n_users=2, n_dirs_elements=16,
                          phase_bits=None, seed=8)
        result = optimize(real, det, cfg)
        rng = rng_stream(9, 60)
        p_d, noise = cfg.p_d_watts(), cfg.noise_watts()
        randoms = [
            pj_objective(random_phases(16, None, rng), real, det, p_d, noise)
            for _ in range(100)
        ]
        assert result.objective_continuous <= min(randoms)

    def test_monotone_descent(self):
        real, det = _problem(seed=9)
        cfg = SceneConfig(n_antennas=8, n_users=2, n_dirs_elements=16,
                          phase_bits=None, seed=9)
        result = optimize(real, det, cfg)
        objs = [s.objective for s in result.trace]
        assert len(objs) >= 2
        assert all(b <= a + 1e-12 for a, b in zip(objs, objs[1:]))

    def test_trace_invariants_every_iteration(self):
        real, det = _problem(seed=10)
        cfg = SceneConfig(n_antennas=8, n_users=2, n_dirs_elements=16,
                          phase_bits=None, seed=10)
        result = optimize(real, det, cfg, keep_vectors=True)
        for state in result.trace:
            assert state.tangency_err <= 1e-10
            assert state.modulus_err <= 1e-12
            assert math.isfinite(state.objective)
            if state.iteration > 0:
                assert state.armijo_step > 0.0
                # steps come from the backtracking ladder
                ladder = math.log(state.armijo_step, ARMIJO_SHRINK)
                assert ladder == pytest.approx(round(ladder), abs=1e-9)
            assert state.phi is not None
            assert np.max(np.abs(np.abs(state.phi.coeffs) - 1.0)) < 1e-12

    def test_quantization_can_only_lose(self):
        real, det = _problem(seed=11)
        cfg = SceneConfig(n_antennas=8, n_users=2, n_dirs_elements=16,
                          phase_bits=1, seed=11)
        result = optimize(real, det, cfg)
        assert result.quantized.bits == 1
        assert result.objective_quantized >= result.objective_continuous - 1e-12
        # quantized coefficients all on the two-point grid
        assert set(np.round(result.quantized.phases, 12)) <= {0.0, round(math.pi, 12)}

    def test_continuous_config_skips_requantization(self):
        real, det = _problem(seed=12)
        cfg = SceneConfig(n_antennas=8, n_users=2, n_dirs_elements=16,
                          phase_bits=None, seed=12)
        result = optimize(real, det, cfg)
        assert result.objective_quantized == result.objective_continuous
        assert np.array_equal(result.quantized.coeffs, result.continuous.coeffs)

    def test_empty_reflector_short_circuits(self):
        real, det = _problem(seed=13, n_d=0)
        cfg = SceneConfig(n_antennas=8, n_users=2, n_dirs_elements=0, seed=13)
        result = optimize(real, det, cfg)
        assert len(result.trace) == 1
        assert result.trace[0].iteration == 0
        assert len(result.continuous) == 0

    def test_deterministic_for_fixed_stream(self):
        real, det = _problem(seed=14)
        cfg = SceneConfig(n_antennas=8, n_users=2, n_dirs_elements=16, seed=14)
        a = optimize(real, det, cfg, rng=rng_stream(3, 3))
        b = optimize(real, det, cfg, rng=rng_stream(3, 3))
        assert np.array_equal(a.continuous.coeffs, b.continuous.coeffs)
        assert a.objective_continuous == b.objective_continuous

    def test_restarts_never_hurt(self):
        real, det = _problem(seed=15)
        cfg = SceneConfig(n_antennas=8, n_users=2, n_dirs_elements=16,
                          phase_bits=None, seed=15)
        one = optimize(real, det, cfg, rng=rng_stream(4, 3), restarts=1)
        many = optimize(real, det, cfg, rng=rng_stream(4, 3), restarts=5)
        assert many.objective_continuous <= one.objective_continuous + 1e-15

    def test_trace_file(self, tmp_path):
        real, det = _problem(seed=16)
        cfg = SceneConfig(n_antennas=8, n_users=2, n_dirs_elements=16, seed=16)
        path = tmp_path / "trace.csv"
        result = optimize(real, det, cfg, trace_path=path)
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == len(result.trace)
        assert set(rows[0]) == {"iteration", "objective", "step", "grad_norm"}
        assert float(rows[0]["iteration"]) == 0
        assert float(rows[-1]["objective"]) == pytest.approx(
            result.trace[-1].objective, rel=1e-10)
