"""Conjugate-gradient phase optimizer on the unit-modulus manifold.

This is the full-CSI passive-jammer baseline: it minimizes the sum rate
over reflector phases by Riemannian conjugate gradient with Armijo
backtracking, then snaps the optimum onto the configured phase grid.

The objective's Euclidean gradient is analytic. Writing the detector
outputs as A(phi) = W^H (h_d + G^H diag(phi) H_I), each entry is affine
in phi, A_ki = D_ki + sum_r M_rk H_I[r,i] phi_r, and the sum rate is a
smooth function of the |A_ki|^2. Differentiating with respect to the
conjugate coordinates (Wirtinger calculus) and doubling gives the
gradient under the real inner product Re(y^H x); tests pin it against
central finite differences.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, RetractionError
from .jam import PhaseVector, quantize_phases
from .scene import rng_stream

__all__ = [
    "RcgState",
    "RcgResult",
    "pj_objective",
    "riemannian_gradient",
    "search_direction",
    "retract",
    "optimize",
]

LN2 = math.log(2.0)
STOP_TOL = 1e-6
MAX_ITER = 500
ARMIJO_SHRINK = 0.5
ARMIJO_SLOPE = 1e-4
MIN_STEP = 1e-12
RETRACT_FLOOR = 1e-15


@dataclass
class RcgState:
    """One accepted iterate. Vector fields are kept only on request;
    the scalar invariant residuals are always recorded."""

    iteration: int
    objective: float
    armijo_step: float
    cg_beta: float
    grad_norm: float
    tangency_err: float
    modulus_err: float
    phi: PhaseVector | None = None
    euclid_grad: np.ndarray | None = None
    riem_grad: np.ndarray | None = None
    search_dir: np.ndarray | None = None


@dataclass
class RcgResult:
    """Continuous optimum, its grid projection, and the iterate trace."""

    continuous: PhaseVector
    quantized: PhaseVector
    trace: list
    objective_continuous: float
    objective_quantized: float


class _PjProblem:
    """Precomputed pieces of the sum-rate objective for fixed channels."""

    def __init__(self, channels, detector, p_d_watts: float, noise_watts: float):
        w = detector.w
        self.p_d = float(p_d_watts)
        self.d = w.conj().T @ channels.h_d  # (K, K), detector x user
        self.m = (channels.g @ w).conj()  # (N_D, K), conj backhaul response
        self.h_i = channels.h_i  # (N_D, K)
        self.noise_k = float(noise_watts) * np.sum(np.abs(w) ** 2, axis=0).real

    def response(self, phi: np.ndarray) -> np.ndarray:
        if self.m.shape[0] == 0:
            return self.d.copy()
        return self.d + self.m.T @ (phi[:, None] * self.h_i)

    def objective_from_response(self, a: np.ndarray) -> float:
        pow_a = np.abs(a) ** 2
        sig = self.p_d * np.diagonal(pow_a)
        total = self.p_d * pow_a.sum(axis=1) + self.noise_k
        inter = total - sig
        return float(np.sum(np.log2(1.0 + sig / inter)))

    def objective(self, phi: np.ndarray) -> float:
        return self.objective_from_response(self.response(phi))

    def euclid_grad(self, phi: np.ndarray) -> np.ndarray:
        """Gradient under the real inner product (2x the conj-Wirtinger)."""
        a = self.response(phi)
        pow_a = np.abs(a) ** 2
        sig = self.p_d * np.diagonal(pow_a)
        total = self.p_d * pow_a.sum(axis=1) + self.noise_k
        inter = total - sig
        # d f / d |A_ki|^2 (times ln 2): off-diagonal entries hit both the
        # numerator-plus-interference total and the interference alone
        coeff = np.empty_like(pow_a)
        coeff[:] = (self.p_d / total - self.p_d / inter)[:, None]
        np.fill_diagonal(coeff, self.p_d / total)
        t = coeff * a  # (K, K)
        p = self.h_i.conj() @ t.T  # (N_D, K)
        grad_conj = (self.m.conj() * p).sum(axis=1)
        return (2.0 / LN2) * grad_conj


def _coeffs_of(phi) -> np.ndarray:
    if isinstance(phi, PhaseVector):
        return phi.coeffs
    return np.asarray(phi)


def pj_objective(phi, channels, detector, p_d_watts: float,
                 noise_watts: float) -> float:
    """Sum rate seen by the detector when the cascade rides the pilots.

    phi may be a PhaseVector or a bare complex vector; the formula is
    defined for any complex amplitudes, which the finite-difference
    gradient tests exploit.
    """
    problem = _PjProblem(channels, detector, p_d_watts, noise_watts)
    return problem.objective(_coeffs_of(phi))


def _project(vec: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Tangent-space projection at the point with unit coefficients."""
    return vec - np.real(vec * coeffs.conj()) * coeffs


def riemannian_gradient(phi, euclid_grad: np.ndarray) -> np.ndarray:
    """Project the Euclidean gradient onto the circle-manifold tangent."""
    return _project(np.asarray(euclid_grad), _coeffs_of(phi))


def search_direction(riem_grad: np.ndarray, prev_dir: np.ndarray | None,
                     phi, cg_beta: float) -> np.ndarray:
    """Conjugate direction: steepest descent plus the transported history."""
    d = -np.asarray(riem_grad)
    if cg_beta != 0.0 and prev_dir is not None:
        d = d + cg_beta * _project(np.asarray(prev_dir), _coeffs_of(phi))
    return d


def retract(phi, direction: np.ndarray, step: float) -> PhaseVector:
    """Move along the tangent direction and renormalize elementwise."""
    coeffs = _coeffs_of(phi)
    if step == 0.0:
        return PhaseVector(phases=np.mod(np.angle(coeffs), 2.0 * np.pi),
                           coeffs=coeffs.copy(), bits=None)
    moved = coeffs + step * np.asarray(direction)
    mag = np.abs(moved)
    if moved.size and float(mag.min()) < RETRACT_FLOOR:
        raise RetractionError(
            f"retraction magnitude underflow (min {float(mag.min()):.3e})"
        )
    out = moved / mag if moved.size else moved
    return PhaseVector(phases=np.mod(np.angle(out), 2.0 * np.pi), coeffs=out,
                       bits=None)


def _inner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.vdot(a, b).real)


def _state_dump(trace: list, limit: int = 5) -> str:
    tail = trace[-limit:]
    return "; ".join(
        f"it={s.iteration} obj={s.objective:.6e} step={s.armijo_step:.3e}"
        for s in tail
    )


def optimize(channels, detector, cfg, rng: np.random.Generator | None = None,
             max_iter: int = MAX_ITER, tol: float = STOP_TOL,
             restarts: int = 1, keep_vectors: bool = False,
             trace_path=None) -> RcgResult:
    """Minimize the sum rate over phases and project onto the phase grid.

    Initial phases are uniform draws from rng (defaulting to the scene
    seed's optimizer substream); restarts > 1 reruns from fresh draws and
    keeps the best continuous optimum. The trace holds one RcgState per
    accepted step, starting with the initial point.
    """
    if rng is None:
        rng = rng_stream(cfg.seed, 3)
    problem = _PjProblem(channels, detector, cfg.p_d_watts(), cfg.noise_watts())
    n_d = channels.h_i.shape[0]

    best = None
    for _ in range(max(1, int(restarts))):
        candidate = _optimize_once(problem, n_d, rng, max_iter, tol, keep_vectors)
        if best is None or candidate[1] < best[1]:
            best = candidate
    phi, objective, trace = best

    continuous = PhaseVector(phases=np.mod(np.angle(phi), 2.0 * np.pi),
                             coeffs=phi, bits=None)
    quantized = quantize_phases(continuous, cfg.phase_bits)
    objective_quantized = (objective if cfg.phase_bits is None
                           else problem.objective(quantized.coeffs))
    result = RcgResult(
        continuous=continuous,
        quantized=quantized,
        trace=trace,
        objective_continuous=objective,
        objective_quantized=objective_quantized,
    )
    if trace_path is not None:
        _write_trace(trace_path, trace)
    return result


def _optimize_once(problem: _PjProblem, n_d: int, rng: np.random.Generator,
                   max_iter: int, tol: float, keep_vectors: bool):
    phi = np.exp(2j * np.pi * rng.random(n_d))
    trace: list[RcgState] = []

    obj = problem.objective(phi)
    if not math.isfinite(obj):
        raise NumericalError("objective not finite at initialization",
                             state=_state_dump(trace))

    if n_d == 0:
        trace.append(RcgState(iteration=0, objective=obj, armijo_step=0.0,
                              cg_beta=0.0, grad_norm=0.0, tangency_err=0.0,
                              modulus_err=0.0))
        return phi, obj, trace

    egrad = problem.euclid_grad(phi)
    rgrad = riemannian_gradient(phi, egrad)
    trace.append(_make_state(0, obj, 0.0, 0.0, phi, egrad, rgrad, None,
                             keep_vectors))

    prev_rgrad = None
    prev_dir = None
    prev_gnorm2 = 0.0

    for it in range(1, max_iter + 1):
        gnorm2 = _inner(rgrad, rgrad)
        if prev_rgrad is None or prev_gnorm2 <= 0.0:
            beta = 0.0
            direction = -rgrad
        else:
            transported = _project(prev_rgrad, phi)
            beta = max(0.0, _inner(rgrad, rgrad - transported) / prev_gnorm2)
            direction = search_direction(rgrad, prev_dir, phi, beta)

        slope = _inner(rgrad, direction)
        if not slope < 0.0:  # conjugacy gone stale; fall back to steepest
            beta = 0.0
            direction = -rgrad
            slope = -gnorm2
        if slope == 0.0:
            break

        step = 1.0
        accepted = False
        while step >= MIN_STEP:
            cand = retract(phi, direction, step)
            cand_obj = problem.objective(cand.coeffs)
            if not math.isfinite(cand_obj):
                raise NumericalError(
                    f"objective not finite at iteration {it}",
                    state=_state_dump(trace),
                )
            if cand_obj <= obj + ARMIJO_SLOPE * step * slope:
                accepted = True
                break
            step *= ARMIJO_SHRINK
        if not accepted:
            break

        delta = obj - cand_obj
        phi = cand.coeffs
        obj = cand_obj
        egrad = problem.euclid_grad(phi)
        new_rgrad = riemannian_gradient(phi, egrad)
        trace.append(_make_state(it, obj, step, beta, phi, egrad, new_rgrad,
                                 direction, keep_vectors))
        if delta < tol:
            break
        prev_rgrad, prev_dir, prev_gnorm2 = rgrad, direction, gnorm2
        rgrad = new_rgrad

    return phi, obj, trace


def _make_state(iteration, objective, step, beta, phi, egrad, rgrad, direction,
                keep_vectors) -> RcgState:
    tangency = float(np.max(np.abs(np.real(rgrad * phi.conj())))) if phi.size else 0.0
    modulus = float(np.max(np.abs(np.abs(phi) - 1.0))) if phi.size else 0.0
    state = RcgState(
        iteration=iteration,
        objective=float(objective),
        armijo_step=float(step),
        cg_beta=float(beta),
        grad_norm=math.sqrt(max(0.0, _inner(rgrad, rgrad))),
        tangency_err=tangency,
        modulus_err=modulus,
    )
    if keep_vectors:
        state.phi = PhaseVector(phases=np.mod(np.angle(phi), 2.0 * np.pi),
                                coeffs=phi.copy(), bits=None)
        state.euclid_grad = egrad.copy()
        state.riem_grad = rgrad.copy()
        state.search_dir = None if direction is None else direction.copy()
    return state


def _write_trace(path, trace: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "objective", "step", "grad_norm"])
        for s in trace:
            writer.writerow([s.iteration, f"{s.objective:.12g}",
                             f"{s.armijo_step:.12g}", f"{s.grad_norm:.12g}"])
