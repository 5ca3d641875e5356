"""Per-realization SINRs and Monte Carlo ergodic rate estimation.

Rates come from the SINR expressions directly, never from symbol draws.
Each trial owns a keyed random substream, so estimates are identical for
any worker count and any subset of scenarios run side by side.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import channel, detect, jam, rcg
from .errors import ConfigError, DegenerateChannelError, SingularChannelError
from .scene import LargeScaleGains, SceneConfig, large_scale, place_users, rng_stream

__all__ = [
    "RateSample",
    "ErgodicEstimate",
    "Scenario",
    "SCENARIOS",
    "sinr_mrc_dirs",
    "sinr_zf_dirs",
    "sinr_aj",
    "sinr_aj_zf",
    "sinr_pj",
    "ergodic",
]

log = logging.getLogger(__name__)

# A ZF-singular direct channel draw is a measure-zero event; if redraws
# keep failing something is structurally wrong with the scene.
MAX_REDRAWS_PER_TRIAL = 8


@dataclass
class RateSample:
    """One realization's per-user SINRs and rates for one scenario."""

    sinr: np.ndarray
    rate: np.ndarray
    tag: str  # one of NoJam, DIRS, AJ, PJ


@dataclass
class ErgodicEstimate:
    """Monte Carlo aggregate over trials; half-widths are 95% normal CIs."""

    mean_rate: np.ndarray
    var_rate: np.ndarray
    ci_half: np.ndarray
    sum_rate_mean: float
    sum_rate_var: float
    sum_rate_ci_half: float
    trials: int
    redraws: int
    tag: str


@dataclass(frozen=True)
class Scenario:
    """How one curve is produced: detector rule, jammer type, AJ power."""

    key: str
    detector: str  # mrc | zf
    jammer: str  # none | dirs | aj | pj
    p_j_dbm: float | None = None  # AJ only; None falls back to the scene value

    @property
    def tag(self) -> str:
        return {"none": "NoJam", "dirs": "DIRS", "aj": "AJ", "pj": "PJ"}[self.jammer]


SCENARIOS = {
    s.key: s
    for s in (
        Scenario("nojam_zf", "zf", "none"),
        Scenario("nojam_mrc", "mrc", "none"),
        Scenario("dirs_zf", "zf", "dirs"),
        Scenario("dirs_mrc", "mrc", "dirs"),
        Scenario("aj_neg4dbm", "zf", "aj", p_j_dbm=-4.0),
        Scenario("aj_pos4dbm", "zf", "aj", p_j_dbm=4.0),
        Scenario("pj_rcg", "zf", "pj"),
    )
}


def _resolve(scenario) -> Scenario:
    if isinstance(scenario, Scenario):
        return scenario
    try:
        return SCENARIOS[scenario]
    except KeyError:
        raise ConfigError(
            f"unknown scenario {scenario!r}; known: {', '.join(sorted(SCENARIOS))}"
        ) from None


def sinr_mrc_dirs(h_d: np.ndarray, h_dirs: np.ndarray, k: int,
                  p_d_watts: float, noise_watts: float) -> float:
    """MRC SINR of user k with the reflector cascade left uncancelled.

    h_dirs holds the composed reflector columns; pass a zero or empty
    matrix for an unjammed system.
    """
    h_k = h_d[:, k]
    norm2 = float(np.real(np.vdot(h_k, h_k)))
    if norm2 == 0.0:
        raise DegenerateChannelError(f"user {k} direct channel has zero norm")
    inter = np.abs(h_k.conj() @ h_d) ** 2
    inter_sum = float(np.sum(inter)) - norm2 ** 2
    aca = float(np.sum(np.abs(h_k.conj() @ h_dirs) ** 2)) if h_dirs.size else 0.0
    num = p_d_watts * norm2 ** 2
    den = p_d_watts * inter_sum + p_d_watts * aca + noise_watts * norm2
    return num / den


def sinr_zf_dirs(w: detect.DetectorMatrix, h_dirs: np.ndarray, k: int,
                 p_d_watts: float, noise_watts: float) -> float:
    """ZF SINR of user k; inter-user terms are zero by construction."""
    if w.kind != "zf":
        raise ValueError(f"detector kind must be zf, got {w.kind!r}")
    w_k = w.w[:, k]
    norm2 = float(np.real(np.vdot(w_k, w_k)))
    aca = float(np.sum(np.abs(w_k.conj() @ h_dirs) ** 2)) if h_dirs.size else 0.0
    return p_d_watts / (p_d_watts * aca + noise_watts * norm2)


def sinr_aj(w: detect.DetectorMatrix, h_d: np.ndarray, h_j: np.ndarray, k: int,
            p_d_watts: float, p_j_watts: float, noise_watts: float) -> float:
    """SINR of user k under an uplink active jammer, any linear detector."""
    w_k = w.w[:, k]
    thru = w_k.conj() @ h_d
    signal = p_d_watts * float(np.abs(thru[k]) ** 2)
    inter = p_d_watts * (float(np.sum(np.abs(thru) ** 2))
                         - float(np.abs(thru[k]) ** 2))
    jam_pow = jam.aj_interference_power(w_k, h_j, p_j_watts)
    norm2 = float(np.real(np.vdot(w_k, w_k)))
    return signal / (inter + jam_pow + noise_watts * norm2)


def sinr_aj_zf(w: detect.DetectorMatrix, h_j: np.ndarray, k: int,
               p_d_watts: float, p_j_watts: float, noise_watts: float) -> float:
    """Collapsed ZF form of sinr_aj: inter-user terms drop, signal is p_d."""
    if w.kind != "zf":
        raise ValueError(f"detector kind must be zf, got {w.kind!r}")
    w_k = w.w[:, k]
    jam_pow = jam.aj_interference_power(w_k, h_j, p_j_watts)
    norm2 = float(np.real(np.vdot(w_k, w_k)))
    return p_d_watts / (jam_pow + noise_watts * norm2)


def sinr_pj(w: detect.DetectorMatrix, h_d: np.ndarray, h_dirs: np.ndarray,
            k: int, p_d_watts: float, noise_watts: float) -> float:
    """SINR of user k when static reflector phases leak into the pilots.

    With fixed phases the cascade is present during channel estimation,
    so the useful signal rides h_d,k + h_dirs,k while the detector was
    built from h_d alone; nothing is zero-forced exactly any more.
    """
    w_k = w.w[:, k]
    h_eff = h_d + h_dirs if h_dirs.size else h_d
    a = w_k.conj() @ h_eff
    signal = p_d_watts * float(np.abs(a[k]) ** 2)
    inter = p_d_watts * (float(np.sum(np.abs(a) ** 2)) - float(np.abs(a[k]) ** 2))
    norm2 = float(np.real(np.vdot(w_k, w_k)))
    return signal / (inter + noise_watts * norm2)


def _trial_rates(cfg: SceneConfig, scenario: Scenario, gains: LargeScaleGains,
                 users: np.ndarray, rng: np.random.Generator) -> RateSample:
    """Evaluate one realization. Draw order per jammer type:

    none: h_d
    dirs: h_d, (aoa, g), h_i, phases
    aj:   h_d, h_j
    pj:   h_d, (aoa, g), h_i, optimizer initialization
    """
    if cfg.redraw_users_per_trial:
        users = place_users(cfg, rng)
        gains = large_scale(cfg, users)

    h_d = channel.draw_direct(cfg, gains, rng)
    det = detect.zf(h_d) if scenario.detector == "zf" else detect.mrc(h_d)

    p_d = cfg.p_d_watts()
    noise = cfg.noise_watts()
    k_users = cfg.n_users
    empty = np.zeros((cfg.n_antennas, 0))

    if scenario.jammer == "none":
        if scenario.detector == "zf":
            sinr = [sinr_zf_dirs(det, empty, k, p_d, noise) for k in range(k_users)]
        else:
            sinr = [sinr_mrc_dirs(h_d, empty, k, p_d, noise) for k in range(k_users)]
    elif scenario.jammer == "dirs":
        g, aoa = channel.draw_bs_dirs(cfg, gains, rng)
        h_i = channel.draw_dirs_lu(cfg, gains, rng)
        phases = jam.random_phases(cfg.n_dirs_elements, cfg.phase_bits, rng)
        real = channel.ChannelRealization(g=g, h_i=h_i, h_d=h_d, gains=gains, aoa=aoa)
        h_dirs = channel.compose_dirs_channel(real, phases.coeffs)
        if scenario.detector == "zf":
            sinr = [sinr_zf_dirs(det, h_dirs, k, p_d, noise) for k in range(k_users)]
        else:
            sinr = [sinr_mrc_dirs(h_d, h_dirs, k, p_d, noise) for k in range(k_users)]
    elif scenario.jammer == "aj":
        aj_chan = channel.draw_aj(cfg, gains, rng)
        p_j_dbm = cfg.p_j_dbm if scenario.p_j_dbm is None else scenario.p_j_dbm
        p_j = 10.0 ** ((p_j_dbm - 30.0) / 10.0)
        sinr = [
            sinr_aj(det, h_d, aj_chan.h_j, k, p_d, p_j, noise)
            for k in range(k_users)
        ]
    elif scenario.jammer == "pj":
        g, aoa = channel.draw_bs_dirs(cfg, gains, rng)
        h_i = channel.draw_dirs_lu(cfg, gains, rng)
        real = channel.ChannelRealization(g=g, h_i=h_i, h_d=h_d, gains=gains, aoa=aoa)
        result = rcg.optimize(real, det, cfg, rng=rng)
        h_dirs = channel.compose_dirs_channel(real, result.quantized.coeffs)
        sinr = [sinr_pj(det, h_d, h_dirs, k, p_d, noise) for k in range(k_users)]
    else:
        raise ConfigError(f"unknown jammer type {scenario.jammer!r}")

    sinr = np.asarray(sinr)
    return RateSample(sinr=sinr, rate=np.log2(1.0 + sinr), tag=scenario.tag)


def _run_block(cfg: SceneConfig, scenario: Scenario, gains: LargeScaleGains,
               users: np.ndarray, seed: int, t_lo: int, t_hi: int):
    """Trials [t_lo, t_hi) on their keyed streams; used by every worker."""
    rates = np.empty((t_hi - t_lo, cfg.n_users))
    redraws = 0
    for t in range(t_lo, t_hi):
        attempt = 0
        while True:
            rng = rng_stream(seed, 1, t, attempt)
            try:
                sample = _trial_rates(cfg, scenario, gains, users, rng)
                break
            except SingularChannelError as exc:
                redraws += 1
                attempt += 1
                log.warning("trial %d redrawn (attempt %d): %s", t, attempt, exc)
                if attempt > MAX_REDRAWS_PER_TRIAL:
                    raise
        rates[t - t_lo] = sample.rate
    return rates, redraws


def ergodic(cfg: SceneConfig, scenario, trials: int | None = None,
            seed: int | None = None, workers: int = 1) -> ErgodicEstimate:
    """Monte Carlo ergodic rate estimate for one scenario.

    Users are placed once from substream (seed, 0) unless the scene asks
    for per-trial redraws; trial t always consumes substream
    (seed, 1, t, attempt), so results do not depend on worker count.
    """
    scenario = _resolve(scenario)
    trials = cfg.trials if trials is None else int(trials)
    seed = cfg.seed if seed is None else int(seed)
    if trials < 2:
        raise ConfigError(f"trials must be >= 2 for a variance estimate, got {trials}")
    if scenario.jammer == "aj" and cfg.aj_position is None:
        raise ConfigError(
            f"scenario {scenario.key!r} needs aj_position in the scene config"
        )

    users = place_users(cfg, rng_stream(seed, 0))
    gains = large_scale(cfg, users)

    if workers <= 1 or trials < 2 * workers:
        blocks = [_run_block(cfg, scenario, gains, users, seed, 0, trials)]
    else:
        bounds_idx = np.linspace(0, trials, workers + 1, dtype=int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_block, cfg, scenario, gains, users, seed,
                            int(lo), int(hi))
                for lo, hi in zip(bounds_idx[:-1], bounds_idx[1:])
                if hi > lo
            ]
            blocks = [f.result() for f in futures]

    rates = np.vstack([b[0] for b in blocks])
    redraws = sum(b[1] for b in blocks)

    mean = rates.mean(axis=0)
    var = rates.var(axis=0, ddof=1)
    ci = 1.96 * np.sqrt(var / trials)
    sums = rates.sum(axis=1)
    sum_mean = float(sums.mean())
    sum_var = float(sums.var(ddof=1))
    sum_ci = 1.96 * math.sqrt(sum_var / trials)
    return ErgodicEstimate(
        mean_rate=mean, var_rate=var, ci_half=ci,
        sum_rate_mean=sum_mean, sum_rate_var=sum_var, sum_rate_ci_half=sum_ci,
        trials=trials, redraws=redraws, tag=scenario.tag,
    )
