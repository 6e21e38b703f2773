"""Blind equalization costs and an ensemble harness for residual phase.

Three costs are provided, differing in their invariance group:

* CMA, ``(|y|^2 - R^2)^2``, invariant under every rotation of ``y``;
* AD-Z_M, ``|y^M - C_M|^2`` with ``C_M = E[s^M]``, invariant only under
  rotations by multiples of ``2 pi / M``;
* MMA, ``(y_R^2 - R_R^2)^2 + (y_I^2 - R_I^2)^2`` (the multimodulus form of
  Yang, Werner and Dumont), invariant under the square's symmetries.

A rotation-invariant cost cannot fix the carrier phase, so its converged
output sits at an arbitrary angle inside the fundamental cell of the
constellation's rotation group. Over an ensemble of random channels the
residual is uniform on ``(-pi/M, pi/M]`` with standard deviation
``180 / (M sqrt 3)`` degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from .signals import ChannelModel, channel_apply, constellation_points, make_channel, symbol_source, trial_rng

__all__ = [
    "EqualizerError",
    "EqualizerConfig",
    "PhaseStats",
    "TrialResult",
    "constellation_constants",
    "cost_and_gradient",
    "run_equalizer",
    "residual_phase",
    "symbol_mse",
    "aligned_symbol_mse",
    "draw_received",
    "ks_uniform_distance",
    "phase_ensemble",
    "grid_order",
]

COSTS = ("cma", "mma", "ad_zm")


class EqualizerError(RuntimeError):
    """Raised when the adaptive loop diverges or the config is invalid."""


@dataclass
class EqualizerConfig:
    """Settings for one adaptive-equalizer run.

    ``channel=None`` draws a fresh Rayleigh channel from ``seed``.
    """

    constellation: str = "qpsk"
    cost: str = "cma"
    n_taps: int = 11
    step: float = 5e-4
    n_symbols: int = 20000
    channel: Optional[ChannelModel] = None
    snr_db: Optional[float] = 25.0
    seed: int = 0
    channel_taps: int = 5
    decay_db_per_tap: float = 3.0

    def __post_init__(self):
        if self.cost not in COSTS:
            raise EqualizerError(f"unknown cost {self.cost!r}; choose from {COSTS}")
        if self.step <= 0:
            raise EqualizerError("step must be positive")
        if self.n_taps < 1 or self.n_taps % 2 == 0:
            raise EqualizerError("n_taps must be odd")
        if self.n_symbols < 4 * self.n_taps:
            raise EqualizerError("n_symbols too small for the tap count")


@dataclass
class PhaseStats:
    """Residual phases over an ensemble (radians) and their spread (degrees)."""

    residuals: List[float]
    std_deg: float
    predicted_deg: float
    M_grid: int
    failed: int = 0
    ks_distance: float = float("nan")


@dataclass
class TrialResult:
    trial: int
    seed: int
    cost: str
    constellation: str
    residual_deg: float
    converged_cost: float
    mse: float


def grid_order(constellation: str) -> int:
    """Order of the rotation group of a constellation (4 for square QAM)."""
    c = constellation.lower()
    if "qam" in c:
        return 4
    return constellation_points(constellation).size


def constellation_constants(constellation: str, M_grid: Optional[int] = None) -> Dict[str, complex]:
    """Exact dispersion constants from the point set.

    Returns ``R2 = E|s|^4 / E|s|^2``, ``C_M = E[s^M]``, and the per-axis
    MMA constants ``RR2 = E[s_R^4]/E[s_R^2]``, ``RI2`` likewise.
    """
    s = constellation_points(constellation)
    M = grid_order(constellation) if M_grid is None else M_grid
    re, im = s.real, s.imag
    return {
        "R2": float(np.mean(np.abs(s) ** 4) / np.mean(np.abs(s) ** 2)),
        "C": complex(np.mean(s ** M)),
        "M": M,
        "RR2": float(np.mean(re ** 4) / np.mean(re ** 2)),
        "RI2": float(np.mean(im ** 4) / np.mean(im ** 2)),
    }


def cost_and_gradient(cost: str, y: complex, consts: Dict[str, complex]) -> Tuple[float, complex]:
    """Per-sample cost and its gradient with respect to ``conj(y)``.

    For real ``J``, ``dJ = 2 Re(conj(g) dy)``; the tap update is then
    ``w <- w - step * g * conj(x)``.
    """
    if cost == "cma":
        e = abs(y) ** 2 - consts["R2"]
        return e * e, 2.0 * e * y
    if cost == "ad_zm":
        M = consts["M"]
        d = y ** M - consts["C"]
        return abs(d) ** 2, M * np.conj(y) ** (M - 1) * d
    if cost == "mma":
        yr, yi = y.real, y.imag
        er, ei = yr * yr - consts["RR2"], yi * yi - consts["RI2"]
        return er * er + ei * ei, 2.0 * (yr * er + 1j * yi * ei)
    raise EqualizerError(f"unknown cost {cost!r}")


def draw_received(cfg: EqualizerConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Transmitted symbols and channel output for ``cfg.seed``."""
    rng = trial_rng(cfg.seed, 0)
    s_seed, c_seed, n_seed = (int(v) for v in rng.integers(0, 2**31 - 1, 3))
    ch = cfg.channel or make_channel(cfg.channel_taps, cfg.decay_db_per_tap, c_seed)
    s = symbol_source(cfg.constellation, cfg.n_symbols, s_seed)
    return s, channel_apply(ch, s, cfg.snr_db, n_seed)


def run_equalizer(cfg: EqualizerConfig, received: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray, float]:
    """Symbol-spaced FIR equalizer trained by stochastic gradient descent.

    Returns
    -------
    taps : ndarray
    outputs : ndarray
        Outputs over the last quarter of the run.
    converged_cost : float
        Mean per-sample cost over that window.

    Raises
    ------
    EqualizerError
        If the tap norm exceeds 1e6 (divergence).
    """
    consts = constellation_constants(cfg.constellation)
    if received is None:
        _, received = draw_received(cfg)
    r = np.asarray(received, dtype=complex)
    N = cfg.n_taps
    w = np.zeros(N, dtype=complex)
    w[N // 2] = 1.0
    pad = np.concatenate([np.zeros(N - 1, dtype=complex), r])
    n = r.size
    start = n - n // 4
    ys = np.empty(n, dtype=complex)
    costs = np.empty(n)
    step = cfg.step
    cost = cfg.cost
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            _adapt(w, pad, ys, costs, N, step, cost, consts)
    except OverflowError:
        raise EqualizerError(f"divergence: tap norm exceeded 1e6 with step={step}") from None
    if not np.all(np.isfinite(w)) or np.linalg.norm(w) > 1e6:
        raise EqualizerError(f"divergence: tap norm exceeded 1e6 with step={step}")
    return w, ys[start:], float(np.mean(costs[start:]))


def _adapt(w, pad, ys, costs, N, step, cost, consts):
    for k in range(ys.size):
        x = pad[k: k + N][::-1]
        y = complex(w @ x)
        J, g = cost_and_gradient(cost, y, consts)
        ys[k] = y
        costs[k] = J
        w -= step * g * np.conj(x)
        if k % 64 == 0 and not (np.linalg.norm(w) <= 1e6):
            raise EqualizerError(f"divergence: tap norm exceeded 1e6 with step={step}")


def residual_phase(y, M_grid: int, constellation: str) -> float:
    """Rotation of ``y`` relative to the nearest ``Z_M`` grid orientation.

    Uses the ``M``-th power moment: ``(1/M) arg(sum y^M conj(C_M))``,
    wrapped into ``(-pi/M, pi/M]``.
    """
    y = np.asarray(y, dtype=complex)
    if y.size == 0 or not np.any(y):
        raise EqualizerError("residual phase needs nonzero outputs")
    C = np.mean(constellation_points(constellation) ** M_grid)
    z = np.sum(y ** M_grid)
    if abs(C) > 1e-12:
        z = z * np.conj(C)
    phi = float(np.angle(z)) / M_grid
    cell = 2 * np.pi / M_grid
    phi = phi - cell * math.ceil((phi - np.pi / M_grid) / cell)
    return phi


def symbol_mse(y, constellation: str) -> float:
    """Mean squared distance from each output to its nearest constellation point."""
    y = np.asarray(y, dtype=complex)
    pts = constellation_points(constellation)
    return float(np.mean(np.min(np.abs(y[:, None] - pts[None, :]) ** 2, axis=1)))


def aligned_symbol_mse(y, symbols, M_grid: int, max_delay: int = 32) -> float:
    """Symbol MSE after resolving only the delay and the ``Z_M`` ambiguity.

    ``y`` is compared against the tail of ``symbols`` of the same length,
    shifted by ``0..max_delay`` samples and rotated by ``exp(2 pi i k / M)``.
    A residual phase inside the fundamental cell is not removed.
    """
    y = np.asarray(y, dtype=complex)
    s = np.asarray(symbols, dtype=complex)
    n = y.size
    best = np.inf
    rots = np.exp(2j * np.pi * np.arange(M_grid) / M_grid)
    for d in range(min(max_delay, s.size - n) + 1):
        ref = s[s.size - n - d: s.size - d]
        c = np.vdot(ref, y)
        k = int(np.argmax((c * np.conj(rots)).real))
        best = min(best, float(np.mean(np.abs(y * np.conj(rots[k]) - ref) ** 2)))
    return best


def ks_uniform_distance(residuals, M_grid: int) -> float:
    """Kolmogorov-Smirnov distance to the uniform law on ``(-pi/M, pi/M]``."""
    x = np.sort(np.asarray(residuals, dtype=float))
    n = x.size
    F = np.clip((x + np.pi / M_grid) / (2 * np.pi / M_grid), 0.0, 1.0)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def _one_trial(cfg: EqualizerConfig, trial: int, seed: int) -> TrialResult:
    c = replace(cfg, seed=int(trial_rng(seed, trial).integers(0, 2**31 - 1)), channel=cfg.channel)
    s, r = draw_received(c)
    _, y, jc = run_equalizer(c, r)
    M = grid_order(c.constellation)
    phi = residual_phase(y, M, c.constellation)
    return TrialResult(trial, c.seed, c.cost, c.constellation, math.degrees(phi), jc, aligned_symbol_mse(y, s, M))


def phase_ensemble(cfg: EqualizerConfig, n_trials: int = 200, seed: int = 0,
                   threads: int = 1, min_trials: int = 50) -> Tuple[PhaseStats, List[TrialResult]]:
    """Run independent trials and pool their residual phases.

    Each trial draws its own channel, symbols and noise from
    ``trial_rng(seed, trial)``. Diverged trials are counted in
    ``failed`` and excluded. Results are ordered by trial index
    regardless of ``threads``.
    """
    if n_trials < min_trials:
        raise EqualizerError(f"n_trials must be at least {min_trials}")
    results: List[Optional[TrialResult]] = [None] * n_trials

    def work(t):
        try:
            return _one_trial(cfg, t, seed)
        except EqualizerError:
            return None

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(work, range(n_trials)))
    else:
        results = [work(t) for t in range(n_trials)]
    ok = [r for r in results if r is not None]
    M = grid_order(cfg.constellation)
    res = [math.radians(r.residual_deg) for r in ok]
    std = float(np.degrees(np.std(res))) if res else float("nan")
    stats = PhaseStats(res, std, 180.0 / (M * math.sqrt(3.0)), M, n_trials - len(ok),
                       ks_uniform_distance(res, M) if res else float("nan"))
    return stats, ok
