"""Rank promotion of scalar streams and orbit-sampling strategies.

A scalar stream of length ``N = M L`` is reshaped into ``L`` blocks of
length ``M`` so that a group acting on block indices has something to act
on. Given a matched group, the PASE levels choose which permutations to
average over:

* level 1, antithetic pairs ``{s, s^-1}``;
* level 2, one representative per cycle type, each with its inverse;
* level 3, one representative per left coset of ``G`` in ``S_M``.

Stratified Monte Carlo for ``pi = int_0^1 4 sqrt(1 - u^2) du`` is the
level-3 construction with ``G = Z_M`` acting on ``M`` strata. The
structural coding rate experiment counts how many orbit elements a
covariance estimate needs before it reaches its full-orbit variance floor.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .diagnostics import diagnostics_record
from .groups import FiniteGroup, Permutation, Representation
from .signals import CovModel, _cgauss, _sqrtm_psd, build_covariance, trial_rng

__all__ = [
    "RankPromoError",
    "StratifiedStream",
    "PaseSelection",
    "CodingRateRow",
    "PiSpeedup",
    "stratify",
    "pase_select",
    "mc_pi",
    "pi_speedup",
    "orbit_mse_exact",
    "greedy_orbit_order",
    "coding_rate_experiment",
]

LEVEL3_MAX_DEGREE = 8


class RankPromoError(ValueError):
    """Infeasible selection sizes, divisibility violations and similar."""


@dataclass
class StratifiedStream:
    """A scalar stream blocked row-major into ``L`` blocks of length ``M``."""

    M: int
    L: int
    blocks: np.ndarray
    source_len: int

    def flatten(self) -> np.ndarray:
        return self.blocks.reshape(-1)


@dataclass
class PaseSelection:
    level: int
    elements: List[Permutation]
    closed_under_inverse: bool


@dataclass
class CodingRateRow:
    """One model's outcome in the coding-rate experiment.

    ``ratio`` is ``n_star / 2^h_struct``; ``diffuse`` marks models with
    ``h_struct >= log2(M) / 2``.
    """

    model: str
    h_struct: float
    n_star: int
    ratio: float
    diffuse: bool
    n_star_exact: int
    order: List[int] = field(default_factory=list)

    def as_tuple(self) -> Tuple[float, int, float]:
        return (self.h_struct, self.n_star, self.ratio)


@dataclass
class PiSpeedup:
    """Sample counts for a target RMS error under both counting conventions."""

    target_rmse: float
    M: int
    draws_plain: int
    draws_stratified: int
    rounds_stratified: int
    speedup_draws: float
    speedup_rounds: float


def stratify(stream, M: int) -> StratifiedStream:
    """Block ``stream`` row-major into rows of length ``M``.

    Raises
    ------
    RankPromoError
        If ``len(stream)`` is not a multiple of ``M``; the message names
        the longest valid truncation.
    """
    x = np.asarray(stream)
    if x.ndim != 1:
        raise RankPromoError("stream must be one-dimensional")
    if M < 1:
        raise RankPromoError("M must be positive")
    N = x.size
    if N % M:
        raise RankPromoError(f"length {N} is not divisible by M={M}; truncate to {N - N % M} samples")
    return StratifiedStream(M, N // M, x.reshape(N // M, M).copy(), N)


def _inverse_blocks(G: FiniteGroup) -> List[List[Permutation]]:
    seen, out = set(), []
    for g in G.elements:
        if g in seen:
            continue
        gi = g.inverse()
        blk = [g] if gi == g else [g, gi]
        seen.update(blk)
        out.append(blk)
    return out


def _left_coset_reps(G: FiniteGroup) -> List[Permutation]:
    M = G.degree
    if M > LEVEL3_MAX_DEGREE:
        raise RankPromoError(f"level 3 coset enumeration is capped at degree {LEVEL3_MAX_DEGREE}, got {M}")
    gens = [Permutation.from_cycles(M, [(k, k + 1)]) for k in range(M - 1)]
    start = Permutation.identity(M)
    seen, reps, covered = {start}, [], set()
    q = deque([start])
    while q:
        s = q.popleft()
        if s not in covered:
            reps.append(s)
            covered.update(s * g for g in G.elements)
        for t in gens:
            u = s * t
            if u not in seen:
                seen.add(u)
                q.append(u)
    return reps


def pase_select(level: int, G: FiniteGroup, n: int, seed: int = 0) -> PaseSelection:
    """Choose ``n`` permutations according to a PASE level.

    Parameters
    ----------
    level : {1, 2, 3}
    G : FiniteGroup
        Matched group. Levels 1 and 2 select from ``G``; level 3 selects
        left-coset representatives of ``G`` in ``S_M``.
    n : int
        Requested size. Level 1 needs ``n`` even and at most twice the
        number of non-involutive inverse pairs. Level 2 returns the longest
        prefix of whole cycle-type blocks with at most ``n`` elements.
    seed : int
        Used by level 1 only.
    """
    if n < 1:
        raise RankPromoError("n must be positive")
    if level == 1:
        pairs = [b for b in _inverse_blocks(G) if len(b) == 2]
        if n % 2 or n // 2 > len(pairs):
            raise RankPromoError(f"level 1 needs an even n <= {2 * len(pairs)} for {G.label}, got {n}")
        idx = np.random.default_rng(seed).permutation(len(pairs))[: n // 2]
        els = [p for i in sorted(int(v) for v in idx) for p in pairs[i]]
        return PaseSelection(1, els, True)
    if level == 2:
        by_type: Dict[Tuple[int, ...], Permutation] = {}
        for g in G.elements:
            by_type.setdefault(tuple(sorted(g.cycle_type(), reverse=True)), g)
        blocks = []
        for ct in sorted(by_type):
            g = by_type[ct]
            gi = g.inverse()
            blocks.append([g] if gi == g else [g, gi])
        total = sum(len(b) for b in blocks)
        if n > total:
            raise RankPromoError(f"level 2 has only {total} elements for {G.label}, requested {n}")
        els: List[Permutation] = []
        for b in blocks:
            if len(els) + len(b) > n:
                break
            els.extend(b)
        return PaseSelection(2, els, all(e.inverse() in els for e in els))
    if level == 3:
        reps = _left_coset_reps(G)
        if n > len(reps):
            raise RankPromoError(f"level 3 index [S_{G.degree} : {G.label}] = {len(reps)} < n = {n}")
        return PaseSelection(3, reps[:n], False)
    raise RankPromoError(f"level must be 1, 2 or 3, got {level}")


def _integrand(u):
    return 4.0 * np.sqrt(1.0 - u * u)


def mc_pi(mode: str, M: int, n_total: int, seed: int = 0) -> Tuple[float, float]:
    """Monte Carlo estimate of ``pi`` and its absolute error.

    ``plain`` averages the integrand at ``n_total`` uniforms. ``stratified``
    runs ``n_total / M`` rounds, each drawing one uniform in every stratum
    ``[k/M, (k+1)/M)``.
    """
    if n_total < 1 or M < 1:
        raise RankPromoError("n_total and M must be positive")
    rng = np.random.default_rng(seed)
    if mode == "plain":
        u = rng.uniform(size=n_total)
    elif mode == "stratified":
        if n_total % M:
            raise RankPromoError(f"n_total={n_total} must be divisible by M={M}")
        u = ((np.arange(M)[None, :] + rng.uniform(size=(n_total // M, M))) / M).ravel()
    else:
        raise RankPromoError(f"mode must be 'plain' or 'stratified', got {mode!r}")
    est = float(np.mean(_integrand(u)))
    return est, abs(est - math.pi)


def _stratum_variances(M: int, grid: int = 4096) -> np.ndarray:
    # midpoint rule on each stratum
    t = (np.arange(grid) + 0.5) / grid
    u = (np.arange(M)[:, None] + t[None, :]) / M
    f = _integrand(u)
    return f.var(axis=1)


def pi_speedup(M: int = 64, digits: int = 6) -> PiSpeedup:
    """Draws needed for RMS error ``0.5 * 10^-digits`` with and without strata.

    Uses the exact per-draw variances, so the result is deterministic.
    Both the total-draw and the round-count conventions are reported.
    """
    target = 0.5 * 10.0 ** (-digits)
    var_plain = 16.0 * 2.0 / 3.0 - math.pi ** 2
    var_round = float(np.sum(_stratum_variances(M))) / M ** 2
    n_plain = math.ceil(var_plain / target ** 2)
    rounds = math.ceil(var_round / target ** 2)
    return PiSpeedup(target, M, n_plain, rounds * M, rounds, n_plain / (rounds * M), n_plain / rounds)


def _mult_tables(rep: Representation):
    maps = rep.group.maps
    G = maps.shape[0]
    inv = np.argsort(maps, axis=1)
    index = {tuple(int(v) for v in row): i for i, row in enumerate(maps)}
    # table[g, h] = index of g^-1 h, with (a*b)[k] = a[b[k]]
    table = np.empty((G, G), dtype=int)
    for g in range(G):
        comp = inv[g][maps]
        for h in range(G):
            table[g, h] = index[tuple(int(v) for v in comp[h])]
    return table


def _mse_terms(rep: Representation, R: np.ndarray):
    P = rep.matrices()
    PR = P @ R
    t1 = np.abs(np.einsum("gii->g", PR)) ** 2
    conj = PR @ np.conj(np.transpose(P, (0, 2, 1)))
    b = np.einsum("gij,ji->g", conj, R).real
    return t1 + b, b


def orbit_mse_exact(rep: Representation, R, subset: Sequence[int]) -> float:
    """Exact Gaussian MSE of the orbit average over the elements in ``subset``.

    For ``x ~ CN(0, R)`` and ``R_S = (1/n) sum_{g in S} P_g x x^H P_g^H``,
    ``E||R_S - R||^2 = (1/n^2) sum_{g,h} t(g^-1 h) - (2/n) sum_g b(g) + ||R||^2``
    with ``b(u) = Tr(P_u R P_u^H R)`` and ``t(u) = |Tr(P_u R)|^2 + b(u)``.
    """
    R = np.asarray(R, dtype=complex)
    t, b = _mse_terms(rep, R)
    table = _mult_tables(rep)
    S = np.asarray(subset, dtype=int)
    n = S.size
    return float(t[table[np.ix_(S, S)]].sum() / n ** 2 - 2.0 * b[S].sum() / n + np.linalg.norm(R) ** 2)


def greedy_orbit_order(rep: Representation, R) -> Tuple[List[int], List[float]]:
    """Order group elements by greedy reduction of the exact orbit-average MSE.

    Starts at the identity; each step appends the element that minimizes
    :func:`orbit_mse_exact` of the enlarged prefix, ties going to the
    lowest element index. Returns the order and the MSE of every prefix.
    """
    R = np.asarray(R, dtype=complex)
    t, b = _mse_terms(rep, R)
    table = _mult_tables(rep)
    G = table.shape[0]
    e = rep.group.index(Permutation.identity(rep.degree))
    r2 = float(np.linalg.norm(R) ** 2)
    order = [e]
    used = np.zeros(G, dtype=bool)
    used[e] = True
    pair = t[table[e, :]] + t[table[:, e]]
    T, B = float(t[table[e, e]]), float(b[e])
    mses = [T - 2.0 * B + r2]
    for n in range(2, G + 1):
        cand = (T + pair + t[np.diag(table)]) / n ** 2 - 2.0 * (B + b) / n + r2
        cand = np.where(used, np.inf, cand)
        best = float(cand.min())
        c = int(np.flatnonzero(cand <= best + 1e-12 * max(abs(best), r2))[0])
        order.append(c)
        used[c] = True
        T += float(pair[c] + t[table[c, c]])
        B += float(b[c])
        pair = pair + t[table[c, :]] + t[table[:, c]]
        mses.append(float(cand[c]))
    return order, mses


def _mc_prefix_mse(rep: Representation, R: np.ndarray, order: Sequence[int], n_mc: int, seed: int) -> np.ndarray:
    rng = trial_rng(seed, 0)
    X = _cgauss(rng, (n_mc, R.shape[0])) @ _sqrtm_psd(R).T
    Y = rep.act(X)[np.asarray(order)]  # (|G|, n_mc, M)
    acc = np.zeros((n_mc,) + R.shape, dtype=complex)
    out = np.empty(len(order))
    for n in range(len(order)):
        acc += Y[n][:, :, None] * np.conj(Y[n])[:, None, :]
        out[n] = np.mean(np.linalg.norm(acc / (n + 1) - R[None], axis=(1, 2)) ** 2)
    return out


def coding_rate_experiment(models: Sequence[CovModel], G: FiniteGroup, seed: int = 0,
                           tol: float = 0.05, n_mc: int = 400,
                           names: Optional[Sequence[str]] = None) -> List[CodingRateRow]:
    """Smallest orbit sample reaching the full-orbit variance floor.

    For each model, elements of ``G`` are ordered by
    :func:`greedy_orbit_order` on the population covariance. ``n_star``
    is the smallest prefix whose Monte Carlo MSE (``n_mc`` Gaussian
    snapshots, common to all prefixes) is within ``tol`` of the full-orbit
    MSE; ``n_star_exact`` applies the same rule to the exact MSE.
    """
    rep = Representation(G)
    rows = []
    for i, model in enumerate(models):
        if model.M != G.degree:
            raise RankPromoError(f"model M={model.M} does not match group degree {G.degree}")
        R = build_covariance(model)
        h = diagnostics_record(R).h_struct
        order, exact = greedy_orbit_order(rep, R)
        mc = _mc_prefix_mse(rep, R, order, n_mc, int(trial_rng(seed, i).integers(2**31 - 1)))
        n_star = int(np.flatnonzero(mc <= (1 + tol) * mc[-1])[0]) + 1
        ex = np.asarray(exact)
        n_exact = int(np.flatnonzero(ex <= (1 + tol) * ex[-1] + 1e-12 * abs(ex[-1]))[0]) + 1
        name = names[i] if names else f"{model.kind}_{i}"
        rows.append(CodingRateRow(name, h, n_star, n_star / 2.0 ** h,
                                  h >= 0.5 * math.log2(model.M), n_exact, order))
    return rows
