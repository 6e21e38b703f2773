"""Level-2 eigentensor estimation.

A Level-1 analysis produces one spectral concentration per channel, for
example per frequency band. Stacking them gives a profile ``psi`` of
length ``K``; a second group acting on the ``K`` channel indices is then
averaged exactly as at Level 1:

    R2 = 1/|G2| sum_s (P_s psi)(P_s psi)^T,   psi2 = lambda_max(R2) / Tr(R2).

Under the full symmetric group ``R2`` has one diagonal value,
``mean(psi_i^2)``, and one off-diagonal value, the mean of ``psi_i psi_j``
over ordered distinct pairs, so ``psi2`` measures how flat the profile is.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .groups import FiniteGroup, Representation, symmetric_group
from .linalg import hermitian_eig

__all__ = [
    "EigentensorError",
    "Level1Profile",
    "level2_estimate",
    "symmetric_closed_form",
    "two_class_profiles",
    "read_profiles",
    "MAX_K",
]

MAX_K = 6


class EigentensorError(ValueError):
    """Invalid profile or group."""


@dataclass(frozen=True)
class Level1Profile:
    """``K`` Level-1 spectral concentrations, each in ``(0, 1]``."""

    K: int
    psi_vec: Tuple[float, ...]

    def __post_init__(self):
        v = tuple(float(x) for x in self.psi_vec)
        if len(v) != self.K:
            raise EigentensorError(f"profile has {len(v)} entries, K={self.K}")
        if any(not (0.0 <= x <= 1.0) for x in v):
            raise EigentensorError("spectral concentrations must lie in [0, 1]")
        if not any(v):
            raise EigentensorError("profile must not be identically zero")
        object.__setattr__(self, "psi_vec", v)

    @classmethod
    def of(cls, values) -> "Level1Profile":
        v = tuple(float(x) for x in values)
        return cls(len(v), v)


def level2_estimate(profile: Level1Profile, G2: Optional[FiniteGroup] = None) -> Tuple[np.ndarray, float]:
    """Group-averaged outer product of the profile and its concentration.

    Parameters
    ----------
    profile : Level1Profile
    G2 : FiniteGroup, optional
        Group on the ``K`` channel indices; defaults to ``S_K`` (``K <= 6``).

    Returns
    -------
    R2 : ndarray of shape (K, K)
    psi2 : float
    """
    K = profile.K
    if G2 is None:
        if K > MAX_K:
            raise EigentensorError(f"symmetric closure is capped at K={MAX_K}, got {K}")
        G2 = symmetric_group(K)
    if G2.degree != K:
        raise EigentensorError(f"group degree {G2.degree} does not match profile length {K}")
    Y = Representation(G2).act(np.asarray(profile.psi_vec, dtype=float)).real
    R2 = Y.T @ Y / Y.shape[0]
    lam = hermitian_eig(R2).eigenvalues
    return R2, float(lam[0]) / float(np.trace(R2))


def symmetric_closed_form(psi_vec) -> Tuple[float, float]:
    """Diagonal and off-diagonal values of the ``S_K``-averaged outer product."""
    p = np.asarray(psi_vec, dtype=float)
    K = p.size
    if K < 2:
        return float(p @ p), float("nan")
    return float(np.mean(p ** 2)), float((p.sum() ** 2 - p @ p) / (K * (K - 1)))


def two_class_profiles(n_per_class: int = 50, K: int = 4, jitter: float = 0.05,
                       seed: int = 0, ramp: Tuple[float, float] = (0.3, 0.9),
                       level: float = 0.6) -> Tuple[np.ndarray, np.ndarray]:
    """Synthetic flat and ramped profiles with Gaussian jitter.

    Returns an ``(2 n, K)`` array of profiles clipped to ``[0.01, 1]`` and
    integer labels (0 flat, 1 ramped).
    """
    rng = np.random.default_rng(seed)
    flat = np.full(K, level)
    ramped = np.linspace(ramp[0], ramp[1], K)
    base = np.vstack([np.tile(flat, (n_per_class, 1)), np.tile(ramped, (n_per_class, 1))])
    X = np.clip(base + jitter * rng.standard_normal(base.shape), 0.01, 1.0)
    return X, np.repeat([0, 1], n_per_class)


def read_profiles(path: str) -> List[Level1Profile]:
    """Read one profile per CSV row. A non-numeric first row is a header."""
    out = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                vals = [float(c) for c in row]
            except ValueError:
                if lineno == 1:
                    continue
                raise EigentensorError(f"{path}:{lineno}: non-numeric entry") from None
            out.append(Level1Profile.of(vals))
    if len({p.K for p in out}) > 1:
        raise EigentensorError(f"{path}: rows have differing lengths")
    return out
