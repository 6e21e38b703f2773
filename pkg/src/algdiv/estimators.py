"""Group-averaged covariance estimators.

The central object is the group-averaged estimator

    R_G = 1/(L |G|) sum_l sum_g (pi_g x_l)(pi_g x_l)^H,

which interpolates between the sample covariance (trivial group, many
snapshots) and a single-snapshot estimate averaged over a large group.
For Abelian product groups acting on a reshaped index the same matrix
is obtained from per-axis DFTs in ``O(M log M)`` per snapshot plus the
``O(M^2)`` cost of writing out the result.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence

import numpy as np

from .groups import FiniteGroup, Representation, make_group
from .linalg import dft_axis

__all__ = [
    "EstimatorError",
    "SnapshotSet",
    "CovEstimate",
    "GaatMoments",
    "group_avg_covariance",
    "fast_path_abelian",
    "abelian_spectrum",
    "reynolds_project",
    "gaat_moments",
    "sample_covariance",
    "single_snapshot_estimates",
]


class EstimatorError(ValueError):
    """Dimension or input errors in estimators."""


@dataclass
class SnapshotSet:
    """``L`` complex snapshots of dimension ``M``.

    Parameters
    ----------
    data : array_like of shape (L, M) or (M,)
        A 1-D input is treated as a single snapshot.
    meta : dict
        Free-form provenance (generator tag, SNR in dB, RNG seed).
    """

    data: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        d = np.array(self.data, dtype=complex)
        if d.ndim == 1:
            d = d[None, :]
        if d.ndim != 2 or d.shape[0] < 1 or d.shape[1] < 1:
            raise EstimatorError(f"snapshots must have shape (L, M), got {d.shape}")
        if not np.all(np.isfinite(d)):
            raise EstimatorError("snapshots contain non-finite values")
        self.data = d

    @property
    def L(self) -> int:
        return self.data.shape[0]

    @property
    def M(self) -> int:
        return self.data.shape[1]

    def head(self, n: int) -> "SnapshotSet":
        return SnapshotSet(self.data[:n], dict(self.meta))


@dataclass
class CovEstimate:
    """Result of a covariance estimator.

    Attributes
    ----------
    R_hat : ndarray of shape (M, M)
        Hermitian PSD estimate.
    group_label : str
    L_used : int
    d_eff_claimed : int
        Group order used for the average (``d_eff`` for a regular action).
    fast_path : bool
    """

    R_hat: np.ndarray
    group_label: str
    L_used: int
    d_eff_claimed: int
    fast_path: bool = False


@dataclass
class GaatMoments:
    """Four group-averaged moments of the probe coordinate.

    ``skewness`` and ``kurtosis`` are ``None`` when the variance is zero.
    """

    mean: complex
    variance: float
    skewness: Optional[complex]
    kurtosis: Optional[complex]


def _as_snaps(snaps) -> SnapshotSet:
    return snaps if isinstance(snaps, SnapshotSet) else SnapshotSet(snaps)


def _as_rep(rep) -> Representation:
    if isinstance(rep, FiniteGroup):
        return Representation(rep)
    return rep


def group_avg_covariance(rep, snaps) -> CovEstimate:
    """Group-averaged covariance over all elements and snapshots.

    Parameters
    ----------
    rep : Representation or FiniteGroup
    snaps : SnapshotSet or array_like of shape (L, M)

    Returns
    -------
    CovEstimate
        ``R_hat = 1/(L|G|) sum_l sum_g (pi_g x_l)(pi_g x_l)^H``.
    """
    rep = _as_rep(rep)
    snaps = _as_snaps(snaps)
    if rep.degree != snaps.M:
        raise EstimatorError(f"dimension mismatch: group degree {rep.degree}, snapshot length {snaps.M}")
    Y = rep.act(snaps.data).reshape(-1, snaps.M)
    R = Y.T @ Y.conj() / Y.shape[0]
    R = 0.5 * (R + R.conj().T)
    return CovEstimate(R, rep.group.label, snaps.L, rep.group.order, False)


def sample_covariance(snaps) -> CovEstimate:
    """Classical ``(1/L) sum_l x_l x_l^H``."""
    snaps = _as_snaps(snaps)
    return group_avg_covariance(Representation(make_group("trivial", M=snaps.M)), snaps)


def _circulant_from_column(col: np.ndarray, factors: Sequence[int]) -> np.ndarray:
    # R[a, b] = col[a - b] with the difference taken per axis of the reshape.
    M = int(np.prod(factors))
    multi = np.array(np.unravel_index(np.arange(M), factors))
    diff = (multi[:, :, None] - multi[:, None, :]) % np.array(factors)[:, None, None]
    return col[np.ravel_multi_index(tuple(diff), factors)]


def fast_path_abelian(factors: Sequence[int], snaps) -> CovEstimate:
    """Group-averaged covariance for a product of cyclic groups via DFTs.

    Parameters
    ----------
    factors : sequence of int
        Cyclic factor orders; the group acts on the row-major reshape
        of ``C^M`` with ``M = prod(factors)``.
    snaps : SnapshotSet or array_like

    Returns
    -------
    CovEstimate
        Same matrix as :func:`group_avg_covariance` for the matching
        product group, with ``fast_path=True``.

    Notes
    -----
    With ``F`` the (per-axis) unitary DFT, the average equals
    ``F^H diag(p) F`` where ``p`` is the snapshot-averaged periodogram
    ``|F x|^2``. The result commutes with every shift, so its first
    column determines it.
    """
    snaps = _as_snaps(snaps)
    factors = tuple(int(n) for n in factors)
    M = int(np.prod(factors))
    if M != snaps.M:
        raise EstimatorError(f"factor mismatch: prod{factors} = {M} but M = {snaps.M}")
    X = snaps.data.reshape((snaps.L,) + factors)
    for ax in range(len(factors)):
        X = dft_axis(X, ax + 1)
    p = np.mean(np.abs(X) ** 2, axis=0)
    c = p.astype(complex)
    for ax in range(len(factors)):
        c = dft_axis(c, ax, inverse=True)
    col = c.ravel() / np.sqrt(M)
    R = _circulant_from_column(col, factors)
    R = 0.5 * (R + R.conj().T)
    label = "x".join(f"Z_{n}" for n in factors)
    return CovEstimate(R, label, snaps.L, M, True)


def abelian_spectrum(factors: Sequence[int], snaps) -> np.ndarray:
    """Eigenvalues of the product-group average, indexed by character.

    The snapshot-averaged periodogram of the per-axis DFT, flattened
    row-major. Same spectrum as :func:`fast_path_abelian` without forming
    the ``M x M`` matrix.
    """
    snaps = _as_snaps(snaps)
    factors = tuple(int(n) for n in factors)
    if int(np.prod(factors)) != snaps.M:
        raise EstimatorError(f"factor mismatch: prod{factors} != M = {snaps.M}")
    X = snaps.data.reshape((snaps.L,) + factors)
    for ax in range(len(factors)):
        X = dft_axis(X, ax + 1)
    return np.mean(np.abs(X) ** 2, axis=0).ravel()


def reynolds_project(rep, R, exact: bool = False) -> np.ndarray:
    """Project ``R`` onto the commutant: ``(1/|G|) sum_g pi_g R pi_g^H``.

    With ``exact`` the terms of each entry are sorted before summation, so
    entries related by the group receive bit-identical values and the
    result commutes with every ``pi_g`` exactly in floating point.
    """
    rep = _as_rep(rep)
    R = np.asarray(getattr(R, "entries", R), dtype=complex)
    if R.shape != (rep.degree, rep.degree):
        raise EstimatorError(f"matrix shape {R.shape} does not match degree {rep.degree}")
    if rep.kind == "conjugated":
        d = rep.conjugator
        R = np.conj(d)[:, None] * R * d[None, :]
    inv = np.argsort(rep.group.maps, axis=1)
    stack = R[inv[:, :, None], inv[:, None, :]]
    out = np.sort(stack, axis=0).sum(axis=0) / stack.shape[0] if exact else stack.mean(axis=0)
    if rep.kind == "conjugated":
        out = d[:, None] * out * np.conj(d)[None, :]
    return 0.5 * (out + out.conj().T)


def gaat_moments(rep, x) -> GaatMoments:
    """Mean, variance, skewness and kurtosis of ``[pi_g x]_0`` over ``G``.

    Population (``1/|G|``) normalization throughout. Skewness and
    kurtosis are standardized by ``sigma_G`` and are not excess values.
    For complex data the variance is ``mean |z - mu|^2``.
    """
    rep = _as_rep(rep)
    x = np.asarray(x)
    if x.shape != (rep.degree,):
        raise EstimatorError(f"vector length {x.shape} does not match degree {rep.degree}")
    z = rep.act(x)[:, 0]
    if np.isrealobj(x):
        z = z.real
    mu = z.mean()
    dz = z - mu
    var = float(np.mean(np.abs(dz) ** 2))
    scale = max(1.0, float(np.max(np.abs(z))))
    if var <= (1e-14 * scale) ** 2:
        return GaatMoments(mu, var, None, None)
    s = np.sqrt(var)
    return GaatMoments(mu, var, np.mean((dz / s) ** 3), np.mean((dz / s) ** 4))


def single_snapshot_estimates(rep, snaps, normalize: bool = True) -> np.ndarray:
    """Stack of per-snapshot group-averaged estimates, shape ``(L, M, M)``.

    With ``normalize`` each estimate is scaled to unit trace.
    """
    rep = _as_rep(rep)
    snaps = _as_snaps(snaps)
    Y = rep.act(snaps.data)  # (|G|, L, M)
    R = np.einsum("gli,glj->lij", Y, Y.conj()) / Y.shape[0]
    if normalize:
        tr = np.einsum("lii->l", R).real
        if np.any(tr <= 0):
            raise EstimatorError("zero-energy snapshot cannot be trace-normalized")
        R = R / tr[:, None, None]
    return R
