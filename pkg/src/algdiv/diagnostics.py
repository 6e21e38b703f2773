"""Diagnostic quantities for covariance structure and group matching.

Scalar summaries of a covariance ``R`` (coloring index, spectral
concentration, information capacity, structural entropy, participation
ratio), commutator residuals against a group or a Lie-algebra element,
the cross-validation score ``D_CV``, trajectories of the capacity with
snapshot count, log-log power-law fits, and an uncertainty-type check
for pairs of Hermitian observables.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .estimators import _as_rep, _as_snaps, group_avg_covariance, single_snapshot_estimates
from .linalg import hermitian_eig

__all__ = [
    "DiagnosticsError",
    "DiagnosticsRecord",
    "PowerLawFit",
    "ConjugateCheck",
    "diagnostics_record",
    "kappa",
    "psi",
    "delta_discrete",
    "delta_continuous",
    "dcv",
    "kappa_trajectory",
    "power_law_fit",
    "conjugate_capacity_check",
]

ZERO_EIG_TOL = 1e-14


class DiagnosticsError(ValueError):
    """Invalid input to a diagnostic."""


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Structure summary of a PSD matrix.

    Attributes
    ----------
    alpha : float
        ``||R - qI||_F / ||R||_F`` with ``q = Tr R / M``.
    psi : float
        ``lambda_max / Tr R``.
    kappa : float
        ``1 + (Tr R)^2 / ||R||_F^2``.
    h_struct : float
        Shannon entropy in bits of ``lambda / Tr R``.
    r_eff : float
        Participation ratio ``(Tr R)^2 / ||R||_F^2``, equal to ``kappa - 1``.
    """

    alpha: float
    psi: float
    kappa: float
    h_struct: float
    r_eff: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class PowerLawFit:
    """Least-squares fit of ``sigma = c / SNR^beta`` in log-log space."""

    c: float
    beta: float
    r2: float
    snr_units: str = "amplitude"


@dataclass(frozen=True)
class ConjugateCheck:
    """Outcome of :func:`conjugate_capacity_check`.

    ``status`` is one of ``"ok"``, ``"zero_variance"`` or
    ``"infinite_bound"``; ``holds`` is ``None`` when the check is skipped.
    """

    kappa_a: float
    kappa_b: float
    bound: float
    holds: Optional[bool]
    status: str
    c: float = 0.0


def _mat(R) -> np.ndarray:
    R = np.asarray(getattr(R, "entries", R), dtype=complex)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise DiagnosticsError(f"expected a square matrix, got shape {R.shape}")
    return R


def kappa(R) -> float:
    """Information capacity ``1 + (Tr R)^2 / ||R||_F^2``."""
    R = _mat(R)
    f2 = np.linalg.norm(R) ** 2
    if f2 == 0:
        raise DiagnosticsError("zero matrix has no capacity")
    return 1.0 + float(np.trace(R).real) ** 2 / f2


def psi(R) -> float:
    """Spectral concentration ``lambda_max / Tr R``."""
    R = _mat(R)
    tr = float(np.trace(R).real)
    if tr <= 0:
        raise DiagnosticsError("trace must be positive")
    return float(hermitian_eig(R).eigenvalues[0]) / tr


def diagnostics_record(R) -> DiagnosticsRecord:
    """Compute alpha, psi, kappa, h_struct and r_eff for a PSD matrix.

    Raises
    ------
    DiagnosticsError
        If the trace is not positive.
    """
    R = _mat(R)
    M = R.shape[0]
    tr = float(np.trace(R).real)
    if tr <= 0:
        raise DiagnosticsError("diagnostics need a PSD matrix with positive trace")
    fro = float(np.linalg.norm(R))
    lam = hermitian_eig(R).eigenvalues
    alpha = float(np.linalg.norm(R - (tr / M) * np.eye(M)) / fro)
    r_eff = tr * tr / (fro * fro)
    p = np.where(lam > ZERO_EIG_TOL * tr, lam, 0.0) / tr
    nz = p[p > 0]
    h = float(-np.sum(nz * np.log2(nz)))
    return DiagnosticsRecord(alpha, float(lam[0]) / tr, 1.0 + r_eff, max(h, 0.0) + 0.0, r_eff)


def _normalized_residuals(rep, R: np.ndarray) -> np.ndarray:
    # ||pi_g R - R pi_g||_F = ||pi_g R pi_g^H - R||_F for unitary pi_g
    if rep.kind == "conjugated":
        d = rep.conjugator
        R = np.conj(d)[:, None] * R * d[None, :]
    inv = np.argsort(rep.group.maps, axis=1)
    conj = R[inv[:, :, None], inv[:, None, :]]
    return np.linalg.norm(conj - R[None], axis=(1, 2))


def delta_discrete(rep, R) -> float:
    """``max_g ||pi_g R - R pi_g||_F / ||R||_F``."""
    rep = _as_rep(rep)
    R = _mat(R)
    if R.shape[0] != rep.degree:
        raise DiagnosticsError(f"matrix dimension {R.shape[0]} != degree {rep.degree}")
    nrm = np.linalg.norm(R)
    if nrm == 0:
        raise DiagnosticsError("zero matrix")
    return float(_normalized_residuals(rep, R).max() / nrm)


def delta_continuous(A, R) -> float:
    """``||[A, R]||_F / (||A||_F ||R||_F)`` for skew-Hermitian ``A``."""
    A = _mat(A)
    R = _mat(R)
    na, nr = np.linalg.norm(A), np.linalg.norm(R)
    if na == 0 or nr == 0:
        raise DiagnosticsError("both arguments must be nonzero")
    if np.linalg.norm(A + A.conj().T) > 1e-10 * na:
        raise DiagnosticsError("A must be skew-Hermitian")
    return float(np.linalg.norm(A @ R - R @ A) / (na * nr))


def dcv(rep, snaps) -> float:
    """Cross-validation distance between single-snapshot estimates.

    Mean over unordered pairs ``(l, l')`` of
    ``||R_G^(l) - R_G^(l')||_F^2``, each estimate trace-normalized.

    Raises
    ------
    DiagnosticsError
        If fewer than two snapshots are given.
    """
    snaps = _as_snaps(snaps)
    if snaps.L < 2:
        raise DiagnosticsError("cross-validation requires at least two snapshots")
    Rs = single_snapshot_estimates(_as_rep(rep), snaps, normalize=True)
    L = snaps.L
    # sum_{a<b} ||R_a - R_b||^2 = L sum_l ||R_l||^2 - ||sum_l R_l||^2
    total = L * float(np.sum(np.abs(Rs) ** 2)) - float(np.linalg.norm(Rs.sum(axis=0)) ** 2)
    return max(total, 0.0) / (L * (L - 1) / 2)


def kappa_trajectory(rep, snaps, Lmax: int) -> List[float]:
    """``kappa`` of the estimate built from the first ``l`` snapshots, ``l = 1..Lmax``."""
    snaps = _as_snaps(snaps)
    if Lmax < 1 or snaps.L < Lmax:
        raise DiagnosticsError(f"need at least Lmax={Lmax} snapshots, have {snaps.L}")
    rep = _as_rep(rep)
    return [kappa(group_avg_covariance(rep, snaps.head(l)).R_hat) for l in range(1, Lmax + 1)]


def power_law_fit(snr_db: Sequence[float], sigma: Sequence[float], snr_units: str = "amplitude") -> PowerLawFit:
    """Fit ``sigma ~ c / SNR^beta``.

    Parameters
    ----------
    snr_db : sequence of float
    sigma : sequence of float
        Positive spreads, one per SNR point; at least four points.
    snr_units : {"amplitude", "power"}
        Linear SNR is ``10^(dB/20)`` for amplitude and ``10^(dB/10)`` for power.
    """
    s = np.asarray(sigma, dtype=float)
    db = np.asarray(snr_db, dtype=float)
    if s.size < 4 or s.size != db.size:
        raise DiagnosticsError("power-law fit needs at least four (SNR, sigma) pairs")
    if np.any(s <= 0):
        raise DiagnosticsError("sigma values must be positive")
    div = {"amplitude": 20.0, "power": 10.0}[snr_units]
    lx = np.log(10.0 ** (db / div))
    ly = np.log(s)
    A = np.column_stack([np.ones_like(lx), lx])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return PowerLawFit(float(np.exp(coef[0])), float(-coef[1]), r2, snr_units)


def conjugate_capacity_check(A, B, x) -> ConjugateCheck:
    """Check ``kappa_A kappa_B <= 4 / |c + x^H C x|^2``.

    ``kappa_A = 1 / Var_x(A)`` with ``Var_x(A) = x^H A^2 x - (x^H A x)^2``.
    The commutator is split as ``[A, B] = i c I + i C`` with
    ``c = Im(Tr[A, B]) / M`` and ``C`` Hermitian.

    Notes
    -----
    For Hermitian ``A, B`` the trace of ``[A, B]`` vanishes, so ``c = 0``
    and the bound reduces to the Robertson relation.
    """
    A = _mat(A)
    B = _mat(B)
    x = np.asarray(x, dtype=complex)
    if abs(np.linalg.norm(x) - 1.0) > 1e-12:
        raise DiagnosticsError("x must be a unit vector")
    for name, H in (("A", A), ("B", B)):
        if np.linalg.norm(H - H.conj().T) > 1e-10 * max(np.linalg.norm(H), 1e-300):
            raise DiagnosticsError(f"{name} must be Hermitian")
    M = A.shape[0]
    K = A @ B - B @ A
    c = float(np.imag(np.trace(K))) / M
    C = -1j * (K - 1j * c * np.eye(M))
    C = 0.5 * (C + C.conj().T)

    def var(H):
        m = np.vdot(x, H @ x).real
        return float(np.vdot(x, H @ (H @ x)).real - m * m)

    va, vb = var(A), var(B)
    ka = np.inf if va <= 1e-15 else 1.0 / va
    kb = np.inf if vb <= 1e-15 else 1.0 / vb
    denom = abs(c + np.vdot(x, C @ x).real) ** 2
    bound = np.inf if denom <= 1e-30 else 4.0 / denom
    if not (np.isfinite(ka) and np.isfinite(kb)):
        return ConjugateCheck(ka, kb, bound, None, "zero_variance", c)
    if not np.isfinite(bound):
        return ConjugateCheck(ka, kb, bound, True, "infinite_bound", c)
    return ConjugateCheck(ka, kb, bound, bool(ka * kb <= bound * (1 + 1e-9)), "ok", c)
