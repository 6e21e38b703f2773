"""Blind group matching.

Two routes are provided. The discrete route scores a library of
candidate groups by the cross-validation distance ``D_CV`` between
single-snapshot estimates. The continuous route searches a subspace of
skew-Hermitian generators for the direction that best commutes with a
covariance (a generalized eigenvalue problem built from the double
commutator), rounds it to a permutation, and grows a subgroup one
accepted generator at a time while deflating the basis.

Generators
----------
A permutation matrix ``P`` is not skew-Hermitian. It enters the Lie
algebra through the pair ``(P - P^T)/2`` and ``i((P + P^T)/2 - sI)``
with ``s`` chosen to make the second term traceless. Rounding uses the
real part only, so directions built from symmetric lifts carry no
rounding signal; this is what limits recovery for some automorphism
groups (for instance the reflections of a cycle graph).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .diagnostics import dcv, diagnostics_record, kappa, kappa_trajectory, psi
from .estimators import SnapshotSet, _as_snaps, group_avg_covariance, sample_covariance
from .groups import (
    FiniteGroup,
    Permutation,
    Representation,
    enumerate_abelian_groups,
    group_from_generators,
    make_group,
)
from .linalg import assignment_max, assignment_max_excluding, hermitian_eig, solve_gevp
from .signals import chirp_diagonal

__all__ = [
    "MatchingError",
    "GeneratorBasis",
    "SeqGevpIteration",
    "SeqGevpTrace",
    "MatchReport",
    "skew_lift",
    "natural_basis",
    "basis_from_permutations",
    "solve_min_direction",
    "perm_residual",
    "perm_residual_eigdiff",
    "round_to_permutation",
    "deflate",
    "sequential_gevp",
    "library_match",
    "library_match_dcv",
    "library_match_psi",
    "param_sweep",
    "pipeline",
]

DROP_TOL = 1e-10
TAU_NOISELESS = 1e-8
TAU_SAMPLE = 0.05


class MatchingError(ValueError):
    """Invalid matching input."""


@dataclass
class GeneratorBasis:
    """Skew-Hermitian matrices spanning a search subspace of u(M)."""

    degree: int
    mats: List[np.ndarray]
    labels: List[str] = field(default_factory=list)

    def __post_init__(self):
        if len(self.labels) < len(self.mats):
            self.labels = list(self.labels) + [f"B{k}" for k in range(len(self.labels), len(self.mats))]
        for B in self.mats:
            if B.shape != (self.degree, self.degree):
                raise MatchingError("basis element has wrong shape")
            if np.linalg.norm(B + B.conj().T) > 1e-10 * max(np.linalg.norm(B), 1e-300):
                raise MatchingError("basis elements must be skew-Hermitian")

    def __len__(self) -> int:
        return len(self.mats)

    def gram(self) -> np.ndarray:
        S = np.array(self.mats).reshape(len(self.mats), -1)
        return (S.conj() @ S.T).real


@dataclass
class SeqGevpIteration:
    lambda_min: float
    rounded_perm: Permutation
    residual: float
    accepted: bool
    group_order: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambda_min": self.lambda_min,
            "rounded_perm": str(self.rounded_perm),
            "residual": self.residual,
            "accepted": self.accepted,
            "group_order": self.group_order,
        }


@dataclass
class SeqGevpTrace:
    """Audit record of the sequential search.

    ``termination`` is ``"rejection"``, ``"basis_exhausted"`` or ``"cap"``.
    """

    iterations: List[SeqGevpIteration]
    final_group: FiniteGroup
    termination: str
    tau: float
    basis_size: int

    @property
    def accepted(self) -> List[SeqGevpIteration]:
        return [it for it in self.iterations if it.accepted]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "iterations": [it.to_dict() for it in self.iterations],
            "final_group_order": self.final_group.order,
            "final_generators": [str(g) for g in self.final_group.generators],
            "termination": self.termination,
            "tau": self.tau,
            "basis_size": self.basis_size,
        }


@dataclass
class MatchReport:
    """Outcome of library matching or of the full pipeline."""

    ranked: List[Tuple[str, float]]
    alpha_gate: float
    selected: str
    kappa_trajectory: List[float] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    trace: Optional[SeqGevpTrace] = None

    def to_dict(self) -> Dict[str, Any]:
        out = {
            "ranked": [[lab, val] for lab, val in self.ranked],
            "alpha_gate": self.alpha_gate,
            "selected": self.selected,
            "kappa_trajectory": list(self.kappa_trajectory),
            "notes": list(self.notes),
        }
        if self.trace is not None:
            out["seqgevp"] = self.trace.to_dict()
        return out


def skew_lift(P: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Skew-Hermitian pair ``(P - P^T)/2`` and ``i((P + P^T)/2 - sI)``."""
    P = np.asarray(P, dtype=float)
    M = P.shape[0]
    S = 0.5 * (P + P.T)
    return 0.5 * (P - P.T) + 0j, 1j * (S - (np.trace(S) / M) * np.eye(M))


def _independent(mats: Sequence[np.ndarray], labels: Sequence[str], tol: float = DROP_TOL):
    kept, kept_lab, ortho = [], [], []
    for B, lab in zip(mats, labels):
        nb = np.linalg.norm(B)
        if nb == 0:
            continue
        r = B.copy()
        for Q in ortho:
            r = r - np.vdot(Q, r) * Q
        nr = np.linalg.norm(r)
        if nr > tol * nb:
            kept.append(B)
            kept_lab.append(lab)
            ortho.append(r / nr)
    return kept, kept_lab


def basis_from_permutations(M: int, perms: Sequence[Permutation], names: Optional[Sequence[str]] = None) -> GeneratorBasis:
    """Lift each permutation and keep the linearly independent members in order."""
    names = list(names) if names is not None else [str(p) for p in perms]
    mats, labels = [], []
    for p, nm in zip(perms, names):
        a, s = skew_lift(p.matrix())
        mats += [a, s]
        labels += [f"skew[{nm}]", f"sym[{nm}]"]
    kept, kept_lab = _independent(mats, labels)
    if not kept:
        raise MatchingError("empty basis after dropping dependent members")
    return GeneratorBasis(M, kept, kept_lab)


def natural_basis(M: int, perms: Optional[Sequence[Permutation]] = None) -> GeneratorBasis:
    """Default basis from shift, shift^2, reflection ``k -> -k`` and reflection ``k -> 1-k``.

    Parameters
    ----------
    M : int
        Degree (at least 2). An ``(M, M)`` array is also accepted.
    perms : sequence of Permutation, optional
        Custom candidate permutations, lifted in the given order.
    """
    if isinstance(M, np.ndarray):
        M = M.shape[0]
    if M < 2:
        raise MatchingError("degree must be at least 2")
    if perms is None:
        tau = Permutation(tuple((k + 1) % M for k in range(M)))
        perms = [
            tau,
            tau * tau,
            Permutation(tuple((-k) % M for k in range(M))),
            Permutation(tuple((1 - k) % M for k in range(M))),
        ]
        names = ["tau", "tau^2", "rho", "eta"]
    else:
        names = None
    return basis_from_permutations(M, perms, names)


def solve_min_direction(R, basis: GeneratorBasis, deg_tol: float = 1e-9) -> Tuple[np.ndarray, float]:
    """Best-commuting direction in the span of ``basis``.

    Builds ``M_ij = <[R, B_i], [R, B_j]>`` and ``G_ij = <B_i, B_j>`` and
    returns ``A* = sum c_i B_i`` for the smallest generalized eigenvalue,
    scaled to unit Frobenius norm, together with that eigenvalue
    (``= ||[R, A*]||_F^2``).

    When several eigenvalues lie within ``deg_tol * ||R||_F^2 * Tr(G) / d``
    of the minimum, the eigenvector is not unique; the returned direction is the
    projection of the first basis element (in basis order) onto that
    eigenspace, so the result does not depend on solver internals.
    """
    R = np.asarray(getattr(R, "entries", R), dtype=complex)
    if len(basis) == 0:
        raise MatchingError("empty basis")
    B = np.array(basis.mats)
    C = np.einsum("ij,bjk->bik", R, B) - np.einsum("bij,jk->bik", B, R)
    Cf = C.reshape(len(B), -1)
    Bf = B.reshape(len(B), -1)
    # Both Gram matrices are real for skew-Hermitian B_i and Hermitian R.
    Mm = (Cf.conj() @ Cf.T).real
    Gm = (Bf.conj() @ Bf.T).real
    pairs = solve_gevp(Mm, Gm)
    lam0 = pairs[0][0]
    tol = deg_tol * np.linalg.norm(R) ** 2 * np.trace(Gm) / len(B)
    cluster = [c for lam, c in pairs if lam <= lam0 + tol]
    # Degenerate minimum: take the cluster direction closest to the
    # earliest basis element that has a nonzero projection onto it.
    dirs = [np.tensordot(c, B, axes=1) for c in cluster]
    A = dirs[0]
    if len(dirs) > 1:
        D = np.array(dirs).reshape(len(dirs), -1)
        for b in Bf:
            w = D.conj() @ b
            if np.linalg.norm(w) > 1e-8 * np.linalg.norm(b):
                A = np.tensordot(w, np.array(dirs), axes=1)
                break
    A = A / np.linalg.norm(A)
    return A, float(np.linalg.norm(R @ A - A @ R) ** 2)


def perm_residual(R, sigma: Permutation) -> float:
    """``||P R - R P||_F / ||R||_F``."""
    R = np.asarray(getattr(R, "entries", R), dtype=complex)
    inv = np.argsort(sigma.map)
    return float(np.linalg.norm(R[np.ix_(inv, inv)] - R) / np.linalg.norm(R))


def perm_residual_eigdiff(R, sigma: Permutation) -> Tuple[float, float]:
    """Direct squared commutator norm and its eigenvalue-difference form.

    Returns
    -------
    exact : float
        ``||P_sigma R - R P_sigma||_F^2``.
    eigdiff : float
        ``sum_{k,l} (lambda_k - lambda_l)^2 |(U^H P_sigma U)_{kl}|^2`` with
        ``R = U diag(lambda) U^H``. For diagonal ``R`` (``U = I``) this is
        ``sum_k (lambda_k - lambda_sigma(k))^2``. The two agree in exact
        arithmetic; the second is an independent numerical oracle.
    """
    R = np.asarray(getattr(R, "entries", R), dtype=complex)
    P = sigma.matrix()
    exact = float(np.linalg.norm(P @ R - R @ P) ** 2)
    if np.count_nonzero(R - np.diag(np.diag(R))) == 0:
        lam = np.diag(R).real
        s = np.array(sigma.map)
        return exact, float(np.sum((lam - lam[s]) ** 2))
    e = hermitian_eig(R)
    lam, U = e.eigenvalues, e.eigenvectors
    W = np.abs(U.conj().T @ P @ U) ** 2
    return exact, float(np.sum((lam[:, None] - lam[None, :]) ** 2 * W))


def round_to_permutation(A_star, forbid_identity: bool = True,
                         exclude: Optional[FiniteGroup] = None) -> Permutation:
    """Nearest permutation to a direction by linear assignment on ``Re(A*)``.

    The assignment places ones at ``(k, s[k])``; the returned permutation
    is the one whose matrix has exactly that pattern. With ``exclude``,
    the best permutation outside that group (and never the identity) is
    returned instead, found by ranked assignment enumeration.
    """
    A = np.asarray(A_star, dtype=complex)
    if exclude is None:
        s = assignment_max(A.real, forbid_identity=forbid_identity)
    else:
        # patterns (k, s[k]) correspond to g = s^{-1}; exclude inverses
        banned = {tuple(int(v) for v in np.argsort(g.map)) for g in exclude.elements}
        banned.add(tuple(range(A.shape[0])))
        s = assignment_max_excluding(A.real, banned)
    return Permutation(tuple(int(v) for v in np.argsort(s)))


def _group_lifts(G: FiniteGroup) -> List[np.ndarray]:
    M = G.degree
    out = [1j * np.eye(M)]
    for g in G.elements:
        out.extend(skew_lift(g.matrix()))
    return out


def deflate(basis: GeneratorBasis, G: FiniteGroup, tol: float = DROP_TOL) -> GeneratorBasis:
    """Project the basis off the lifts of every ``P_g`` and off ``iI``.

    Orthogonality to both lifts of ``P_g`` and to ``iI`` implies zero
    Frobenius inner product with ``P_g`` itself. Members whose remainder
    falls below ``tol`` times their norm are dropped.
    """
    ortho = []
    for Q in _group_lifts(G):
        r = Q.copy()
        for O in ortho:
            r = r - np.vdot(O, r) * O
        nr = np.linalg.norm(r)
        if nr > tol * max(np.linalg.norm(Q), 1e-300):
            ortho.append(r / nr)
    mats, labels = [], []
    for B, lab in zip(basis.mats, basis.labels):
        r = B.copy()
        for _ in range(2):
            for O in ortho:
                r = r - np.vdot(O, r) * O
        r = 0.5 * (r - r.conj().T)
        if np.linalg.norm(r) > tol * np.linalg.norm(B):
            mats.append(r)
            labels.append(lab)
    mats, labels = _independent(mats, labels, tol)
    return GeneratorBasis(basis.degree, mats, labels)


def sequential_gevp(R, basis: Optional[GeneratorBasis] = None, tau: float = TAU_NOISELESS,
                    cap: int = 64, group_cap: int = 5040) -> SeqGevpTrace:
    """Grow a subgroup of the automorphisms of ``R`` one generator at a time.

    Each iteration solves for the best-commuting direction in the
    current basis, rounds it to a permutation ``P*``, and accepts it if
    ``||[P*, R]||_F / ||R||_F <= tau``. On acceptance the group becomes
    ``<G, P*>`` and the basis is deflated against it.

    Parameters
    ----------
    R : array_like
    basis : GeneratorBasis, optional
        Defaults to :func:`natural_basis`.
    tau : float
        Acceptance threshold (1e-8 for exact covariances, 0.05 for sample ones).
    cap : int
        Maximum number of iterations.
    """
    if tau < 0:
        raise MatchingError("tau must be non-negative")
    R = np.asarray(getattr(R, "entries", R), dtype=complex)
    M = R.shape[0]
    basis = natural_basis(M) if basis is None else basis
    G = make_group("trivial", M=M)
    basis = deflate(basis, G)
    its: List[SeqGevpIteration] = []
    termination = "cap"
    for _ in range(cap):
        if len(basis) == 0:
            termination = "basis_exhausted"
            break
        A, lam = solve_min_direction(R, basis)
        P = round_to_permutation(A, forbid_identity=True, exclude=G)
        res = perm_residual(R, P)
        ok = res <= tau
        if ok:
            G = group_from_generators(M, list(G.generators) + [P], group_cap)
        its.append(SeqGevpIteration(lam, P, res, ok, G.order))
        if not ok:
            termination = "rejection"
            break
        basis = deflate(basis, G)
    else:
        if len(basis) == 0:
            termination = "basis_exhausted"
    return SeqGevpTrace(its, G, termination, tau, len(basis))


def _rank_with_ties(rows: List[Tuple[str, float, int]], rtol: float = 1e-12) -> List[Tuple[str, float, int]]:
    rows = sorted(rows, key=lambda r: r[1])
    out: List[Tuple[str, float, int]] = []
    i = 0
    while i < len(rows):
        j = i + 1
        while j < len(rows) and abs(rows[j][1] - rows[i][1]) <= rtol * max(1.0, abs(rows[i][1])):
            j += 1
        out += sorted(rows[i:j], key=lambda r: -r[2])
        i = j
    return out


def library_match_dcv(snaps, library: Sequence[Any]) -> MatchReport:
    """Rank candidate groups by ``D_CV``; ties go to the larger group."""
    snaps = _as_snaps(snaps)
    rows = []
    for g in library:
        rep = g if isinstance(g, Representation) else Representation(g)
        if rep.degree != snaps.M:
            raise MatchingError(f"group {rep.group.label} has degree {rep.degree}, data M={snaps.M}")
        rows.append((rep.group.label, dcv(rep, snaps), rep.group.order))
    ranked = _rank_with_ties(rows)
    return MatchReport([(lab, val) for lab, val, _ in ranked], float("nan"), ranked[0][0])


def library_match(snaps, library: Sequence[Any], tie_factor: float = 3.0) -> MatchReport:
    """``D_CV`` screen followed by a capacity refinement.

    ``D_CV`` only measures consistency: a mismatched group whose
    characters happen to separate the signal components yields a biased
    but phase-stable estimate with the same expected ``D_CV`` as the
    matched group. Candidates with ``D_CV <= tie_factor * min D_CV`` are
    therefore kept; among them the largest order wins, and within that
    order the smallest ``kappa`` (most concentrated spectrum) wins.
    Comparing ``kappa`` is only done between groups of equal order.
    """
    snaps = _as_snaps(snaps)
    reps = [g if isinstance(g, Representation) else Representation(g) for g in library]
    base = library_match_dcv(snaps, reps)
    scores = dict(base.ranked)
    dmin = min(scores.values())
    cands = [r for r in reps if scores[r.group.label] <= tie_factor * dmin + 1e-300]
    top = max(r.group.order for r in cands)
    cands = [r for r in cands if r.group.order == top]
    kap = {r.group.label: kappa(group_avg_covariance(r, snaps).R_hat) for r in cands}
    sel = min(cands, key=lambda r: (kap[r.group.label], reps.index(r))).group.label
    notes = [f"D_CV screen kept {len(kap)} of {len(reps)}; kappa " +
             ", ".join(f"{k}={v:.4g}" for k, v in kap.items())]
    return MatchReport(base.ranked, float("nan"), sel, [], notes)


def library_match_psi(snaps, library: Sequence[FiniteGroup]) -> MatchReport:
    """Rank by spectral concentration; only valid within one orbit class.

    Raises
    ------
    MatchingError
        If candidate groups differ in order: larger orbits lower the
        single-snapshot concentration regardless of fit (orbit-size bias).
    """
    snaps = _as_snaps(snaps)
    orders = {g.order for g in library}
    if len(orders) > 1:
        raise MatchingError(f"psi comparison across groups of orders {sorted(orders)} is "
                            "invalid because of orbit-size bias; use D_CV")
    rows = [(g.label, psi(group_avg_covariance(g, snaps).R_hat), g.order) for g in library]
    rows.sort(key=lambda r: -r[1])
    return MatchReport([(lab, val) for lab, val, _ in rows], float("nan"), rows[0][0])


def param_sweep(snaps, sweep: str, grid: Sequence[float], criterion: str = "dcv",
                groups: Optional[Sequence[FiniteGroup]] = None) -> Tuple[float, List[float]]:
    """Sweep a structural parameter and return the best value and the curve.

    Parameters
    ----------
    sweep : {"chirp_mu", "kaiser_beta"}
        ``chirp_mu`` conjugates the cyclic group by ``D_mu``;
        ``kaiser_beta`` windows each snapshot before cyclic averaging.
    criterion : {"psi", "dcv"}
        ``psi`` is maximized, ``dcv`` minimized.
    """
    snaps = _as_snaps(snaps)
    if not len(grid):
        raise MatchingError("empty grid")
    if criterion not in ("psi", "dcv"):
        raise MatchingError(f"unknown criterion {criterion!r}")
    if groups is not None and criterion == "psi" and len({g.order for g in groups}) > 1:
        raise MatchingError("psi across heterogeneous groups is biased by orbit size")
    M = snaps.M
    cyc = make_group("cyclic", M=M)
    curve = []
    for val in grid:
        if sweep == "chirp_mu":
            rep = Representation(cyc, "conjugated", chirp_diagonal(M, val))
            data = snaps
        elif sweep == "kaiser_beta":
            rep = Representation(cyc)
            data = SnapshotSet(snaps.data * np.kaiser(M, val), snaps.meta)
        else:
            raise MatchingError(f"unknown sweep {sweep!r}")
        if criterion == "psi":
            curve.append(psi(group_avg_covariance(rep, data).R_hat))
        else:
            curve.append(dcv(rep, data))
    best = int(np.argmax(curve)) if criterion == "psi" else int(np.argmin(curve))
    return float(grid[best]), curve


def pipeline(snaps, config: Optional[Dict[str, Any]] = None) -> MatchReport:
    """Five-stage blind matching.

    1. Whiteness gate on the sample covariance (``alpha < alpha_gate``
       selects the trivial group and stops).
    2. Continuous candidate generation on the Reynolds-free sample
       covariance via :func:`sequential_gevp`.
    3. Sequential assembly of accepted generators.
    4. :func:`library_match` over the assembled group together with a
       library (all Abelian groups of order ``M`` plus the trivial group).
    5. ``kappa`` trajectory of the selected group as verification.

    Config keys: ``alpha_gate`` (0.1), ``tau`` (0.05), ``library``
    (list of groups), ``basis`` (GeneratorBasis), ``traj_tol`` (0.15),
    ``use_seqgevp`` (True), ``tie_factor`` (3.0).
    """
    cfg = {"alpha_gate": 0.1, "tau": TAU_SAMPLE, "library": None, "basis": None,
           "traj_tol": 0.15, "use_seqgevp": True, "tie_factor": 3.0}
    cfg.update(config or {})
    snaps = _as_snaps(snaps)
    M = snaps.M
    notes: List[str] = []
    Rs = sample_covariance(snaps).R_hat
    alpha = diagnostics_record(Rs).alpha
    trivial = make_group("trivial", M=M)
    if alpha < cfg["alpha_gate"]:
        notes.append(f"alpha={alpha:.4g} below gate {cfg['alpha_gate']}: white, trivial group selected")
        return MatchReport([(trivial.label, 0.0)], alpha, trivial.label, [], notes)
    library: List[FiniteGroup] = list(cfg["library"]) if cfg["library"] is not None else []
    if not library:
        try:
            library = enumerate_abelian_groups(M) if M >= 2 else []
        except Exception as exc:  # pragma: no cover
            notes.append(f"library enumeration failed: {exc}")
        library.append(trivial)
    trace = None
    if cfg["use_seqgevp"] and M >= 2:
        try:
            trace = sequential_gevp(Rs, cfg["basis"], tau=cfg["tau"])
            notes.append(f"seqgevp: order {trace.final_group.order}, termination {trace.termination}")
            if trace.final_group.order > 1 and all(trace.final_group.elements != g.elements for g in library):
                assembled = trace.final_group
                library.append(FiniteGroup(M, assembled.elements, assembled.generators,
                                           f"seqgevp<{','.join(str(g) for g in assembled.generators)}>"))
        except Exception as exc:
            notes.append(f"seqgevp stage failed: {exc}")
    if snaps.L < 2:
        notes.append("D_CV needs L >= 2; falling back to the assembled group")
        sel = library[-1] if trace is None else trace.final_group
        return MatchReport([], alpha, sel.label, [], notes, trace)
    rep = library_match(snaps, library, cfg["tie_factor"])
    notes.extend(rep.notes)
    sel = next(g for g in library if g.label == rep.selected)
    traj: List[float] = []
    try:
        traj = kappa_trajectory(sel, snaps, min(snaps.L, 4))
        rel = abs(traj[1] - traj[0]) / traj[0] if len(traj) > 1 else 0.0
        verdict = "matched" if rel < cfg["traj_tol"] else "possibly incomplete"
        notes.append(f"kappa trajectory relative change {rel:.3g}: {verdict}")
    except Exception as exc:
        notes.append(f"kappa trajectory failed: {exc}")
    return MatchReport(rep.ranked, alpha, rep.selected, traj, notes, trace)
