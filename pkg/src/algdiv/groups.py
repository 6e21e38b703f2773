"""Finite permutation groups and their unitary representations.

Groups are stored concretely as a list of permutations of
``{0, ..., M-1}`` with the identity first. A :class:`Representation`
turns each element into an ``M x M`` unitary, either the bare
permutation matrix or a diagonal conjugate ``D P D^{-1}``.

Conventions
-----------
A permutation ``g`` is stored as ``map`` with ``map[k]`` the image of
``k``. Its matrix satisfies ``P_g e_k = e_{map[k]}``, so that
``(P_g x)[map[k]] = x[k]`` and ``P_{gh} = P_g P_h`` where ``gh`` means
"apply ``h`` first".
"""

from __future__ import annotations

import itertools
import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "DEFAULT_CAP",
    "GroupError",
    "Permutation",
    "FiniteGroup",
    "Representation",
    "Abelianization",
    "make_group",
    "parse_group_spec",
    "group_from_generators",
    "symmetric_group",
    "enumerate_abelian_groups",
    "orbit",
    "effective_group_order",
    "is_subgroup",
    "abelianization",
]

DEFAULT_CAP = 5040
DEFF_TOL = 1e-9


class GroupError(ValueError):
    """Invalid group construction or use."""


@dataclass(frozen=True)
class Permutation:
    """Bijection of ``{0, ..., M-1}``; ``map[k]`` is the image of ``k``."""

    map: Tuple[int, ...]

    def __post_init__(self):
        m = tuple(int(v) for v in self.map)
        if sorted(m) != list(range(len(m))):
            raise GroupError(f"not a bijection: {m}")
        object.__setattr__(self, "map", m)

    @classmethod
    def identity(cls, M: int) -> "Permutation":
        return cls(tuple(range(M)))

    @classmethod
    def from_cycles(cls, M: int, cycles: Sequence[Sequence[int]]) -> "Permutation":
        m = list(range(M))
        seen = set()
        for cyc in cycles:
            for a in cyc:
                if not 0 <= a < M or a in seen:
                    raise GroupError(f"bad cycle {tuple(cyc)} for degree {M}")
                seen.add(a)
            for a, b in zip(cyc, list(cyc[1:]) + [cyc[0]]):
                m[a] = b
        return cls(tuple(m))

    @property
    def degree(self) -> int:
        return len(self.map)

    def __mul__(self, other: "Permutation") -> "Permutation":
        # (self * other)(k) = self(other(k))
        return Permutation(tuple(self.map[j] for j in other.map))

    def inverse(self) -> "Permutation":
        inv = [0] * len(self.map)
        for k, v in enumerate(self.map):
            inv[v] = k
        return Permutation(tuple(inv))

    def is_identity(self) -> bool:
        return all(k == v for k, v in enumerate(self.map))

    def matrix(self) -> np.ndarray:
        M = len(self.map)
        P = np.zeros((M, M))
        P[list(self.map), list(range(M))] = 1.0
        return P

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        y = np.empty_like(x)
        y[..., list(self.map)] = x
        return y

    def cycles(self) -> List[Tuple[int, ...]]:
        seen, out = set(), []
        for s in range(len(self.map)):
            if s in seen:
                continue
            cyc, k = [], s
            while k not in seen:
                seen.add(k)
                cyc.append(k)
                k = self.map[k]
            out.append(tuple(cyc))
        return out

    def cycle_type(self) -> Tuple[int, ...]:
        return tuple(sorted((len(c) for c in self.cycles()), reverse=True))

    def order(self) -> int:
        return int(np.lcm.reduce([len(c) for c in self.cycles()]))

    def __str__(self) -> str:
        cyc = [c for c in self.cycles() if len(c) > 1]
        return "".join("(" + " ".join(map(str, c)) + ")" for c in cyc) or "e"


@dataclass(frozen=True)
class FiniteGroup:
    """Concrete permutation group.

    Attributes
    ----------
    degree : int
        Number of points ``M``.
    elements : tuple of Permutation
        All elements, identity first, no duplicates.
    generators : tuple of Permutation
    label : str
    """

    degree: int
    elements: Tuple[Permutation, ...]
    generators: Tuple[Permutation, ...] = ()
    label: str = "group"

    def __post_init__(self):
        els = tuple(self.elements)
        if not els or not els[0].is_identity():
            raise GroupError("identity must be the first element")
        if any(g.degree != self.degree for g in els):
            raise GroupError("element degree mismatch")
        if len(set(g.map for g in els)) != len(els):
            raise GroupError("duplicate elements")
        object.__setattr__(self, "elements", els)
        object.__setattr__(self, "generators", tuple(self.generators))

    @property
    def order(self) -> int:
        return len(self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __contains__(self, g: Permutation) -> bool:
        return g.map in self._index

    @cached_property
    def _index(self) -> Dict[Tuple[int, ...], int]:
        return {g.map: i for i, g in enumerate(self.elements)}

    @cached_property
    def maps(self) -> np.ndarray:
        """Element maps stacked as an int array of shape ``(|G|, M)``."""
        return np.array([g.map for g in self.elements], dtype=int).reshape(self.order, self.degree)

    def index(self, g: Permutation) -> int:
        return self._index[g.map]

    def is_abelian(self) -> bool:
        gens = self.generators or self.elements
        return all((a * b).map == (b * a).map for a in gens for b in gens)

    def check_closure(self) -> bool:
        """Exhaustive closure, identity and inverse check (O(|G|^2))."""
        idx = self._index
        for a in self.elements:
            if a.inverse().map not in idx:
                return False
            for b in self.elements:
                if (a * b).map not in idx:
                    return False
        return True


@dataclass(frozen=True)
class Representation:
    """Unitary representation ``g -> D P_g D^{-1}`` on ``C^M``.

    Parameters
    ----------
    group : FiniteGroup
    kind : {"permutation", "conjugated"}
    conjugator : ndarray, optional
        Unit-modulus diagonal of ``D``; required when ``kind="conjugated"``.
    """

    group: FiniteGroup
    kind: str = "permutation"
    conjugator: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("permutation", "conjugated"):
            raise GroupError(f"unknown representation kind {self.kind!r}")
        if self.kind == "conjugated":
            if self.conjugator is None:
                raise GroupError("conjugated representation needs a conjugator")
            d = np.asarray(self.conjugator, dtype=complex)
            if d.shape != (self.group.degree,) or not np.allclose(np.abs(d), 1.0, atol=1e-12):
                raise GroupError("conjugator must be a unit-modulus vector of length M")
            object.__setattr__(self, "conjugator", d)

    @property
    def degree(self) -> int:
        return self.group.degree

    def matrix(self, g: Permutation) -> np.ndarray:
        P = g.matrix().astype(complex)
        if self.kind == "conjugated":
            d = self.conjugator
            P = (d[:, None] * P) * np.conj(d)[None, :]
        return P

    def matrices(self) -> np.ndarray:
        """All represented matrices, shape ``(|G|, M, M)``."""
        G, M = self.group.order, self.degree
        out = np.zeros((G, M, M), dtype=complex)
        maps = self.group.maps
        rows = maps
        cols = np.broadcast_to(np.arange(M), (G, M))
        out[np.arange(G)[:, None], rows, cols] = 1.0
        if self.kind == "conjugated":
            d = self.conjugator
            out = d[None, :, None] * out * np.conj(d)[None, None, :]
        return out

    def act(self, x: np.ndarray) -> np.ndarray:
        """Apply every element to ``x`` (shape ``(..., M)``).

        Returns an array of shape ``(|G|, ..., M)``.
        """
        x = np.asarray(x, dtype=complex)
        if x.shape[-1] != self.degree:
            raise GroupError(f"vector length {x.shape[-1]} != degree {self.degree}")
        if self.kind == "conjugated":
            x = x * np.conj(self.conjugator)
        inv = np.argsort(self.group.maps, axis=1)
        out = np.stack([x[..., inv[i]] for i in range(self.group.order)])
        if self.kind == "conjugated":
            out = out * self.conjugator
        return out


@dataclass(frozen=True)
class Abelianization:
    """Commutator subgroup with quotient metadata.

    Attributes
    ----------
    commutator_subgroup : FiniteGroup
        ``[G, G]`` realized on the same degree.
    quotient_order : int
        ``|G| / |[G, G]|``.
    coset_representatives : tuple of Permutation
        One representative per left coset ``g [G, G]``.
    """

    commutator_subgroup: FiniteGroup
    quotient_order: int
    coset_representatives: Tuple[Permutation, ...] = field(default_factory=tuple)


def group_from_generators(degree: int, gens: Iterable[Permutation], cap: int = DEFAULT_CAP,
                          label: str = "gen-closure") -> FiniteGroup:
    """Breadth-first closure of a generating set.

    Elements appear in BFS discovery order starting from the identity,
    right-multiplying by each generator in turn.

    Raises
    ------
    GroupError
        If the closure grows beyond ``cap`` elements.
    """
    gens = [g if isinstance(g, Permutation) else Permutation(tuple(g)) for g in gens]
    for g in gens:
        if g.degree != degree:
            raise GroupError(f"generator degree {g.degree} != {degree}")
    e = tuple(range(degree))
    gmaps = [g.map for g in gens]
    seen = {e: 0}
    order = [e]
    queue = deque([e])
    while queue:
        a = queue.popleft()
        for s in gmaps:
            b = tuple(a[j] for j in s)
            if b not in seen:
                seen[b] = len(order)
                order.append(b)
                if len(order) > cap:
                    raise GroupError(f"group order cap exceeded: more than {cap} elements "
                                     f"({len(order)} found so far)")
                queue.append(b)
    return FiniteGroup(degree, tuple(Permutation(m) for m in order), tuple(gens), label)


def _shift(M: int, s: int) -> Permutation:
    return Permutation(tuple((k + s) % M for k in range(M)))


def _product_group(factors: Sequence[int], label: Optional[str] = None) -> FiniteGroup:
    factors = tuple(int(n) for n in factors)
    if any(n < 1 for n in factors):
        raise GroupError("factor orders must be positive")
    M = int(np.prod(factors))
    idx = np.arange(M).reshape(factors)
    elements = []
    for shifts in itertools.product(*(range(n) for n in factors)):
        moved = idx
        for ax, s in enumerate(shifts):
            moved = np.roll(moved, s, axis=ax)
        # moved[j] = source index that lands on j
        m = np.empty(M, dtype=int)
        m[moved.ravel()] = np.arange(M)
        elements.append(Permutation(tuple(m)))
    gens = []
    for ax in range(len(factors)):
        if factors[ax] > 1:
            unit = [0] * len(factors)
            unit[ax] = 1
            gens.append(elements[int(np.ravel_multi_index(unit, factors))])
    lab = label or "x".join(f"Z_{n}" for n in factors)
    return FiniteGroup(M, tuple(elements), tuple(gens), lab)


def make_group(kind: str, M: Optional[int] = None, factors: Optional[Sequence[int]] = None,
               k: Optional[int] = None) -> FiniteGroup:
    """Build one of the standard groups.

    Parameters
    ----------
    kind : {"cyclic", "dihedral", "product", "elementary2", "trivial", "symmetric"}
    M : int, optional
        Degree. Required except for ``product`` (inferred from ``factors``)
        and ``elementary2`` given ``k``.
    factors : sequence of int, optional
        Cyclic factor orders of a product group, acting on the row-major
        reshape of ``C^M`` with factor ``i`` shifting axis ``i``.
    k : int, optional
        Exponent for ``elementary2`` (order ``2^k``).

    Raises
    ------
    GroupError
        If product factors do not multiply to ``M`` or parameters are missing.
    """
    if kind == "cyclic":
        if M is None or M < 1:
            raise GroupError("cyclic group needs M >= 1")
        els = tuple(_shift(M, s) for s in range(M))
        return FiniteGroup(M, els, (els[1 % M],) if M > 1 else (), f"Z_{M}")
    if kind == "dihedral":
        if M is None or M < 1:
            raise GroupError("dihedral group needs M >= 1")
        els = [_shift(M, s) for s in range(M)]
        els += [Permutation(tuple((s - j) % M for j in range(M))) for s in range(M)]
        uniq = list(dict((g.map, g) for g in els).values())
        return FiniteGroup(M, tuple(uniq), (els[1 % M], els[M]), f"D_{M}")
    if kind == "product":
        if not factors:
            raise GroupError("product group needs a factor list")
        total = int(np.prod(factors))
        if M is not None and total != M:
            raise GroupError(f"dimension error: factors {tuple(factors)} multiply to {total}, not M={M}")
        return _product_group(factors)
    if kind == "elementary2":
        if k is None:
            if M is None or M < 1 or M & (M - 1):
                raise GroupError(f"elementary2 needs M = 2^k, got {M}")
            k = M.bit_length() - 1
        elif M is not None and M != 2 ** k:
            raise GroupError(f"dimension error: 2^{k} != M={M}")
        if k == 0:
            return make_group("trivial", M=1)
        return _product_group((2,) * k, label=f"Z_2^{k}")
    if kind == "trivial":
        if M is None or M < 1:
            raise GroupError("trivial group needs M >= 1")
        return FiniteGroup(M, (Permutation.identity(M),), (), "trivial")
    if kind == "symmetric":
        return symmetric_group(M)
    raise GroupError(f"unknown group kind {kind!r}")


def symmetric_group(M: int, cap: int = DEFAULT_CAP) -> FiniteGroup:
    """``S_M`` from a transposition and an M-cycle."""
    if M == 1:
        return make_group("trivial", M=1)
    gens = [Permutation.from_cycles(M, [(0, 1)]), _shift(M, 1)]
    g = group_from_generators(M, gens, cap)
    return FiniteGroup(M, g.elements, g.generators, f"S_{M}")


_CYC_RE = re.compile(r"\(([^()]*)\)")


def parse_group_spec(spec: str, M: Optional[int] = None, cap: int = DEFAULT_CAP) -> FiniteGroup:
    """Parse a compact group string.

    Accepted forms: ``"Z8"``, ``"D6"``, ``"S4"``, ``"Z4xZ2"``, ``"E2^3"``,
    ``"trivial"`` and ``"gen:(0 1 2)(3 4);(0 3)"`` (generators separated
    by ``;``, each in cycle notation). ``M`` is required for ``trivial``
    and ``gen:`` and is cross-checked otherwise.
    """
    s = spec.strip()
    g: FiniteGroup
    if s.lower() == "trivial":
        if M is None:
            raise GroupError("'trivial' needs an explicit dimension M")
        g = make_group("trivial", M=M)
    elif s.lower().startswith("gen:"):
        if M is None:
            raise GroupError("'gen:' needs an explicit dimension M")
        gens = []
        for part in s[4:].split(";"):
            cycles = [[int(t) for t in c.split()] for c in _CYC_RE.findall(part)]
            if not cycles:
                raise GroupError(f"no cycles in generator {part!r}")
            gens.append(Permutation.from_cycles(M, cycles))
        g = group_from_generators(M, gens, cap)
    elif m := re.fullmatch(r"E2\^(\d+)", s):
        g = make_group("elementary2", k=int(m.group(1)))
    elif re.fullmatch(r"Z\d+(xZ\d+)+", s):
        g = make_group("product", factors=[int(t) for t in re.findall(r"\d+", s)])
    elif m := re.fullmatch(r"([ZDS])(\d+)", s):
        kind = {"Z": "cyclic", "D": "dihedral", "S": "symmetric"}[m.group(1)]
        g = make_group(kind, M=int(m.group(2)))
    else:
        raise GroupError(f"unrecognized group spec {spec!r}")
    if M is not None and g.degree != M:
        raise GroupError(f"group {spec!r} has degree {g.degree}, expected M={M}")
    return g


def _prime_factors(n: int) -> Dict[int, int]:
    out: Dict[int, int] = {}
    p = 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def _partitions(n: int, largest: Optional[int] = None) -> List[Tuple[int, ...]]:
    largest = n if largest is None else largest
    if n == 0:
        return [()]
    out = []
    for first in range(min(n, largest), 0, -1):
        out += [(first,) + rest for rest in _partitions(n - first, first)]
    return out


def enumerate_abelian_groups(M: int) -> List[FiniteGroup]:
    """One product group per isomorphism class of Abelian groups of order ``M``.

    Factors are the elementary divisors ``p^a``, primes ascending and
    exponents descending within a prime. The list is sorted by
    descending largest cyclic factor (ties by the descending-sorted
    factor tuple).
    """
    if M < 2:
        raise GroupError("M must be at least 2")
    pf = sorted(_prime_factors(M).items())
    per_prime = [[tuple(p ** a for a in part) for part in _partitions(e)] for p, e in pf]
    choices = [tuple(itertools.chain.from_iterable(c)) for c in itertools.product(*per_prime)]
    choices.sort(key=lambda f: tuple(sorted(f, reverse=True)), reverse=True)
    return [_product_group(f) for f in choices]


def orbit(rep: Representation, x) -> List[np.ndarray]:
    """``[pi_g x for g in G]`` in group-element order."""
    return list(rep.act(np.asarray(x, dtype=complex)))


def _statistic_rows(orb: np.ndarray, statistic: str) -> np.ndarray:
    if statistic == "outer_product":
        return np.einsum("gi,gj->gij", orb, orb.conj()).reshape(len(orb), -1)
    if statistic == "component0":
        return orb[:, :1]
    if statistic == "squared_norm":
        return np.sum(np.abs(orb) ** 2, axis=1, keepdims=True).astype(complex)
    raise GroupError(f"unknown statistic {statistic!r}")


def effective_group_order(rep: Representation, statistic: str, x, tol: float = DEFF_TOL) -> int:
    """Numeric dimension of the span of a statistic over the orbit of ``x``.

    Parameters
    ----------
    rep : Representation
    statistic : {"outer_product", "component0", "squared_norm"} or callable
        A callable receives one orbit vector and returns an array.
    x : array_like
        Generic vector (the caller's responsibility).
    tol : float
        Singular values below ``tol * s_max`` count as zero.
    """
    orb = rep.act(np.asarray(x, dtype=complex))
    if callable(statistic):
        rows = np.array([np.ravel(statistic(v)) for v in orb], dtype=complex)
    else:
        rows = _statistic_rows(orb, statistic)
    s = np.linalg.svd(rows, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def is_subgroup(H: FiniteGroup, G: FiniteGroup) -> bool:
    """True iff every element of ``H`` is an element of ``G``."""
    if H.degree != G.degree:
        raise GroupError(f"degree mismatch {H.degree} vs {G.degree}")
    return all(h in G for h in H.elements)


def abelianization(G: FiniteGroup, cap: int = DEFAULT_CAP) -> Abelianization:
    """Commutator subgroup ``[G, G]`` and the order of ``G / [G, G]``."""
    comms = {}
    for a in G.elements:
        ai = a.inverse()
        for b in G.elements:
            c = a * b * ai * b.inverse()
            comms[c.map] = c
    H = group_from_generators(G.degree, list(comms.values()), cap, label=f"[{G.label},{G.label}]")
    reps, covered = [], set()
    for g in G.elements:
        if g.map in covered:
            continue
        reps.append(g)
        covered.update((g * h).map for h in H.elements)
    return Abelianization(H, G.order // H.order, tuple(reps))
