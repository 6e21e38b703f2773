"""Seeded synthetic data.

Covariance models for the signal classes used throughout the package,
snapshot sampling, graph Laplacians, digital constellations and a
tapped-delay-line multipath channel.

Seeding
-------
Every generator takes an integer ``seed``. Per-trial streams are
derived with :func:`trial_rng`, which feeds ``[seed, trial]`` to
``numpy.random.SeedSequence`` so that trials are independent and
reproducible in any execution order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .estimators import SnapshotSet, reynolds_project
from .groups import FiniteGroup, make_group, symmetric_group
from .linalg import dft, hermitian_eig

__all__ = [
    "SignalError",
    "CovModel",
    "Graph",
    "ChannelModel",
    "trial_rng",
    "tone_vector",
    "chirp_diagonal",
    "build_covariance",
    "sample_snapshots",
    "cycle_graph",
    "complete_graph",
    "petersen_graph",
    "read_edge_list",
    "graph_laplacian",
    "known_automorphisms",
    "constellation_points",
    "symbol_source",
    "make_channel",
    "channel_apply",
]


class SignalError(ValueError):
    """Invalid model parameters."""


def trial_rng(seed: int, trial: int = 0) -> np.random.Generator:
    """Independent generator for ``(seed, trial)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial)]))


@dataclass
class CovModel:
    """Parametric covariance model.

    Parameters
    ----------
    kind : {"tones", "chirp", "ar", "ma", "multipath", "graph_diffusion", "white"}
    M : int
    params : dict
        tones: ``freqs`` (bins, may be fractional), ``amps``, ``noise_var``.
        chirp: as tones plus ``mu``.
        ar: ``coeffs`` (``x[n] = sum_k a_k x[n-k] + e[n]``), ``circulant``.
        ma: ``coeffs`` (``x[n] = e[n] + sum_k b_k e[n-k]``), ``circulant``.
        multipath: ``delays`` (default 0, 3, 7), ``amps`` (1, 0.6, 0.3),
        ``pulse`` template (default a length-4 Hann pulse), ``noise_var``.
        graph_diffusion: ``graph`` (:class:`Graph`), optional ``f``.
        white: ``sigma2``.
    """

    kind: str
    M: int
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("tones", "chirp", "ar", "ma", "multipath", "graph_diffusion", "white"):
            raise SignalError(f"unknown model kind {self.kind!r}")
        if self.M < 1:
            raise SignalError("M must be positive")


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on ``n`` vertices."""

    n: int
    edges: Tuple[Tuple[int, int], ...]
    name: str = "graph"

    def __post_init__(self):
        seen = set()
        for u, v in self.edges:
            if u == v:
                raise SignalError(f"self-loop at {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise SignalError(f"edge ({u}, {v}) out of range for n={self.n}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise SignalError(f"duplicate edge {key}")
            seen.add(key)
        object.__setattr__(self, "edges", tuple(sorted(seen)))

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=int)
        for u, v in self.edges:
            d[u] += 1
            d[v] += 1
        return d


@dataclass
class ChannelModel:
    """Tapped-delay-line channel with unit total power."""

    taps: np.ndarray
    decay_db_per_tap: float = 3.0
    n_taps: int = 5
    seed: Optional[int] = None

    def __post_init__(self):
        h = np.asarray(self.taps, dtype=complex)
        p = np.sum(np.abs(h) ** 2)
        if p <= 0:
            raise SignalError("channel has zero power")
        self.taps = h / np.sqrt(p)
        self.n_taps = h.size


def tone_vector(M: int, f: float) -> np.ndarray:
    """``v[n] = exp(2 pi i f n / M)``."""
    return np.exp(2j * np.pi * f * np.arange(M) / M)


def chirp_diagonal(M: int, mu: float) -> np.ndarray:
    """Diagonal of ``D_mu = diag(exp(-i pi mu n^2 / M))``."""
    n = np.arange(M)
    return np.exp(-1j * np.pi * mu * n * n / M)


def _ar_check(coeffs: Sequence[float]) -> np.ndarray:
    a = np.asarray(coeffs, dtype=float)
    if a.size == 0:
        return a
    poles = np.roots(np.concatenate([[1.0], -a]))
    if np.any(np.abs(poles) >= 1.0):
        raise SignalError(f"unstable AR coefficients: pole magnitude {np.abs(poles).max():.4g} >= 1")
    return a


def _ar_autocov(a: np.ndarray, nlag: int) -> np.ndarray:
    # Yule-Walker for gamma_0..gamma_p with unit innovation, then recurse.
    p = a.size
    if p == 0:
        g = np.zeros(nlag)
        g[0] = 1.0
        return g
    A = np.zeros((p + 1, p + 1))
    b = np.zeros(p + 1)
    b[0] = 1.0
    for k in range(p + 1):
        A[k, k] += 1.0
        for j in range(1, p + 1):
            A[k, abs(k - j)] -= a[j - 1]
    g = list(np.linalg.solve(A, b))
    while len(g) < nlag:
        n = len(g)
        g.append(sum(a[j - 1] * g[n - j] for j in range(1, p + 1)))
    return np.array(g[:nlag])


def _toeplitz(first_col: np.ndarray) -> np.ndarray:
    M = first_col.size
    idx = np.abs(np.arange(M)[:, None] - np.arange(M)[None, :])
    return first_col[idx]


def _circulant(first_col: np.ndarray) -> np.ndarray:
    M = first_col.size
    return first_col[(np.arange(M)[:, None] - np.arange(M)[None, :]) % M]


def _multipath_templates(model: CovModel) -> Tuple[List[np.ndarray], np.ndarray]:
    M = model.M
    delays = model.params.get("delays", (0, 3, 7))
    amps = np.asarray(model.params.get("amps", (1.0, 0.6, 0.3)), dtype=float)
    pulse = np.asarray(model.params.get("pulse", np.hanning(6)[1:5]), dtype=complex)
    base = np.zeros(M, dtype=complex)
    base[: min(M, pulse.size)] = pulse[:M]
    return [np.roll(base, int(d)) for d in delays], amps


def build_covariance(model: CovModel) -> np.ndarray:
    """Population covariance of a model, Hermitian PSD by construction."""
    M, p = model.M, model.params
    if model.kind in ("tones", "chirp"):
        freqs = np.atleast_1d(p.get("freqs", [1.0]))
        amps = np.atleast_1d(p.get("amps", np.ones(len(freqs))))
        V = np.array([tone_vector(M, f) for f in freqs])
        R = (V.T * amps ** 2) @ V.conj() + p.get("noise_var", 0.0) * np.eye(M)
        if model.kind == "chirp":
            d = chirp_diagonal(M, p.get("mu", 0.0))
            R = d[:, None] * R * np.conj(d)[None, :]
        return R
    if model.kind == "ar":
        a = _ar_check(p.get("coeffs", [0.8]))
        if p.get("circulant", False):
            w = 2 * np.pi * np.arange(M) / M
            H = 1.0 - sum(a[k] * np.exp(-1j * w * (k + 1)) for k in range(a.size))
            S = 1.0 / np.abs(H) ** 2
            col = dft(S, inverse=True) / np.sqrt(M)
            return _circulant(col) + 0j
        return _toeplitz(_ar_autocov(a, M)) + 0j
    if model.kind == "ma":
        b = np.concatenate([[1.0], np.asarray(p.get("coeffs", [0.5]), dtype=float)])
        if p.get("circulant", False):
            w = 2 * np.pi * np.arange(M) / M
            S = np.abs(sum(b[k] * np.exp(-1j * w * k) for k in range(b.size))) ** 2
            return _circulant(dft(S, inverse=True) / np.sqrt(M)) + 0j
        r = np.zeros(M)
        for k in range(min(b.size, M)):
            r[k] = float(b[: b.size - k] @ b[k:])
        return _toeplitz(r) + 0j
    if model.kind == "multipath":
        temps, amps = _multipath_templates(model)
        R = sum(a * a * np.outer(t, t.conj()) for a, t in zip(amps, temps))
        return R + p.get("noise_var", 0.0) * np.eye(M)
    if model.kind == "graph_diffusion":
        g = p["graph"]
        if g.n != M:
            raise SignalError(f"graph has {g.n} vertices, model M={M}")
        f = p.get("f", lambda lam: 1.0 / (1.0 + lam))
        e = hermitian_eig(graph_laplacian(g))
        U = e.eigenvectors
        R = (U * f(e.eigenvalues)) @ U.conj().T
        if p.get("symmetrize", True):
            try:
                aut = known_automorphisms(g)
            except (SignalError, ValueError):
                return R
            # remove round-off that breaks the known symmetries
            R = reynolds_project(aut, R, exact=True)
        return R
    return p.get("sigma2", 1.0) * np.eye(M, dtype=complex)


def _sqrtm_psd(R: np.ndarray) -> np.ndarray:
    e = hermitian_eig(R)
    return e.eigenvectors * np.sqrt(np.clip(e.eigenvalues, 0.0, None))


def _cgauss(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_snapshots(model: CovModel, L: int, snr_db: Optional[float] = None, seed: int = 0) -> SnapshotSet:
    """Draw ``L`` snapshots.

    Tones and chirps get i.i.d. uniform phases per snapshot and tone.
    The other kinds are zero-mean circular Gaussian with the model
    covariance. When ``snr_db`` is finite, white circular noise is added
    with power ``P_signal / 10^(snr_db/10)``, where ``P_signal`` is the
    model's average per-sample power.
    """
    if L < 1:
        raise SignalError("L must be at least 1")
    rng = np.random.default_rng(seed)
    M, p = model.M, model.params
    if model.kind in ("tones", "chirp"):
        freqs = np.atleast_1d(p.get("freqs", [1.0]))
        amps = np.atleast_1d(p.get("amps", np.ones(len(freqs)))).astype(float)
        V = np.array([tone_vector(M, f) for f in freqs])
        ph = np.exp(2j * np.pi * rng.uniform(size=(L, len(freqs))))
        X = (ph * amps) @ V
        if model.kind == "chirp":
            X = X * chirp_diagonal(M, p.get("mu", 0.0))
        psig = float(np.sum(amps ** 2))
    elif model.kind == "multipath":
        temps, amps = _multipath_templates(model)
        ph = np.exp(2j * np.pi * rng.uniform(size=(L, len(temps))))
        X = (ph * amps) @ np.array(temps)
        psig = float(sum(a * a * np.sum(np.abs(t) ** 2) for a, t in zip(amps, temps)) / M)
    else:
        R = build_covariance(model)
        X = _cgauss(rng, (L, M)) @ _sqrtm_psd(R).T
        psig = float(np.trace(R).real / M)
    if snr_db is not None and np.isfinite(snr_db):
        X = X + np.sqrt(psig / 10 ** (snr_db / 10)) * _cgauss(rng, (L, M))
    meta = {"generator": model.kind, "snr_db": snr_db, "seed": seed, "snr_convention": "power"}
    return SnapshotSet(X, meta)


def cycle_graph(n: int) -> Graph:
    return Graph(n, tuple((k, (k + 1) % n) for k in range(n)), f"C_{n}")


def complete_graph(n: int) -> Graph:
    return Graph(n, tuple((u, v) for u in range(n) for v in range(u + 1, n)), f"K_{n}")


def petersen_graph() -> Graph:
    outer = [(k, (k + 1) % 5) for k in range(5)]
    spokes = [(k, k + 5) for k in range(5)]
    inner = [(5 + k, 5 + (k + 2) % 5) for k in range(5)]
    return Graph(10, tuple(outer + spokes + inner), "Petersen")


def read_edge_list(path: str, n: Optional[int] = None) -> Graph:
    """Read a whitespace-separated ``u v`` edge list (0-indexed, ``#`` comments)."""
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise SignalError(f"{path}:{lineno}: expected 'u v', got {line!r}")
            try:
                edges.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise SignalError(f"{path}:{lineno}: non-integer vertex in {line!r}") from None
    nv = n if n is not None else (1 + max(max(e) for e in edges) if edges else 0)
    return Graph(nv, tuple(edges), path)


def graph_laplacian(g: Graph) -> np.ndarray:
    """Combinatorial Laplacian ``D - A``."""
    if g.n < 2:
        raise SignalError("graph needs at least two vertices")
    Lap = np.zeros((g.n, g.n))
    for u, v in g.edges:
        Lap[u, v] -= 1.0
        Lap[v, u] -= 1.0
    Lap[np.diag_indices(g.n)] = g.degrees()
    return Lap


def known_automorphisms(g: Graph) -> FiniteGroup:
    """Automorphism group for ``C_n`` and ``K_n`` built by the constructors above."""
    if g.name == f"C_{g.n}":
        return make_group("dihedral", M=g.n)
    if g.name == f"K_{g.n}":
        return symmetric_group(g.n)
    raise SignalError(f"no automorphism table for {g.name!r}")


def constellation_points(constellation: str) -> np.ndarray:
    """Unit-average-power point set.

    ``"bpsk"`` is ``{+1, -1}``; ``"qpsk"`` uses the ``pi/4`` offset;
    ``"mpsk:K"`` (or ``"8psk"`` style names) uses ``exp(2 pi i k / K)``
    except ``K = 4``, which matches ``"qpsk"``; ``"qam16"`` is the square
    grid ``{+-1, +-3}^2 / sqrt(10)``.
    """
    c = constellation.lower().replace("-", "")
    if c == "bpsk":
        K = 2
    elif c == "qpsk":
        K = 4
    elif c.startswith("mpsk:"):
        K = int(c.split(":", 1)[1])
    elif c.endswith("psk") and c[:-3].isdigit():
        K = int(c[:-3])
    elif c in ("qam16", "16qam"):
        lv = np.array([-3, -1, 1, 3], dtype=float)
        return (lv[:, None] + 1j * lv[None, :]).ravel() / np.sqrt(10.0)
    else:
        raise SignalError(f"unknown constellation {constellation!r}")
    off = np.pi / 4 if K == 4 else 0.0
    return np.exp(1j * (2 * np.pi * np.arange(K) / K + off))


def symbol_source(constellation: str, n: int, seed: int = 0) -> np.ndarray:
    """``n`` i.i.d. uniform symbols from a constellation."""
    if n < 1:
        raise SignalError("n must be at least 1")
    pts = constellation_points(constellation)
    return pts[np.random.default_rng(seed).integers(0, pts.size, n)]


def make_channel(n_taps: int = 5, decay_db_per_tap: float = 3.0, seed: int = 0) -> ChannelModel:
    """Rayleigh taps with an exponential power-delay profile, unit total power."""
    prof = 10.0 ** (-decay_db_per_tap * np.arange(n_taps) / 10.0)
    h = np.sqrt(prof) * _cgauss(np.random.default_rng(seed), n_taps)
    return ChannelModel(h, decay_db_per_tap, n_taps, seed)


def channel_apply(ch: ChannelModel, s, snr_db: Optional[float] = None, seed: int = 0) -> np.ndarray:
    """``r = (h * s)[:n] + w`` with ``P_out / P_noise = 10^(snr_db/10)``.

    ``P_out`` is the empirical mean power of the noiseless output.
    """
    s = np.asarray(s, dtype=complex)
    y = np.convolve(s, ch.taps)[: s.size]
    if snr_db is None or not np.isfinite(snr_db):
        return y
    pw = float(np.mean(np.abs(y) ** 2))
    return y + np.sqrt(pw / 10 ** (snr_db / 10)) * _cgauss(np.random.default_rng(seed), s.size)
