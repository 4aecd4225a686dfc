"""Generative model for genre-aware sense change.

Senses are distributions over the vocabulary, ``psi[t, k] = softmax(chi[t, k])``;
each genre has a distribution over senses, ``phi[t, g] = softmax(zeta[t, g])``.
Both ``chi`` and ``zeta`` follow first-order Gaussian random walks in time:
the first slice is ``Normal(0, sigma0**2)`` and each later slice is
``Normal(previous, 1 / precision)`` component-wise. The word-walk precision
``kappa_psi`` is fixed; the sense-walk precision ``kappa_phi`` carries a
``Gamma(a, rate=b)`` prior.

A snippet ``d`` observed at time ``t`` in genre ``g`` draws its sense
``z ~ Categorical(phi[t, g])`` and then every context word i.i.d. from
``psi[t, z]``. ``psi`` is shared across genres; only ``phi`` is genre-specific.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln, logsumexp

from .corpus import Snippet
from .errors import InputError, ModelError

LOG_FLOOR = 1e-300
STATE_FORMAT = "gasc.model_state"
STATE_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    """Dimensions and hyperparameters.

    ``a``/``b`` are the shape/rate of the Gamma prior on ``kappa_phi``;
    ``kappa_psi`` is the fixed word-walk precision.
    """

    K: int = 4
    G: int = 1
    T: int = 2
    V: int = 1
    W: int = 5
    a: float = 1.0
    b: float = 1.0
    kappa_psi: float = 100.0
    sigma0: float = 10.0

    def __post_init__(self):
        for name in ("K", "G", "V", "W"):
            if int(getattr(self, name)) < 1:
                raise InputError(f"{name} must be >= 1")
        if self.T < 2:
            raise InputError("T must be >= 2")
        for name in ("a", "b", "kappa_psi", "sigma0"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be > 0")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class ModelState:
    chi: np.ndarray    # [T, K, V]
    zeta: np.ndarray   # [T, G, K]
    kappa_phi: float
    z: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def psi(self) -> np.ndarray:
        return softmax_slice(self.chi)

    @property
    def phi(self) -> np.ndarray:
        return softmax_slice(self.zeta)

    def copy(self) -> "ModelState":
        return ModelState(self.chi.copy(), self.zeta.copy(), float(self.kappa_phi), self.z.copy())

    def check(self, config: ModelConfig) -> None:
        T, K, G, V = config.T, config.K, config.G, config.V
        if self.chi.shape != (T, K, V):
            raise ModelError(f"chi has shape {self.chi.shape}, expected {(T, K, V)}")
        if self.zeta.shape != (T, G, K):
            raise ModelError(f"zeta has shape {self.zeta.shape}, expected {(T, G, K)}")
        if not (np.all(np.isfinite(self.chi)) and np.all(np.isfinite(self.zeta))):
            raise ModelError("non-finite parameters in state")
        if not self.kappa_phi > 0:
            raise ModelError("kappa_phi must be positive")
        if self.z.size and (self.z.min() < 0 or self.z.max() >= K):
            raise ModelError("sense assignment out of range")

    def to_dict(self) -> dict:
        T, K, V = self.chi.shape
        G = self.zeta.shape[1]
        return {
            "format": STATE_FORMAT,
            "version": STATE_VERSION,
            "dims": {"T": T, "K": K, "V": V, "G": G, "D": int(self.z.size)},
            "ordering": "row-major; chi[t,k,v], zeta[t,g,k]",
            "chi": self.chi.ravel().tolist(),
            "zeta": self.zeta.ravel().tolist(),
            "kappa_phi": float(self.kappa_phi),
            "z": self.z.astype(int).tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelState":
        if data.get("format") != STATE_FORMAT:
            raise InputError(f"not a model state document: {data.get('format')!r}")
        if data.get("version") != STATE_VERSION:
            raise InputError(f"unsupported state version {data.get('version')!r}")
        d = data["dims"]
        chi = np.asarray(data["chi"], dtype=float).reshape(d["T"], d["K"], d["V"])
        zeta = np.asarray(data["zeta"], dtype=float).reshape(d["T"], d["G"], d["K"])
        z = np.asarray(data["z"], dtype=np.int64)
        return cls(chi, zeta, float(data["kappa_phi"]), z)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ModelState":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class PackedSnippets:
    """Snippets as arrays: time bin, genre and a CSR word-count matrix."""

    t: np.ndarray        # [D]
    g: np.ndarray        # [D]
    indptr: np.ndarray   # [D + 1]
    words: np.ndarray    # [nnz] vocabulary index
    counts: np.ndarray   # [nnz] multiplicity
    V: int

    @property
    def D(self) -> int:
        return self.t.size

    @cached_property
    def row(self) -> np.ndarray:
        """Snippet index of each nonzero."""
        return np.repeat(np.arange(self.D), np.diff(self.indptr))

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.counts, self.words, self.indptr), shape=(self.D, self.V))

    @cached_property
    def _blocks(self) -> dict:
        blocks = {}
        for t in np.unique(self.t):
            rows = np.flatnonzero(self.t == t)
            blocks[int(t)] = (rows, self.matrix[rows])
        return blocks

    def time_blocks(self):
        """``(t, row indices, count submatrix)`` for every occupied time bin."""
        for t, (rows, mat) in self._blocks.items():
            yield t, rows, mat

    def subset(self, idx) -> "PackedSnippets":
        idx = np.asarray(idx, dtype=np.int64)
        lens = np.diff(self.indptr)[idx]
        indptr = np.concatenate([[0], np.cumsum(lens)])
        pos = np.concatenate([np.arange(self.indptr[i], self.indptr[i + 1]) for i in idx]) \
            if idx.size else np.zeros(0, dtype=np.int64)
        return PackedSnippets(self.t[idx], self.g[idx], indptr,
                              self.words[pos], self.counts[pos], self.V)


def pack_snippets(snippets, V: int) -> PackedSnippets:
    if isinstance(snippets, PackedSnippets):
        return snippets
    t = np.fromiter((s.time_bin for s in snippets), dtype=np.int64, count=len(snippets))
    g = np.fromiter((s.genre for s in snippets), dtype=np.int64, count=len(snippets))
    indptr = [0]
    words, counts = [], []
    for s in snippets:
        u, c = np.unique(np.asarray(s.context, dtype=np.int64), return_counts=True)
        if u.size and (u[0] < 0 or u[-1] >= V):
            raise ModelError(f"snippet {s.snippet_id}: word index outside vocabulary of size {V}")
        words.append(u)
        counts.append(c)
        indptr.append(indptr[-1] + u.size)
    cat = (lambda xs: np.concatenate(xs) if xs else np.zeros(0, dtype=np.int64))
    return PackedSnippets(t, g, np.asarray(indptr, dtype=np.int64),
                          cat(words).astype(np.int64), cat(counts).astype(np.float64), V)


def softmax_slice(params) -> np.ndarray:
    """Exp-normalize along the last axis."""
    x = np.asarray(params, dtype=float)
    m = np.max(x, axis=-1, keepdims=True)
    e = np.exp(x - m)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(params) -> np.ndarray:
    x = np.asarray(params, dtype=float)
    return x - logsumexp(x, axis=-1, keepdims=True)


def temporal_log_prior(params, precision: float, sigma0: float = 10.0) -> float:
    """Log density of a Gaussian random walk over the leading (time) axis.

    ``params`` has shape ``[T, ...]``; every trailing component is an
    independent walk.
    """
    x = np.asarray(params, dtype=float)
    if x.shape[0] < 2:
        raise InputError("temporal prior needs T >= 2")
    if not precision > 0:
        raise InputError("precision must be positive")
    x0 = x[0]
    lp = np.sum(-0.5 * (x0 / sigma0) ** 2 - math.log(sigma0) - 0.5 * math.log(2 * math.pi))
    inc = np.diff(x, axis=0)
    n = inc.size
    lp += 0.5 * n * (math.log(precision) - math.log(2 * math.pi)) - 0.5 * precision * np.sum(inc ** 2)
    return float(lp)


def gamma_log_density(x: float, shape: float, rate: float) -> float:
    return float(shape * math.log(rate) - gammaln(shape) + (shape - 1) * math.log(x) - rate * x)


def snippet_log_likelihoods(state: ModelState, data: PackedSnippets) -> np.ndarray:
    """Per-snippet, per-sense ``log phi[t,g,k] + sum_w log psi[t,k,w]``; shape ``[D, K]``."""
    log_psi = np.log(np.maximum(softmax_slice(state.chi), LOG_FLOOR))
    log_phi = np.log(np.maximum(softmax_slice(state.zeta), LOG_FLOOR))
    out = log_phi[data.t, data.g, :]
    for t, rows, mat in data.time_blocks():
        out[rows] += mat @ log_psi[t].T
    return out


def log_likelihood(state: ModelState, data: PackedSnippets, z=None) -> float:
    z = state.z if z is None else np.asarray(z)
    if data.D == 0:
        return 0.0
    if z.size != data.D:
        raise ModelError(f"{z.size} sense assignments for {data.D} snippets")
    ll = snippet_log_likelihoods(state, data)
    return float(ll[np.arange(data.D), z].sum())


def log_prior(state: ModelState, config: ModelConfig) -> float:
    # each (k, v) / (g, k) component is its own walk
    lp = temporal_log_prior(state.chi, config.kappa_psi, config.sigma0)
    lp += temporal_log_prior(state.zeta, state.kappa_phi, config.sigma0)
    lp += gamma_log_density(state.kappa_phi, config.a, config.b)
    return lp


def log_joint(state: ModelState, snippets, config: ModelConfig) -> float:
    """Joint log density of parameters, sense assignments and snippet words."""
    state.check(config)
    data = pack_snippets(snippets, config.V)
    if data.D and ((data.t.max() >= config.T) or (data.g.max() >= config.G)):
        raise ModelError("snippet time bin or genre outside model dimensions")
    return log_prior(state, config) + log_likelihood(state, data)


# ---------------------------------------------------------------- simulation

@dataclass
class TrajectorySpec:
    """Optional ground truth for :func:`forward_simulate`.

    ``phi`` is ``[T, G, K]``, ``psi`` is ``[T, K, V]``; missing ones are
    drawn from the priors. ``genre_proportions`` is ``[G]`` or ``[T, G]``
    (uniform when omitted). ``snippet_length`` defaults to ``2 * W``.
    """

    phi: np.ndarray | None = None
    psi: np.ndarray | None = None
    genre_proportions: np.ndarray | None = None
    snippet_length: int | None = None

    def to_dict(self) -> dict:
        conv = (lambda a: None if a is None else np.asarray(a).tolist())
        return {"phi": conv(self.phi), "psi": conv(self.psi),
                "genre_proportions": conv(self.genre_proportions),
                "snippet_length": self.snippet_length}

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectorySpec":
        conv = (lambda a: None if a is None else np.asarray(a, dtype=float))
        return cls(conv(d.get("phi")), conv(d.get("psi")),
                   conv(d.get("genre_proportions")), d.get("snippet_length"))


@dataclass
class SyntheticCorpus:
    snippets: list[Snippet]
    true_z: np.ndarray
    true_state: ModelState
    phi: np.ndarray
    psi: np.ndarray


def sample_random_walk(rng: np.random.Generator, shape, precision: float, sigma0: float) -> np.ndarray:
    """Draw a ``[T, ...]`` Gaussian random walk path from the temporal prior."""
    x = np.empty(shape)
    x[0] = rng.normal(0.0, sigma0, size=shape[1:])
    steps = rng.normal(0.0, 1.0 / math.sqrt(precision), size=(shape[0] - 1,) + tuple(shape[1:]))
    x[1:] = x[0] + np.cumsum(steps, axis=0)
    return x


def _as_probabilities(p, shape, name):
    p = np.asarray(p, dtype=float)
    if p.shape != shape:
        raise InputError(f"{name} has shape {p.shape}, expected {shape}")
    if np.any(p < 0) or not np.allclose(p.sum(axis=-1), 1.0, atol=1e-9):
        raise InputError(f"{name} rows must be probability vectors")
    return p / p.sum(axis=-1, keepdims=True)


def forward_simulate(config: ModelConfig, spec: TrajectorySpec | None = None,
                     n_snippets_per_bin=100, seed: int = 0) -> SyntheticCorpus:
    """Sample a synthetic snippet corpus from the generative model.

    ``n_snippets_per_bin`` is either an int (snippets per time bin, genres
    drawn from the genre proportions) or a ``[T, G]`` array of exact counts
    per (bin, genre).
    """
    spec = spec or TrajectorySpec()
    T, G, K, V = config.T, config.G, config.K, config.V
    rng = np.random.default_rng(seed)

    kappa_phi = float(rng.gamma(config.a, 1.0 / config.b))
    if spec.psi is None:
        chi = sample_random_walk(rng, (T, K, V), config.kappa_psi, config.sigma0)
        psi = softmax_slice(chi)
    else:
        psi = _as_probabilities(spec.psi, (T, K, V), "psi")
        chi = np.log(np.maximum(psi, LOG_FLOOR))
    if spec.phi is None:
        zeta = sample_random_walk(rng, (T, G, K), kappa_phi, config.sigma0)
        phi = softmax_slice(zeta)
    else:
        phi = _as_probabilities(spec.phi, (T, G, K), "phi")
        zeta = np.log(np.maximum(phi, LOG_FLOOR))

    counts = np.asarray(n_snippets_per_bin)
    if counts.ndim == 0:
        n = int(counts)
        if n < 0:
            raise InputError("n_snippets_per_bin must be >= 0")
        if spec.genre_proportions is None:
            gp = np.full((T, G), 1.0 / G)
        else:
            gp = np.asarray(spec.genre_proportions, dtype=float)
            gp = np.broadcast_to(gp, (T, G)) if gp.shape in ((G,), (T, G)) else None
            if gp is None:
                raise InputError("genre_proportions must have shape [G] or [T, G]")
            gp = _as_probabilities(gp, (T, G), "genre_proportions")
        counts = np.stack([rng.multinomial(n, gp[t]) for t in range(T)])
    elif counts.shape != (T, G) or np.any(counts < 0):
        raise InputError("per-(bin, genre) counts must be a nonnegative [T, G] array")

    length = spec.snippet_length or 2 * config.W
    snippets, true_z = [], []
    for t in range(T):
        for g in range(G):
            n = int(counts[t, g])
            if n == 0:
                continue
            zs = rng.choice(K, size=n, p=phi[t, g])
            words = np.empty((n, length), dtype=np.int64)
            for k in range(K):
                sel = np.flatnonzero(zs == k)
                if sel.size:
                    words[sel] = rng.choice(V, size=(sel.size, length), p=psi[t, k])
            for i in range(n):
                snippets.append(Snippet(f"sim-t{t}-g{g}-{i}", t, g,
                                        tuple(int(w) for w in words[i]), f"sim-t{t}-g{g}-{i}"))
            true_z.extend(int(z) for z in zs)
    z = np.asarray(true_z, dtype=np.int64)
    return SyntheticCorpus(snippets, z, ModelState(chi, zeta, kappa_phi, z.copy()), phi, psi)
