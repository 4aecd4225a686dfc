"""Blocked Gibbs sampler for the sense-change model.

One sweep updates, in order: every snippet's sense assignment from its full
conditional, the sense-distribution parameters ``zeta``, the word-distribution
parameters ``chi``, and the precision ``kappa_phi`` from its conjugate Gamma
conditional. ``zeta`` and ``chi`` are updated coordinate by coordinate with an
auxiliary-variable scheme that makes each conditional a truncated Gaussian
and, by default, a Laplace-proposal Metropolis-Hastings step after it
(see :func:`gasc._fallback.ln_sweep`). The auxiliary-variable step alone is
exact but barely moves once counts are large; the MH step restores mixing.

Sense labels are not post-processed for label switching; summaries are per
chain.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _backend
from .errors import InputError, ModelError
from .model import (ModelConfig, ModelState, PackedSnippets, log_likelihood, log_prior,
                    pack_snippets, sample_random_walk, snippet_log_likelihoods, softmax_slice)

CHECKPOINT_FORMAT = "gasc.checkpoint"
CHECKPOINT_VERSION = 1

# hyperparameter presets; "scan" is the latin-default setting with genres pooled
PRESETS = {
    "latin-default": {"a": 1.0, "b": 1.0, "kappa_psi": 100.0, "n_iterations": 2500, "burn_in": 100, "scan": False},
    "greek-gasc": {"a": 7.0, "b": 3.0, "kappa_psi": 10.0, "n_iterations": 10000, "burn_in": 100, "scan": False},
    "scan": {"a": 1.0, "b": 1.0, "kappa_psi": 100.0, "n_iterations": 2500, "burn_in": 100, "scan": True},
}


def preset(name: str) -> dict:
    try:
        return dict(PRESETS[name])
    except KeyError:
        raise InputError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


SCHEMES = {"aux": _backend.AUX, "laplace": _backend.LAPLACE,
           "aux+laplace": _backend.AUX | _backend.LAPLACE}


@dataclass(frozen=True)
class SamplerConfig:
    n_iterations: int = 2500
    burn_in: int = 100
    thinning: int = 1
    seed: int = 0
    keep_z: bool = False
    trace_log_joint: bool = True
    scheme: str = "aux+laplace"
    init: str = "data"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InputError(f"unknown scheme {self.scheme!r}; choose from {sorted(SCHEMES)}")
        if self.init not in ("data", "prior"):
            raise InputError("init must be 'data' or 'prior'")
        if self.n_iterations < 1:
            raise InputError("n_iterations must be positive")
        if not 0 <= self.burn_in < self.n_iterations:
            raise InputError("burn_in must satisfy 0 <= burn_in < n_iterations")
        if self.thinning < 1:
            raise InputError("thinning must be positive")

    @property
    def n_retained(self) -> int:
        return len(range(self.burn_in, self.n_iterations, self.thinning))

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class PosteriorTrajectory:
    """Posterior mean/std of each sense probability, ``[T, G, K]``."""

    mean: np.ndarray
    std: np.ndarray
    n_samples: int
    genre_labels: list[str] | None = None

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.std = np.asarray(self.std, dtype=float)
        if self.mean.ndim != 3 or self.mean.shape != self.std.shape:
            raise InputError("trajectory mean/std must both be [T, G, K]")
        if np.any(self.std < 0) or not np.all(np.isfinite(self.std)):
            raise InputError("trajectory std must be finite and nonnegative")
        if not np.allclose(self.mean.sum(axis=2), 1.0, atol=1e-6):
            raise InputError("trajectory means must sum to 1 over senses")

    @property
    def T(self) -> int:
        return self.mean.shape[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time_bin", "genre", "sense", "mean", "std"])
        T, G, K = self.mean.shape
        for t in range(T):
            for g in range(G):
                for k in range(K):
                    w.writerow([t, g, k, repr(float(self.mean[t, g, k])), repr(float(self.std[t, g, k]))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "PosteriorTrajectory":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise InputError("empty trajectory file")
        try:
            idx = np.array([[int(r["time_bin"]), int(r["genre"]), int(r["sense"])] for r in rows])
            vals = np.array([[float(r["mean"]), float(r["std"])] for r in rows])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed trajectory file: {exc}") from None
        if idx.min() < 0:
            raise InputError("negative index in trajectory file")
        shape = tuple(idx.max(axis=0) + 1)
        if len(rows) != int(np.prod(shape)):
            raise InputError("trajectory file does not cover a full [T, G, K] grid")
        mean, std = np.full(shape, np.nan), np.full(shape, np.nan)
        mean[tuple(idx.T)] = vals[:, 0]
        std[tuple(idx.T)] = vals[:, 1]
        if np.isnan(mean).any():
            raise InputError("duplicate rows in trajectory file")
        return cls(mean, std, n_samples=0)


@dataclass
class SampleStore:
    phi: np.ndarray               # [S, T, G, K]
    kappa_phi: np.ndarray         # [S]
    z: np.ndarray | None          # [S, D] when kept
    log_joint: np.ndarray         # [n_iterations] (empty when not traced)
    psi_mean: np.ndarray          # [T, K, V] posterior mean over retained samples
    final_state: ModelState
    model_config: ModelConfig
    sampler_config: SamplerConfig
    acceptance: dict | None = None

    @property
    def n_samples(self) -> int:
        return self.phi.shape[0]

    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "model_config": self.model_config.to_dict(),
            "sampler_config": self.sampler_config.to_dict(),
            "state": self.final_state.to_dict(),
            "samples": {
                "phi_shape": list(self.phi.shape),
                "phi": self.phi.ravel().tolist(),
                "kappa_phi": self.kappa_phi.tolist(),
                "z": None if self.z is None else self.z.tolist(),
                "log_joint": self.log_joint.tolist(),
                "psi_mean_shape": list(self.psi_mean.shape),
                "psi_mean": self.psi_mean.ravel().tolist(),
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SampleStore":
        if data.get("format") != CHECKPOINT_FORMAT or data.get("version") != CHECKPOINT_VERSION:
            raise InputError("not a version-1 gasc checkpoint")
        s = data["samples"]
        return cls(
            phi=np.asarray(s["phi"], dtype=float).reshape(s["phi_shape"]),
            kappa_phi=np.asarray(s["kappa_phi"], dtype=float),
            z=None if s["z"] is None else np.asarray(s["z"], dtype=np.int64),
            log_joint=np.asarray(s["log_joint"], dtype=float),
            psi_mean=np.asarray(s["psi_mean"], dtype=float).reshape(s["psi_mean_shape"]),
            final_state=ModelState.from_dict(data["state"]),
            model_config=ModelConfig(**data["model_config"]),
            sampler_config=SamplerConfig(**data["sampler_config"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SampleStore":
        return cls.from_dict(json.loads(text))


# ------------------------------------------------------------ conditionals

def _normalize_log(logp: np.ndarray) -> np.ndarray:
    m = np.max(logp, axis=-1, keepdims=True)
    if not np.all(np.isfinite(m)):
        raise ModelError("all sense weights underflowed (degenerate state)")
    p = np.exp(logp - m)
    return p / p.sum(axis=-1, keepdims=True)


def sense_conditional(snippet, state: ModelState, config: ModelConfig) -> np.ndarray:
    """Full conditional over senses for one (vocabulary-indexed) snippet."""
    data = pack_snippets([snippet], config.V)
    return _normalize_log(snippet_log_likelihoods(state, data))[0]


def sample_sense_assignment(snippet, state: ModelState, config: ModelConfig,
                            rng: np.random.Generator) -> int:
    p = sense_conditional(snippet, state, config)
    return int(min(np.searchsorted(np.cumsum(p), rng.random(), side="right"), p.size - 1))


def sample_assignments(state: ModelState, data: PackedSnippets, rng: np.random.Generator) -> np.ndarray:
    """Redraw every snippet's sense; draws are independent given the parameters."""
    p = _normalize_log(snippet_log_likelihoods(state, data))
    u = rng.random(data.D)
    z = (np.cumsum(p, axis=1) <= u[:, None]).sum(axis=1)
    np.minimum(z, p.shape[1] - 1, out=z)
    state.z = z.astype(np.int64)
    return state.z


def word_counts(data: PackedSnippets, z: np.ndarray, T: int, K: int) -> np.ndarray:
    V = data.V
    row = data.row
    flat = (data.t[row] * K + z[row]) * V + data.words
    return np.bincount(flat, weights=data.counts, minlength=T * K * V).reshape(T, K, V)


def sense_counts(data: PackedSnippets, z: np.ndarray, T: int, G: int, K: int) -> np.ndarray:
    flat = (data.t * G + data.g) * K + z
    return np.bincount(flat, minlength=T * G * K).reshape(T, G, K).astype(float)


def _uniforms(rng, shape):
    # (0, 1]: the kernels take logs of these
    return 1.0 - rng.random(tuple(shape) + (4,))


def update_word_params(state: ModelState, data: PackedSnippets, config: ModelConfig,
                       rng: np.random.Generator, scheme: str = "aux+laplace") -> int:
    """Resample ``chi`` in place; returns the number of accepted MH proposals."""
    counts = word_counts(data, state.z, config.T, config.K)
    u = _uniforms(rng, state.chi.shape)
    return _backend.ln_sweep(state.chi, counts, config.kappa_psi, config.sigma0, u, SCHEMES[scheme])


def update_sense_params(state: ModelState, data: PackedSnippets, config: ModelConfig,
                        rng: np.random.Generator, scheme: str = "aux+laplace") -> int:
    """Resample ``zeta`` in place given the sense counts per (time, genre)."""
    counts = sense_counts(data, state.z, config.T, config.G, config.K)
    u = _uniforms(rng, state.zeta.shape)
    return _backend.ln_sweep(state.zeta, counts, state.kappa_phi, config.sigma0, u, SCHEMES[scheme])


def precision_posterior(zeta: np.ndarray, config: ModelConfig) -> tuple[float, float]:
    """Shape and rate of the conjugate Gamma conditional of ``kappa_phi``."""
    inc = np.diff(zeta, axis=0)
    return config.a + 0.5 * inc.size, config.b + 0.5 * float(np.sum(inc ** 2))


def update_precision(state: ModelState, config: ModelConfig, rng: np.random.Generator) -> float:
    shape, rate = precision_posterior(state.zeta, config)
    state.kappa_phi = float(rng.gamma(shape, 1.0 / rate))
    return state.kappa_phi


def _spherical_kmeans(data: PackedSnippets, K: int, rng: np.random.Generator,
                      n_restarts: int = 10, n_iter: int = 20) -> np.ndarray:
    """Cluster snippets by the direction of their word-count vectors.

    k-means++ seeding on cosine distance followed by Lloyd steps, restarted
    ``n_restarts`` times; the labels with the highest total cosine to their
    centers win.
    """
    X = data.matrix.astype(float)
    norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
    norms[norms == 0] = 1.0
    X = sp.csr_matrix(sp.diags(1.0 / norms) @ X)
    best_labels, best_score = None, -np.inf
    for _ in range(n_restarts):
        labels, score = _kmeans_once(X, K, rng, n_iter)
        if score > best_score:
            best_labels, best_score = labels, score
    return best_labels


def _kmeans_once(X, K, rng, n_iter):
    D = X.shape[0]
    centers = np.empty((K, X.shape[1]))
    centers[0] = X[rng.integers(D)].toarray()
    best = np.full(D, np.inf)
    for k in range(1, K):
        dist = 1.0 - X @ centers[k - 1]
        best = np.minimum(best, np.maximum(dist, 0.0))
        total = best.sum()
        idx = rng.integers(D) if total <= 0 else int(np.searchsorted(np.cumsum(best) / total, rng.random()))
        centers[k] = X[min(idx, D - 1)].toarray()
    labels = np.full(D, -1)
    for _ in range(n_iter):
        new = np.asarray(np.argmax(X @ centers.T, axis=1)).ravel()
        if np.array_equal(new, labels):
            break
        labels = new
        for k in range(K):
            members = labels == k
            if members.any():
                c = np.asarray(X[members].sum(axis=0)).ravel()
                centers[k] = c / max(np.linalg.norm(c), 1e-300)
    score = float(np.asarray((X @ centers.T)[np.arange(D), labels]).sum())
    return labels.astype(np.int64), score


def init_state(config: ModelConfig, data: PackedSnippets | int, rng: np.random.Generator,
               mode: str = "prior") -> ModelState:
    """Starting state.

    ``mode="prior"``: senses uniformly at random; ``chi``, ``zeta`` and
    ``kappa_phi`` drawn from their priors.

    ``mode="data"``: ``kappa_phi`` from its prior, senses from a spherical
    k-means clustering of the snippets' word counts, ``chi`` the time-pooled
    smoothed log word frequencies of each cluster and ``zeta`` the pooled log
    cluster frequencies per genre. This starts the chain near a sensible
    mode instead of the near one-hot distributions a wide prior produces.
    The starting point does not change the stationary distribution.
    """
    n_snippets = data if isinstance(data, int) else data.D
    T, K, G, V = config.T, config.K, config.G, config.V
    kappa_phi = float(rng.gamma(config.a, 1.0 / config.b))
    if mode == "prior":
        chi = sample_random_walk(rng, (T, K, V), config.kappa_psi, config.sigma0)
        zeta = sample_random_walk(rng, (T, G, K), kappa_phi, config.sigma0)
        z = rng.integers(0, K, size=n_snippets).astype(np.int64)
        return ModelState(chi, zeta, kappa_phi, z)
    if isinstance(data, int):
        raise InputError("data-driven initialization needs the snippets")
    z = _spherical_kmeans(data, K, rng) if n_snippets >= K else rng.integers(0, K, size=n_snippets)
    z = np.asarray(z, dtype=np.int64)
    wc = word_counts(data, z, T, K).sum(axis=0) + 1.0
    chi = np.broadcast_to(np.log(wc / wc.sum(axis=1, keepdims=True)), (T, K, V)).copy()
    sc = sense_counts(data, z, T, G, K).sum(axis=0) + 1.0
    zeta = np.broadcast_to(np.log(sc / sc.sum(axis=1, keepdims=True)), (T, G, K)).copy()
    return ModelState(chi, zeta, kappa_phi, z)


def sweep(state: ModelState, data: PackedSnippets, config: ModelConfig, rng: np.random.Generator,
          scheme: str = "aux+laplace") -> tuple[int, int]:
    """One full sweep; returns accepted MH proposals for (zeta, chi)."""
    sample_assignments(state, data, rng)
    acc_zeta = update_sense_params(state, data, config, rng, scheme)
    acc_chi = update_word_params(state, data, config, rng, scheme)
    update_precision(state, config, rng)
    return acc_zeta, acc_chi


def _check_data(data: PackedSnippets, config: ModelConfig) -> None:
    if data.D == 0:
        raise InputError("no snippets to sample from")
    if data.t.min() < 0 or data.t.max() >= config.T:
        raise ModelError("snippet time bin outside [0, T)")
    if data.g.min() < 0 or data.g.max() >= config.G:
        raise ModelError("snippet genre outside [0, G)")


def run_chain(snippets, model_config: ModelConfig, sampler_config: SamplerConfig,
              init: ModelState | None = None) -> tuple[SampleStore, PosteriorTrajectory]:
    """Run one chain and summarize the retained samples.

    Deterministic given ``sampler_config.seed``.
    """
    cfg, sc = model_config, sampler_config
    data = pack_snippets(snippets, cfg.V)
    _check_data(data, cfg)
    rng = np.random.default_rng(sc.seed)
    state = init.copy() if init is not None else init_state(cfg, data, rng, sc.init)
    state.check(cfg)

    S = sc.n_retained
    phi = np.empty((S, cfg.T, cfg.G, cfg.K))
    kappa = np.empty(S)
    zs = np.empty((S, data.D), dtype=np.int64) if sc.keep_z else None
    trace = np.empty(sc.n_iterations if sc.trace_log_joint else 0)
    psi_sum = np.zeros((cfg.T, cfg.K, cfg.V))
    accepted = np.zeros(2)
    s = 0
    for it in range(sc.n_iterations):
        accepted += sweep(state, data, cfg, rng, sc.scheme)
        if sc.trace_log_joint:
            trace[it] = log_prior(state, cfg) + log_likelihood(state, data)
        if it >= sc.burn_in and (it - sc.burn_in) % sc.thinning == 0:
            phi[s] = softmax_slice(state.zeta)
            kappa[s] = state.kappa_phi
            if zs is not None:
                zs[s] = state.z
            psi_sum += softmax_slice(state.chi)
            s += 1
    if not np.all(np.isfinite(state.chi)) or not np.all(np.isfinite(state.zeta)):
        raise ModelError("sampler produced non-finite parameters")
    store = SampleStore(phi, kappa, zs, trace, psi_sum / max(S, 1), state, cfg, sc)
    if SCHEMES[sc.scheme] & _backend.LAPLACE:
        store.acceptance = {"zeta": accepted[0] / (sc.n_iterations * state.zeta.size),
                            "chi": accepted[1] / (sc.n_iterations * state.chi.size)}
    return store, summarize(store) if S >= 2 else None


def summarize(store: SampleStore | np.ndarray) -> PosteriorTrajectory:
    """Per (t, g, k) mean and sample standard deviation of the sense probabilities."""
    phi = store.phi if isinstance(store, SampleStore) else np.asarray(store, dtype=float)
    if phi.shape[0] < 2:
        raise InputError("need at least two retained samples to summarize")
    return PosteriorTrajectory(phi.mean(axis=0), phi.std(axis=0, ddof=1), n_samples=phi.shape[0])
