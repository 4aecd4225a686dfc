"""Cosine similarity, orthogonal Procrustes and the Gamma-quantile threshold."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy import linalg, stats

from ..errors import InputError
from .sgns import EmbeddingSpace


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise InputError("cosine similarity of a zero vector")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def orthogonal_map(source: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Orthogonal ``R`` minimizing ``||source @ R - reference||_F``.

    ``R = U V^T`` from the SVD of ``source^T reference``; no centering or
    scaling, reflections allowed.
    """
    R, _ = linalg.orthogonal_procrustes(source, reference)
    return R


def procrustes_align(source: EmbeddingSpace, reference: EmbeddingSpace
                     ) -> tuple[np.ndarray, EmbeddingSpace]:
    """Rotate ``source`` onto ``reference`` using their full shared vocabulary."""
    if source.dim != reference.dim:
        raise InputError("spaces differ in dimension")
    shared = sorted(set(source.lemmas) & set(reference.lemmas))
    if len(shared) < source.dim:
        raise InputError(f"only {len(shared)} shared lemmas; alignment needs at least dim={source.dim}")
    R = orthogonal_map(source.rows(shared), reference.rows(shared))
    meta = dict(source.metadata, aligned_to=reference.metadata.get("label"))
    return R, EmbeddingSpace(source.lemmas, source.vectors @ R, meta)


@dataclass(frozen=True)
class GammaFit:
    shape: float
    rate: float
    threshold: float        # in similarity units (shift undone)
    degenerate: bool


def fit_gamma_threshold(values, shift: float = 1.0, quantile: float = 0.75,
                        method: str = "moments") -> GammaFit:
    """Fit a Gamma to ``values + shift`` and return its quantile minus ``shift``.

    ``method`` is ``"moments"`` (shape = mean^2/var, rate = mean/var, with
    the population variance) or ``"mle"`` (location fixed at 0).
    """
    x = np.asarray(values, dtype=float) + shift
    if x.size < 3:
        raise InputError("Gamma threshold needs at least 3 similarities")
    if np.any(x <= 0):
        raise InputError("shifted similarities must be positive; increase the shift")
    var = x.var()
    if var < 1e-12:
        warnings.warn("similarities have (near) zero variance; Gamma fit is degenerate, "
                      "no lemma is flagged", stacklevel=2)
        return GammaFit(np.inf, np.inf, float("nan"), True)
    if method == "moments":
        mean = x.mean()
        shape, rate = mean ** 2 / var, mean / var
    elif method == "mle":
        shape, _, scale = stats.gamma.fit(x, floc=0.0)
        rate = 1.0 / scale
    else:
        raise InputError(f"unknown Gamma fit method {method!r}")
    q = stats.gamma.ppf(quantile, shape, scale=1.0 / rate)
    return GammaFit(float(shape), float(rate), float(q - shift), False)


def gamma_threshold_decisions(series: Mapping[str, float], shift: float = 1.0,
                              quantile: float = 0.75, method: str = "moments"
                              ) -> tuple[dict[str, bool], GammaFit]:
    """``changed`` for every lemma whose similarity is below the fitted quantile."""
    lemmas = sorted(series)
    fit = fit_gamma_threshold([series[w] for w in lemmas], shift, quantile, method)
    if fit.degenerate:
        return {w: False for w in lemmas}, fit
    return {w: bool(series[w] < fit.threshold) for w in lemmas}, fit
