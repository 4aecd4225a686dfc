"""Embedding baselines: SGNS, Temporal Referencing, Procrustes, Gamma threshold."""

from .geometry import (GammaFit, cosine_similarity, fit_gamma_threshold,
                       gamma_threshold_decisions, orthogonal_map, procrustes_align)
from .pipeline import (GENRE_FILTERS, MODES, ScoreResult, SGNSParams, filter_genres,
                       score_targets, series_to_tsv, tagged, temporal_reference)
from .sgns import EmbeddingSpace, train_sgns

__all__ = [
    "EmbeddingSpace", "GENRE_FILTERS", "GammaFit", "MODES", "SGNSParams", "ScoreResult",
    "cosine_similarity", "filter_genres", "fit_gamma_threshold", "gamma_threshold_decisions",
    "orthogonal_map", "procrustes_align", "score_targets", "series_to_tsv", "tagged",
    "temporal_reference", "train_sgns",
]
