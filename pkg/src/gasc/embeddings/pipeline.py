"""Corpus-level baselines: Temporal Referencing and per-bin aligned SGNS."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

from ..corpus import Document, TimeBinning, bin_time
from ..errors import InputError
from .geometry import cosine_similarity, procrustes_align
from .sgns import train_sgns

MODES = ("TR", "OP")
SEPARATOR = "#"

# named genre filters: (include set, exclude set), compared case-insensitively
GENRE_FILTERS = {
    "christian": ({"christian"}, set()),
    "NOT-christian": (set(), {"christian"}),
    "technical": ({"technical"}, set()),
    "NOT-technical": (set(), {"technical"}),
    "narrative": ({"narrative"}, set()),
    "NOT-narrative": (set(), {"narrative"}),
}


@dataclass(frozen=True)
class SGNSParams:
    dim: int = 100
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    min_count: int = 2
    seed: int = 0
    alpha: float = 0.025
    min_alpha: float = 1e-4

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ScoreResult:
    series: dict[str, float]                      # lemma -> cosine similarity
    missing: list[str] = field(default_factory=list)


def tagged(lemma: str, t: int) -> str:
    return f"{lemma}{SEPARATOR}{t}"


def temporal_reference(documents: Sequence[Document], targets: Sequence[str],
                       binning: TimeBinning) -> list[Document]:
    """Rewrite each target occurrence in a bin-``t`` document to ``lemma#t``.

    All occurrences are tagged, including those inside another target's
    context. Non-target lemmas are untouched.
    """
    targets = set(targets)
    if not targets:
        raise InputError("no target lemmas given")
    bad = sorted(t for t in targets if SEPARATOR in t)
    if bad:
        raise InputError(f"target lemmas may not contain {SEPARATOR!r}: {bad}")
    for doc in documents:
        for w in doc.lemmas:
            if SEPARATOR in w and w.split(SEPARATOR, 1)[0] in targets:
                raise InputError(f"lemma {w!r} in document {doc.doc_id} collides with the "
                                 "temporal-reference tags of a target")
    _, bins = bin_time(documents, binning.bin_edges)
    return [Document(d.doc_id, d.time_value, d.genre,
                     tuple(tagged(w, b) if w in targets else w for w in d.lemmas))
            for d, b in zip(documents, bins)]


def filter_genres(documents: Sequence[Document], include: Sequence[str] | None = None,
                  exclude: Sequence[str] | None = None) -> list[Document]:
    inc = {g.lower() for g in include or ()}
    exc = {g.lower() for g in exclude or ()}
    out = [d for d in documents
           if (not inc or d.genre.lower() in inc) and d.genre.lower() not in exc]
    if not out:
        raise InputError("genre filter leaves no documents")
    return out


def score_targets(mode: str, documents: Sequence[Document], targets: Sequence[str],
                  binning: TimeBinning, params: SGNSParams = SGNSParams(),
                  genre_include: Sequence[str] | None = None,
                  genre_exclude: Sequence[str] | None = None,
                  t1: int = 0, t2: int | None = None, workers: int = 1) -> ScoreResult:
    """Cosine similarity of every target between bins ``t1`` and ``t2``.

    ``TR``: one model on the temporally referenced joint corpus.
    ``OP``: one model per bin, the ``t1`` space rotated onto the ``t2`` one.
    Targets without a vector in a required bin are reported in ``missing``.
    """
    if mode not in MODES:
        raise InputError(f"unknown mode {mode!r}; choose from {MODES}")
    if not targets:
        raise InputError("no target lemmas given")
    t2 = binning.bin_count - 1 if t2 is None else t2
    if binning.bin_count < 2:
        raise InputError("comparing time bins needs at least two bins")
    if not (0 <= t1 < binning.bin_count and 0 <= t2 < binning.bin_count) or t1 == t2:
        raise InputError(f"bins t1={t1}, t2={t2} invalid for {binning.bin_count} bins")
    docs = filter_genres(documents, genre_include, genre_exclude)
    kw = dict(dim=params.dim, window=params.window, negatives=params.negatives,
              epochs=params.epochs, min_count=params.min_count, alpha=params.alpha,
              min_alpha=params.min_alpha, workers=workers)
    series, missing = {}, []
    if mode == "TR":
        tr = temporal_reference(docs, targets, binning)
        space = train_sgns((d.lemmas for d in tr), seed=params.seed, **kw)
        for w in sorted(set(targets)):
            a, b = tagged(w, t1), tagged(w, t2)
            if a in space and b in space:
                series[w] = cosine_similarity(space[a], space[b])
            else:
                missing.append(w)
    else:
        _, bins = bin_time(docs, binning.bin_edges)
        spaces = {}
        for t in (t1, t2):
            sub = [d.lemmas for d, b in zip(docs, bins) if b == t]
            if not sub:
                raise InputError(f"no documents in time bin {t}")
            spaces[t] = train_sgns(sub, seed=params.seed + t, **kw)
            spaces[t].metadata["label"] = f"bin{t}"
        _, aligned = procrustes_align(spaces[t1], spaces[t2])
        for w in sorted(set(targets)):
            if w in aligned and w in spaces[t2]:
                series[w] = cosine_similarity(aligned[w], spaces[t2][w])
            else:
                missing.append(w)
    return ScoreResult(series, missing)


def series_to_tsv(series: Mapping[str, float]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="\t", lineterminator="\n")
    w.writerow(["lemma", "similarity"])
    for lemma in sorted(series):
        w.writerow([lemma, repr(float(series[lemma]))])
    return buf.getvalue()
