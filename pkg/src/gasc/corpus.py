"""Corpus ingestion, time binning and snippet extraction.

Two on-disk formats are accepted:

* JSONL, one object per line::

    {"doc_id": "d1", "time": -3, "genre": "comedy", "lemmas": ["a", "b"]}

* TSV, ``doc_id<TAB>time<TAB>genre<TAB>space-joined lemmas``.

Records lacking a genre or a time value (or with no lemmas) are skipped and
counted in a skip report; structurally broken records raise
:class:`~gasc.errors.InputError` with the offending line number.
"""

from __future__ import annotations

import json
import logging
import sys
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError

log = logging.getLogger(__name__)

FORMATS = ("jsonl", "tsv")


@dataclass(frozen=True)
class Document:
    doc_id: str
    time_value: int
    genre: str
    lemmas: tuple[str, ...]


@dataclass(frozen=True)
class TimeBinning:
    """Half-open bins ``[e_i, e_{i+1})``; the last bin is closed on the right."""

    bin_edges: tuple[int, ...]

    def __post_init__(self):
        edges = self.bin_edges
        if len(edges) < 2:
            raise InputError("need at least two bin edges")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise InputError(f"bin edges must be strictly increasing: {edges}")

    @property
    def bin_count(self) -> int:
        return len(self.bin_edges) - 1

    def assign(self, time_value: int) -> int | None:
        edges = self.bin_edges
        if time_value < edges[0] or time_value > edges[-1]:
            return None
        if time_value == edges[-1]:
            return len(edges) - 2
        # bisect on the interior edges
        return int(np.searchsorted(edges, time_value, side="right")) - 1


@dataclass(frozen=True)
class Snippet:
    """One target occurrence.

    ``context`` is a bag of lemma strings straight out of
    :func:`extract_snippets`, and a bag of vocabulary indices after
    :func:`build_vocabulary` re-indexes it.
    """

    snippet_id: str
    time_bin: int
    genre: int
    context: tuple
    doc_id: str


class Vocabulary:
    """Bijective lemma <-> index map, ordered by lemma for stability."""

    def __init__(self, lemmas: Iterable[str]):
        self.lemmas: tuple[str, ...] = tuple(sorted(set(lemmas)))
        if not self.lemmas:
            raise InputError("empty vocabulary")
        self.index = {lemma: i for i, lemma in enumerate(self.lemmas)}

    def __len__(self) -> int:
        return len(self.lemmas)

    def __contains__(self, lemma) -> bool:
        return lemma in self.index

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.lemmas == other.lemmas

    def __repr__(self) -> str:
        return f"Vocabulary(V={len(self)})"

    @property
    def size(self) -> int:
        return len(self.lemmas)


class GenreIndex:
    """Maps free genre strings to contiguous indices.

    With ``scan=True`` every genre maps to index 0 (the genre-unaware model).
    ``keep`` restricts distinct indices to the listed genres; all others are
    pooled under ``other_label``.
    """

    def __init__(self, genres: Iterable[str], scan: bool = False,
                 keep: Sequence[str] | None = None, other_label: str = "OTHER"):
        genres = sorted(set(genres))
        self.scan = scan
        if scan:
            self.labels = ["ALL"]
            self._map = {g: 0 for g in genres}
        elif keep:
            keep_set = sorted(set(keep))
            self.labels = list(keep_set)
            if any(g not in keep_set for g in genres):
                self.labels.append(other_label)
            self._map = {g: (keep_set.index(g) if g in keep_set else len(keep_set))
                         for g in genres}
        else:
            self.labels = genres
            self._map = {g: i for i, g in enumerate(genres)}

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, genre: str) -> int:
        if genre in self._map:
            return self._map[genre]
        if self.scan:
            return 0
        raise InputError(f"unknown genre {genre!r}")


def _detect_format(path: Path) -> str:
    suffix = path.suffix.lower().lstrip(".")
    if suffix in ("jsonl", "ndjson", "json"):
        return "jsonl"
    if suffix in ("tsv", "txt"):
        return "tsv"
    raise InputError(f"cannot infer corpus format from {path.name!r}; pass format")


def _parse_time(raw, lineno):
    if isinstance(raw, bool):
        raise InputError(f"line {lineno}: time must be an integer, got {raw!r}")
    if isinstance(raw, int):
        return raw
    if isinstance(raw, float) and raw.is_integer():
        return int(raw)
    if isinstance(raw, str):
        try:
            return int(raw.strip())
        except ValueError:
            pass
    raise InputError(f"line {lineno}: time must be an integer, got {raw!r}")


def _parse_jsonl(lineno, line):
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise InputError(f"line {lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(rec, dict):
        raise InputError(f"line {lineno}: record must be a JSON object")
    if "doc_id" not in rec:
        raise InputError(f"line {lineno}: missing doc_id")
    lemmas = rec.get("lemmas")
    if not isinstance(lemmas, list) or not all(isinstance(x, str) for x in lemmas):
        raise InputError(f"line {lineno}: lemmas must be a list of strings")
    return str(rec["doc_id"]), rec.get("time"), rec.get("genre"), lemmas


def _parse_tsv(lineno, line):
    parts = line.split("\t")
    if len(parts) != 4:
        raise InputError(f"line {lineno}: expected 4 tab-separated fields, got {len(parts)}")
    doc_id, time_raw, genre, lemmas = parts
    return doc_id, (time_raw if time_raw.strip() else None), genre, lemmas.split()


def ingest(path, fmt: str | None = None, skipped: Counter | None = None) -> list[Document]:
    """Read a corpus file into documents.

    Parameters
    ----------
    path
        JSONL or TSV file.
    fmt
        ``"jsonl"`` or ``"tsv"``; inferred from the suffix when omitted.
    skipped
        Optional counter that receives skip counts per reason. A summary is
        also written to standard error.
    """
    path = Path(path)
    fmt = (fmt or _detect_format(path)).lower()
    if fmt not in FORMATS:
        raise InputError(f"unknown corpus format {fmt!r}")
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    parse = _parse_jsonl if fmt == "jsonl" else _parse_tsv

    report = Counter() if skipped is None else skipped
    docs: list[Document] = []
    seen: set[str] = set()
    n_records = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        n_records += 1
        doc_id, time_raw, genre, lemmas = parse(lineno, line.rstrip("\r"))
        if genre is None or (isinstance(genre, str) and not genre.strip()):
            report["missing_genre"] += 1
            continue
        if time_raw is None:
            report["missing_time"] += 1
            continue
        time_value = _parse_time(time_raw, lineno)
        if not lemmas:
            report["empty_lemmas"] += 1
            continue
        if doc_id in seen:
            raise InputError(f"line {lineno}: duplicate doc_id {doc_id!r}")
        seen.add(doc_id)
        docs.append(Document(doc_id, time_value, str(genre).strip(), tuple(lemmas)))

    if n_records == 0:
        raise InputError(f"{path}: empty corpus file")
    if report:
        summary = ", ".join(f"{k}={v}" for k, v in sorted(report.items()))
        print(f"gasc: skipped records in {path.name}: {summary}", file=sys.stderr)
    return docs


def bin_time(documents: Sequence[Document], bin_edges) -> tuple[TimeBinning, list[int]]:
    binning = TimeBinning(tuple(int(e) for e in bin_edges))
    assignment, offenders = [], []
    for doc in documents:
        b = binning.assign(doc.time_value)
        if b is None:
            offenders.append(f"{doc.doc_id}@{doc.time_value}")
        assignment.append(b)
    if offenders:
        shown = ", ".join(offenders[:20])
        more = f" (+{len(offenders) - 20} more)" if len(offenders) > 20 else ""
        raise InputError(f"documents outside bins {binning.bin_edges}: {shown}{more}")
    return binning, assignment


def extract_snippets(documents: Sequence[Document], target: str, window: int,
                     bins: Sequence[int] | None = None,
                     genres: GenreIndex | None = None) -> list[Snippet]:
    """One snippet per occurrence of ``target``.

    The context is up to ``window`` positions on each side, truncated at the
    document boundary. Every occurrence of the target is dropped from every
    context bag, including occurrences inside another occurrence's window.
    """
    if window < 1:
        raise InputError("window must be >= 1")
    if not target:
        raise InputError("target lemma must be non-empty")
    if bins is None:
        bins = [0] * len(documents)
    if genres is None:
        genres = GenreIndex((d.genre for d in documents))
    out = []
    for doc, b in zip(documents, bins):
        lemmas = doc.lemmas
        n = len(lemmas)
        for i, lemma in enumerate(lemmas):
            if lemma != target:
                continue
            lo, hi = max(0, i - window), min(n, i + window + 1)
            ctx = tuple(w for w in lemmas[lo:i] + lemmas[i + 1:hi] if w != target)
            out.append(Snippet(f"{doc.doc_id}:{i}", b, genres[doc.genre], ctx, doc.doc_id))
    return out


def build_vocabulary(snippets: Sequence[Snippet], min_count: int = 2
                     ) -> tuple[Vocabulary, list[Snippet]]:
    """Vocabulary over context lemmas seen at least ``min_count`` times.

    Returns the vocabulary and the snippets with contexts re-indexed;
    out-of-vocabulary lemmas are dropped from the bags.
    """
    if min_count < 1:
        raise InputError("min_count must be >= 1")
    counts = Counter(w for s in snippets for w in s.context)
    kept = [w for w, c in counts.items() if c >= min_count]
    if not kept:
        raise InputError(f"no context lemma reaches min_count={min_count}")
    vocab = Vocabulary(kept)
    idx = vocab.index
    indexed = [Snippet(s.snippet_id, s.time_bin, s.genre,
                       tuple(idx[w] for w in s.context if w in idx), s.doc_id)
               for s in snippets]
    return vocab, indexed


def write_jsonl(documents: Iterable[Document], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in documents:
            fh.write(json.dumps({"doc_id": d.doc_id, "time": d.time_value,
                                 "genre": d.genre, "lemmas": list(d.lemmas)},
                                ensure_ascii=False) + "\n")
