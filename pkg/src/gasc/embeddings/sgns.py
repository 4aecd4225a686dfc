"""Skip-gram with negative sampling, plus the on-disk embedding format.

Training visits documents in the given order, every epoch; each document is
one sentence. There is no frequency subsampling and no dynamic window
shrinking. Input vectors start uniform in ``±0.5/dim``, output vectors at
zero. Negatives are drawn from the unigram distribution raised to 0.75,
pre-drawn chunk by chunk from one seeded generator, so a single-worker run is
a pure function of its inputs.
"""

from __future__ import annotations

import struct
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .. import _backend
from ..errors import InputError

MAGIC = b"GASCEMB\x00"
FORMAT_VERSION = 1
CHUNK_PAIRS = 200_000


@dataclass
class EmbeddingSpace:
    lemmas: tuple[str, ...]
    vectors: np.ndarray                # [V, dim] float64
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lemmas = tuple(self.lemmas)
        self.vectors = np.asarray(self.vectors, dtype=float)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.lemmas):
            raise InputError("vectors must be [V, dim] with one row per lemma")
        if len(set(self.lemmas)) != len(self.lemmas):
            raise InputError("duplicate lemma in embedding vocabulary")
        if not np.all(np.isfinite(self.vectors)):
            raise InputError("embedding contains non-finite values")
        self.index = {w: i for i, w in enumerate(self.lemmas)}

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __contains__(self, lemma) -> bool:
        return lemma in self.index

    def __getitem__(self, lemma: str) -> np.ndarray:
        return self.vectors[self.index[lemma]]

    def rows(self, lemmas: Sequence[str]) -> np.ndarray:
        return self.vectors[[self.index[w] for w in lemmas]]

    # binary format: magic, u32 version, u64 V, u32 dim, then per lemma a u32
    # byte length and UTF-8 bytes, then V*dim little-endian float32
    def to_bytes(self) -> bytes:
        parts = [MAGIC, struct.pack("<IQI", FORMAT_VERSION, len(self.lemmas), self.dim)]
        for w in self.lemmas:
            b = w.encode("utf-8")
            parts.append(struct.pack("<I", len(b)))
            parts.append(b)
        parts.append(self.vectors.astype("<f4").tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "EmbeddingSpace":
        if data[:len(MAGIC)] != MAGIC:
            raise InputError("not a gasc embedding file (bad magic)")
        off = len(MAGIC)
        try:
            version, V, dim = struct.unpack_from("<IQI", data, off)
            if version != FORMAT_VERSION:
                raise InputError(f"unsupported embedding format version {version}")
            off += struct.calcsize("<IQI")
            lemmas = []
            for _ in range(V):
                (n,) = struct.unpack_from("<I", data, off)
                off += 4
                lemmas.append(data[off:off + n].decode("utf-8"))
                off += n
        except struct.error:
            raise InputError("truncated embedding file") from None
        if len(data) - off != 4 * V * dim:
            raise InputError("embedding matrix size does not match header")
        vecs = np.frombuffer(data, dtype="<f4", offset=off).reshape(V, dim).astype(float)
        return cls(tuple(lemmas), vecs)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "EmbeddingSpace":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    def to_word2vec_text(self) -> str:
        lines = [f"{len(self.lemmas)} {self.dim}"]
        for w, row in zip(self.lemmas, self.vectors.astype(np.float32)):
            lines.append(w + " " + " ".join(repr(float(x)) for x in row))
        return "\n".join(lines) + "\n"


def _pair_count(n: int, window: int) -> int:
    i = np.arange(n)
    return int((np.minimum(n, i + window + 1) - np.maximum(0, i - window) - 1).sum())


def train_sgns(sentences: Iterable[Sequence[str]], dim: int = 100, window: int = 5,
               negatives: int = 5, epochs: int = 5, min_count: int = 2, seed: int = 0,
               alpha: float = 0.025, min_alpha: float = 1e-4, workers: int = 1) -> EmbeddingSpace:
    """Train input vectors on lemma sequences; returns them as the space.

    With ``workers > 1`` chunks run on threads sharing the weights (the
    compiled kernel releases the GIL); the learning-rate schedule and the
    negatives stay fixed but update interleaving, and hence the result, is
    no longer reproducible.
    """
    if dim < 2:
        raise InputError("dim must be >= 2")
    if window < 1 or negatives < 0 or epochs < 0 or workers < 1:
        raise InputError("window >= 1, negatives >= 0, epochs >= 0 and workers >= 1 required")
    sentences = [list(s) for s in sentences]
    if not any(sentences):
        raise InputError("empty training corpus")
    counts = Counter(w for s in sentences for w in s)
    lemmas = tuple(sorted(w for w, c in counts.items() if c >= min_count))
    if not lemmas:
        raise InputError(f"no lemma reaches min_count={min_count}")
    index = {w: i for i, w in enumerate(lemmas)}
    V = len(lemmas)
    rng = np.random.default_rng(seed)
    w_in = (rng.random((V, dim)) - 0.5) / dim
    w_out = np.zeros((V, dim))
    meta = {"dim": dim, "window": window, "negatives": negatives, "epochs": epochs,
            "min_count": min_count, "seed": seed, "alpha": alpha, "min_alpha": min_alpha}

    encoded = [np.array([index[w] for w in s if w in index], dtype=np.int64) for s in sentences]
    encoded = [s for s in encoded if s.size > 1]
    if epochs == 0 or not encoded:
        return EmbeddingSpace(lemmas, w_in, meta)

    freq = np.bincount(np.concatenate(encoded), minlength=V).astype(float) ** 0.75
    cdf = np.cumsum(freq / freq.sum())

    # fixed chunks of whole sentences, each with its own slice of negatives
    chunks, cur, cur_pairs = [], [], 0
    for s in encoded:
        cur.append(s)
        cur_pairs += _pair_count(s.size, window)
        if cur_pairs >= CHUNK_PAIRS:
            chunks.append((cur, cur_pairs))
            cur, cur_pairs = [], 0
    if cur:
        chunks.append((cur, cur_pairs))
    per_epoch = sum(p for _, p in chunks)
    total = per_epoch * epochs

    def jobs():
        done = 0
        for _ in range(epochs):
            for sents, n_pairs in chunks:
                tokens = np.concatenate(sents)
                indptr = np.concatenate([[0], np.cumsum([s.size for s in sents])]).astype(np.int64)
                negs = np.searchsorted(cdf, rng.random((n_pairs, negatives)), side="right")
                negs = np.minimum(negs, V - 1).astype(np.int64)
                yield tokens, indptr, negs, done
                done += n_pairs

    def run(job):
        tokens, indptr, negs, done = job
        _backend.sgns_chunk(w_in, w_out, tokens, indptr, window, negs, alpha, min_alpha, done, total)

    if workers == 1:
        for job in jobs():
            run(job)
    else:
        with ThreadPoolExecutor(workers) as ex:
            list(ex.map(run, jobs()))
    if not np.all(np.isfinite(w_in)):
        raise InputError("SGNS training diverged (non-finite vectors); lower the learning rate")
    return EmbeddingSpace(lemmas, w_in, meta)
