"""Binary change decisions from posterior sense-probability trajectories.

A sense is *changed* when its posterior mean probability differs between two
time bins by at least twice the posterior standard deviation. Trajectories
are ``[T, G, K]``; any genre suffices.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import GascError, InputError
from .gibbs import PosteriorTrajectory

RULES = ("any-pair", "endpoints")
SIGMAS = ("max", "pooled", "either")
TSV_HEADER = ["lemma", "changed", "sense", "genre", "t1", "t2", "direction", "magnitude"]


@dataclass(frozen=True)
class Evidence:
    sense: int
    genre: int
    t1: int
    t2: int
    direction: str  # "rise" or "drop"
    magnitude: float


@dataclass(frozen=True)
class ChangeDecision:
    changed: bool
    evidence: Evidence | None = None

    def __post_init__(self):
        if self.changed != (self.evidence is not None):
            raise ValueError("evidence must be present exactly when changed")


def _scale(s1, s2, sigma):
    if sigma == "max":
        return np.maximum(s1, s2)
    if sigma == "pooled":
        return np.sqrt(0.5 * (s1 ** 2 + s2 ** 2))
    return np.minimum(s1, s2)  # "either": exceeding 2 std of either bin suffices


def detect_change(traj: PosteriorTrajectory, rule: str = "any-pair", sigma: str = "max",
                  n_sigma: float = 2.0) -> ChangeDecision:
    """Apply the two-sigma rule to one trajectory.

    ``rule`` selects the bin pairs compared: every ``t1 < t2`` or only the
    first and last bin. ``sigma`` selects the reference deviation: the larger
    of the two bins' stds (default), their root mean square, or the smaller.
    Ties count as changed. Evidence is the qualifying (sense, genre, pair)
    with the largest absolute difference; earlier tuples win exact ties.
    """
    if rule not in RULES:
        raise InputError(f"unknown rule {rule!r}; choose from {RULES}")
    if sigma not in SIGMAS:
        raise InputError(f"unknown sigma {sigma!r}; choose from {SIGMAS}")
    mean, std = traj.mean, traj.std
    T = mean.shape[0]
    if T < 2:
        raise InputError("change detection needs at least two time bins")
    pairs = [(0, T - 1)] if rule == "endpoints" else [(i, j) for i in range(T) for j in range(i + 1, T)]

    best = None
    for t1, t2 in pairs:
        diff = mean[t2] - mean[t1]                     # [G, K]
        ok = np.abs(diff) >= n_sigma * _scale(std[t1], std[t2], sigma)
        if not ok.any():
            continue
        mag = np.where(ok, np.abs(diff), -1.0)
        g, k = np.unravel_index(int(np.argmax(mag)), mag.shape)
        cand = (float(mag[g, k]), -g, -k, -t1, -t2)
        if best is None or cand > best[0]:
            best = (cand, Evidence(int(k), int(g), t1, t2,
                                   "rise" if diff[g, k] > 0 else "drop", float(abs(diff[g, k]))))
    if best is None:
        return ChangeDecision(False)
    return ChangeDecision(True, best[1])


def detect_change_batch(trajectories: Mapping[str, PosteriorTrajectory], **kwargs):
    """Decide every lemma independently.

    Returns ``(decisions, errors)``: both dicts keyed by lemma in sorted
    order; a lemma whose trajectory is rejected lands in ``errors`` with the
    message, the others are still decided.
    """
    if not trajectories:
        raise InputError("no trajectories given")
    decisions, errors = {}, {}
    for lemma in sorted(trajectories):
        try:
            decisions[lemma] = detect_change(trajectories[lemma], **kwargs)
        except GascError as exc:
            errors[lemma] = str(exc)
    return decisions, errors


def decisions_to_tsv(decisions: Mapping[str, ChangeDecision]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="\t", lineterminator="\n")
    w.writerow(TSV_HEADER)
    for lemma in sorted(decisions):
        d = decisions[lemma]
        e = d.evidence
        if e is None:
            w.writerow([lemma, 0, "", "", "", "", "", ""])
        else:
            w.writerow([lemma, 1, e.sense, e.genre, e.t1, e.t2, e.direction, repr(e.magnitude)])
    return buf.getvalue()


def read_predictions(text: str) -> dict[str, bool]:
    """Parse a decision TSV (as written above) into lemma -> changed."""
    out = {}
    rows = csv.reader(io.StringIO(text), delimiter="\t")
    for lineno, row in enumerate(rows, start=1):
        if not row or (lineno == 1 and row[0] == "lemma"):
            continue
        if len(row) < 2 or row[1] not in ("0", "1"):
            raise InputError(f"line {lineno}: expected lemma<TAB>0|1")
        if row[0] in out:
            raise InputError(f"line {lineno}: duplicate lemma {row[0]!r}")
        out[row[0]] = row[1] == "1"
    return out
