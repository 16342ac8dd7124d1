"""Minimum-distortion speaker identification over a bank of codebook families."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .codebook import CodebookFamily, avg_distortion, normalize_distortion
from .frontend import FeatureSequence

log = logging.getLogger(__name__)


@dataclass
class ModelBank:
    speakers: list
    families: list

    def __post_init__(self):
        self.speakers = [str(s) for s in self.speakers]
        if len(self.speakers) < 2:
            raise ValueError("a model bank needs at least 2 speakers")
        if len(self.families) != len(self.speakers):
            raise ValueError("one codebook family per speaker required")
        if len(set(self.speakers)) != len(self.speakers):
            raise ValueError("duplicate speaker ids in bank")
        dims = {f.dim for f in self.families}
        sizes = {f.max_bits for f in self.families}
        if len(dims) != 1 or len(sizes) != 1:
            raise ValueError("all families must share dimension and max_bits")
        self._index = {s: i for i, s in enumerate(self.speakers)}

    @property
    def max_bits(self) -> int:
        return self.families[0].max_bits

    @property
    def dim(self) -> int:
        return self.families[0].dim

    def index(self, speaker) -> int:
        try:
            return self._index[str(speaker)]
        except KeyError:
            raise KeyError(f"speaker {speaker!r} not in model bank") from None

    def family(self, speaker) -> CodebookFamily:
        return self.families[self.index(speaker)]

    def scaled(self, factor: float) -> "ModelBank":
        from .codebook import Codebook
        fams = [CodebookFamily([Codebook(cb.bits, cb.codewords * factor,
                                         cb.training_distortion * factor ** 2)
                                for cb in f.codebooks], f.speaker)
                for f in self.families]
        return ModelBank(list(self.speakers), fams)


def uniform_assignment(bank: ModelBank, bits: int) -> dict:
    return {s: int(bits) for s in bank.speakers}


def bits_vector(bank: ModelBank, assignment) -> np.ndarray:
    """Assignment as an int array in bank order; an int means uniform size."""
    if isinstance(assignment, (int, np.integer)):
        assignment = uniform_assignment(bank, int(assignment))
    assignment = {str(k): v for k, v in assignment.items()}
    if set(assignment) != set(bank.speakers):
        missing = set(bank.speakers) - set(assignment)
        extra = set(assignment) - set(bank.speakers)
        raise ValueError(f"assignment does not cover the bank (missing {sorted(missing)}, "
                         f"unknown {sorted(extra)})")
    vec = np.array([int(assignment[s]) for s in bank.speakers])
    if vec.min() < 0 or vec.max() > bank.max_bits:
        raise ValueError(f"assigned bits must lie in [0, {bank.max_bits}]")
    return vec


def identify(seq, bank: ModelBank, assignment, norm_mode: str = "per_bits"):
    """Speaker whose (normalised) average distortion on ``seq`` is smallest."""
    x = seq.vectors if isinstance(seq, FeatureSequence) else np.atleast_2d(seq)
    if len(x) == 0:
        raise ValueError("empty sequence")
    bits = bits_vector(bank, assignment)
    scores = [normalize_distortion(avg_distortion(x, fam[b]), b, norm_mode)
              for fam, b in zip(bank.families, bits)]
    return bank.speakers[int(np.argmin(scores))]


class ScoreTable:
    """Average distortion of every sentence against every codebook in a bank.

    ``dist[n, s, b]`` is the mean quantisation distortion of sentence ``n``
    under speaker ``s``'s codebook of ``b`` bits. Decisions for any size
    assignment are then array lookups, which keeps the size searches cheap.
    """

    def __init__(self, bank: ModelBank, test_set: Sequence[FeatureSequence]):
        self.bank = bank
        self.sequences = list(test_set)
        if any(len(s) == 0 for s in self.sequences):
            raise ValueError("empty sequence")
        self.labels = np.array([bank.index(s.speaker) if s.speaker is not None else -1
                                for s in self.sequences], dtype=int)
        self.dist = self._compute()

    def _compute(self) -> np.ndarray:
        n_sent = len(self.sequences)
        nb = self.bank.max_bits + 1
        out = np.zeros((n_sent, len(self.bank.speakers), nb))
        if n_sent == 0:
            return out
        x = np.vstack([s.vectors for s in self.sequences])
        offsets = np.cumsum([0] + [len(s) for s in self.sequences])[:-1]
        lens = np.array([len(s) for s in self.sequences])
        for si, fam in enumerate(self.bank.families):
            for b in range(nb):
                d = cdist(x, fam[b].codewords, "sqeuclidean").min(axis=1)
                out[:, si, b] = np.add.reduceat(d, offsets) / lens
        return out

    def subset(self, mask) -> "ScoreTable":
        new = object.__new__(ScoreTable)
        mask = np.asarray(mask)
        new.bank = self.bank
        idx = np.flatnonzero(mask) if mask.dtype == bool else mask
        new.sequences = [self.sequences[i] for i in idx]
        new.labels = self.labels[idx]
        new.dist = self.dist[idx]
        return new

    def scaled(self, factor: float) -> "ScoreTable":
        new = self.subset(np.arange(len(self.sequences)))
        new.dist = self.dist * factor
        return new

    def scores(self, bits, norm_mode: str = "per_bits") -> np.ndarray:
        bits = np.asarray(bits)
        s_idx = np.arange(len(bits))
        return normalize_distortion(self.dist[:, s_idx, bits], bits, norm_mode)

    def decide(self, bits, norm_mode: str = "per_bits") -> np.ndarray:
        return np.argmin(self.scores(bits, norm_mode), axis=1)

    def counts(self, bits, norm_mode: str = "per_bits"):
        """(n_test, n_correct) per bank speaker."""
        pred = self.decide(bits, norm_mode)
        k = len(self.bank.speakers)
        n_test = np.bincount(self.labels, minlength=k)
        n_correct = np.bincount(self.labels[pred == self.labels], minlength=k)
        return n_test, n_correct

    def overall_rate(self, bits, norm_mode: str = "per_bits") -> float:
        n_test, n_correct = self.counts(bits, norm_mode)
        has = n_test > 0
        return float(np.mean(n_correct[has] / n_test[has]))


@dataclass
class EvalReport:
    speakers: list
    n_test: np.ndarray
    n_correct: np.ndarray
    confusion: np.ndarray
    overall_rate: float
    bits: np.ndarray = None

    @property
    def rates(self) -> dict:
        return {s: c / n for s, n, c in zip(self.speakers, self.n_test, self.n_correct) if n > 0}

    @property
    def evaluated(self) -> list:
        return [s for s, n in zip(self.speakers, self.n_test) if n > 0]


def report_from_table(table: ScoreTable, assignment, norm_mode: str = "per_bits") -> EvalReport:
    bank = table.bank
    bits = bits_vector(bank, assignment)
    if np.any(table.labels < 0):
        raise ValueError("every test sequence needs a speaker label")
    pred = table.decide(bits, norm_mode)
    k = len(bank.speakers)
    confusion = np.zeros((k, k), dtype=int)
    np.add.at(confusion, (table.labels, pred), 1)
    n_test = confusion.sum(axis=1)
    n_correct = np.diag(confusion).copy()
    for s, n in zip(bank.speakers, n_test):
        if n == 0:
            warnings.warn(f"speaker {s} has no test sentences; excluded from rates")
    has = n_test > 0
    overall = float(np.mean(n_correct[has] / n_test[has])) if has.any() else float("nan")
    return EvalReport(list(bank.speakers), n_test, n_correct, confusion, overall, bits)


def evaluate(test_set, bank: ModelBank, assignment, norm_mode: str = "per_bits") -> EvalReport:
    """Per-speaker and overall identification rates.

    The overall rate averages the per-speaker rates, so every speaker
    weighs the same regardless of how many sentences it contributed.
    """
    table = test_set if isinstance(test_set, ScoreTable) else ScoreTable(bank, test_set)
    return report_from_table(table, assignment, norm_mode)


@dataclass
class DistortionStats:
    speaker: str
    bits: int
    mean_self: float
    std_other: float
    ratio: float
    degenerate: bool = False


def stats_from_table(table: ScoreTable, assignment) -> list:
    bank = table.bank
    bits = bits_vector(bank, assignment)
    out = []
    for si, s in enumerate(bank.speakers):
        b = int(bits[si])
        own = table.labels == si
        other = (table.labels != si) & (table.labels >= 0)
        if own.sum() < 1 or other.sum() < 2:
            raise ValueError(f"speaker {s} needs >= 1 own and >= 2 other test sentences")
        mean_self = float(table.dist[own, si, b].mean())
        std_other = float(np.std(table.dist[other, si, b], ddof=1))
        if mean_self == 0:
            out.append(DistortionStats(s, b, mean_self, std_other, math.inf, True))
        else:
            out.append(DistortionStats(s, b, mean_self, std_other, std_other / mean_self))
    return out


def distortion_stats(bank: ModelBank, assignment, test_set) -> list:
    """Own-sentence mean and other-sentence spread of distortions per speaker.

    ``std_other`` uses the n-1 divisor. A zero own-distortion gives an
    infinite ratio flagged as degenerate.
    """
    table = test_set if isinstance(test_set, ScoreTable) else ScoreTable(bank, test_set)
    return stats_from_table(table, assignment)


def self_distortions(table: ScoreTable, bits: int) -> np.ndarray:
    own = table.labels >= 0
    return table.dist[own, table.labels[own], bits]


def distortion_histogram(bank: ModelBank, test_set, bits: int, n_bins: int = 20):
    """Histogram of own-model sentence distortions at one codebook size.

    Returns ``(counts, edges)`` over ``[0, max observed]``.
    """
    if not 0 <= bits <= bank.max_bits:
        raise ValueError(f"bits must lie in [0, {bank.max_bits}]")
    table = test_set if isinstance(test_set, ScoreTable) else ScoreTable(bank, test_set)
    d = self_distortions(table, bits)
    top = float(d.max()) if d.size else 1.0
    if top <= 0:
        top = 1.0
    counts, edges = np.histogram(d, bins=n_bins, range=(0.0, top))
    return counts, edges
