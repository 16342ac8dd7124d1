"""Per-speaker codebook size selection.

Three procedures over a trained model bank and a tuning set:

* ``per_speaker_sweep``: every speaker at a common size, read off the
  smallest size at which each speaker's own rate peaks.
* ``greedy_size_search``: forward selection, one speaker gains one bit
  per iteration while the overall rate strictly improves.
* ``ratio_criterion_assign``: one pass; speakers whose spread-to-distortion
  ratio falls below ``theta`` times the average ratio gain one bit.
"""

from __future__ import annotations

import logging
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from decimal import Decimal

import numpy as np

from .identify import ModelBank, ScoreTable, bits_vector, stats_from_table

log = logging.getLogger(__name__)

# overall rates are means of small fractions; equal rates reached along
# different paths may differ in the last ulp
RATE_TOL = 1e-12


def combination_count(num_sizes: int, num_speakers: int) -> int:
    """Number of joint size assignments, ``num_sizes ** num_speakers``."""
    if num_sizes < 1 or num_speakers < 1:
        raise ValueError("num_sizes and num_speakers must be >= 1")
    return num_sizes ** num_speakers


def sci(n: int, digits: int = 2) -> str:
    """Scientific rendering with ``digits`` significant digits, e.g. '1.8e44'."""
    mant, _, exp = f"{Decimal(n):.{digits - 1}e}".partition("e")
    return f"{mant}e{int(exp)}"


def mean_bits(assignment) -> float:
    """log2 of the mean codebook size, all speakers equally likely."""
    bits = list(assignment.values()) if isinstance(assignment, dict) else list(assignment)
    if not bits:
        raise ValueError("empty assignment")
    return math.log2(math.fsum(2.0 ** int(b) for b in bits) / len(bits))


def _table(bank, tuning_set) -> ScoreTable:
    return tuning_set if isinstance(tuning_set, ScoreTable) else ScoreTable(bank, tuning_set)


@dataclass
class SweepResult:
    speakers: list
    bits: list
    rates: np.ndarray  # speaker x bits
    overall: np.ndarray
    optimal_bits: dict
    histogram: dict


def min_argmax(row) -> int:
    row = np.asarray(row, dtype=float)
    return int(np.flatnonzero(row >= row.max() - RATE_TOL)[0])


def per_speaker_sweep(bank: ModelBank, tuning_set, bits_range=None,
                      norm_mode: str = "per_bits") -> SweepResult:
    table = _table(bank, tuning_set)
    bits_range = list(range(bank.max_bits + 1)) if bits_range is None else list(bits_range)
    if not bits_range or min(bits_range) < 0 or max(bits_range) > bank.max_bits:
        raise ValueError(f"bits_range must lie within [0, {bank.max_bits}]")
    k = len(bank.speakers)
    rates = np.zeros((k, len(bits_range)))
    overall = np.zeros(len(bits_range))
    for j, b in enumerate(bits_range):
        n_test, n_correct = table.counts(np.full(k, b), norm_mode)
        with np.errstate(invalid="ignore", divide="ignore"):
            rates[:, j] = np.where(n_test > 0, n_correct / np.maximum(n_test, 1), np.nan)
        overall[j] = np.nanmean(rates[:, j])
    evaluated = ~np.isnan(rates[:, 0])
    optimal = {s: bits_range[min_argmax(rates[i])]
               for i, s in enumerate(bank.speakers) if evaluated[i]}
    counts = Counter(optimal.values())
    histogram = {b: counts.get(b, 0) for b in bits_range}
    return SweepResult(list(bank.speakers), bits_range, rates, overall, optimal, histogram)


@dataclass
class GreedyStep:
    speaker: str
    new_bits: int
    overall_rate: float
    mean_bits: float
    # overall rate of every single-increment candidate, nan where capped
    candidates: np.ndarray = field(repr=False, default=None)


@dataclass
class GreedyTrace:
    init_bits: int
    initial_rate: float
    iterations: list
    assignment: dict

    @property
    def final_rate(self) -> float:
        return self.iterations[-1].overall_rate if self.iterations else self.initial_rate

    def increments(self) -> dict:
        """How many speakers ended 0, 1, 2, ... bits above the start."""
        return dict(sorted(Counter(b - self.init_bits for b in self.assignment.values()).items()))


def greedy_size_search(bank: ModelBank, tuning_set, init_bits: int, max_bits: int | None = None,
                       norm_mode: str = "per_bits") -> GreedyTrace:
    """Grow one speaker's codebook by one bit per step while the rate improves.

    Each step tries every speaker still below ``max_bits`` and keeps the
    increment with the highest overall rate; ties go to the speaker with the
    fewest bits, then to the earliest in bank order. Stops as soon as the
    best candidate does not strictly beat the current rate.
    """
    table = _table(bank, tuning_set)
    max_bits = bank.max_bits if max_bits is None else min(max_bits, bank.max_bits)
    if not 0 <= init_bits <= max_bits:
        raise ValueError(f"init_bits must lie in [0, {max_bits}]")
    k = len(bank.speakers)
    bits = np.full(k, init_bits)
    current = table.overall_rate(bits, norm_mode)
    initial = current
    steps = []
    while True:
        cand = np.full(k, np.nan)
        for i in range(k):
            if bits[i] < max_bits:
                trial = bits.copy()
                trial[i] += 1
                cand[i] = table.overall_rate(trial, norm_mode)
        if np.all(np.isnan(cand)):
            break
        best_rate = np.nanmax(cand)
        if best_rate <= current + RATE_TOL:
            break
        tied = np.flatnonzero(cand >= best_rate - RATE_TOL)
        choice = int(min(tied, key=lambda i: (bits[i], i)))
        bits[choice] += 1
        current = float(cand[choice])
        steps.append(GreedyStep(bank.speakers[choice], int(bits[choice]), current,
                                mean_bits(bits), cand))
        log.debug("greedy: %s -> %d bits, rate %.4f", bank.speakers[choice], bits[choice], current)
    assignment = {s: int(b) for s, b in zip(bank.speakers, bits)}
    return GreedyTrace(init_bits, initial, steps, assignment)


def assign_by_ratios(speakers, ratios, base_bits: int, theta: float = 0.5,
                     degenerate=None) -> dict:
    """Give one extra bit to speakers whose ratio is below theta * mean ratio.

    Degenerate speakers are left out of the mean and keep ``base_bits``.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    speakers = list(speakers)
    ratios = np.asarray(ratios, dtype=float)
    degenerate = np.zeros(len(ratios), bool) if degenerate is None else np.asarray(degenerate, bool)
    degenerate = degenerate | ~np.isfinite(ratios)
    for s in (s for s, d in zip(speakers, degenerate) if d):
        warnings.warn(f"speaker {s} has a degenerate distortion ratio; kept at {base_bits} bits")
    valid = ~degenerate
    if not valid.any():
        return {s: base_bits for s in speakers}
    threshold = theta * ratios[valid].mean()
    return {s: base_bits + 1 if ok and r < threshold else base_bits
            for s, r, ok in zip(speakers, ratios, valid)}


def ratio_criterion_assign(bank: ModelBank, tuning_set, base_bits: int, theta: float = 0.5,
                           norm_mode: str = "per_bits") -> dict:
    # the ratio compares each speaker's codebook with itself, so the
    # normalisation mode cancels; kept in the signature for symmetry
    if not 0 <= base_bits < bank.max_bits:
        raise ValueError(f"base_bits must lie in [0, {bank.max_bits - 1}]")
    stats = stats_from_table(_table(bank, tuning_set), base_bits)
    return assign_by_ratios(bank.speakers, [st.ratio for st in stats], base_bits, theta,
                            [st.degenerate for st in stats])


def assignment_rate(bank: ModelBank, scoring_set, assignment, norm_mode: str = "per_bits") -> float:
    return _table(bank, scoring_set).overall_rate(bits_vector(bank, assignment), norm_mode)
