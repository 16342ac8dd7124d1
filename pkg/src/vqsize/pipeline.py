"""Glue between corpus, front end, codebooks and score tables."""

from __future__ import annotations

import logging
from collections import defaultdict
from functools import cached_property
from pathlib import Path

import numpy as np

from .codebook import load_family, train_family
from .config import ExperimentConfig
from .corpus import MATCHED, MISMATCHED, TRAIN, build_corpus, read_manifest
from .frontend import FeatureSequence
from .identify import ModelBank, ScoreTable

log = logging.getLogger(__name__)


def train_bank(train_features, max_bits: int, lbg=None) -> ModelBank:
    """One codebook family per speaker from all of that speaker's training data."""
    by_speaker = defaultdict(list)
    for seq in train_features:
        by_speaker[seq.speaker].append(seq.vectors)
    if not by_speaker:
        raise ValueError("no training utterances")
    speakers = sorted(by_speaker)
    families = []
    for s in speakers:
        x = np.vstack(by_speaker[s])
        families.append(train_family(x, max_bits, lbg, speaker=s))
    # families may have been clamped differently; keep a common size
    top = min(f.max_bits for f in families)
    for f in families:
        del f.codebooks[top + 1:]
    return ModelBank(speakers, families)


def load_bank(directory) -> ModelBank:
    paths = sorted(Path(directory).glob("*.csv"))
    if not paths:
        raise ValueError(f"{directory}: no codebook files")
    families = [load_family(p) for p in paths]
    return ModelBank([f.speaker for f in families], families)


class Experiment:
    """Utterances, features and a model bank described by one config."""

    def __init__(self, cfg: ExperimentConfig, manifest=None, codebooks=None):
        self.cfg = cfg
        self.manifest = manifest or cfg.manifest or None
        self.codebooks = codebooks or cfg.codebooks or None

    @cached_property
    def utterances(self) -> list:
        if self.manifest:
            return read_manifest(self.manifest)
        train, matched, mismatched = build_corpus(self.cfg.synth_spec())
        return train + matched + mismatched

    @cached_property
    def features(self) -> list:
        front = self.cfg.frontend()
        return [u.featurize(front) for u in self.utterances]

    def by_condition(self, condition: str) -> list:
        return [f for f in self.features if f.condition == condition]

    @cached_property
    def bank(self) -> ModelBank:
        if self.codebooks:
            return load_bank(self.codebooks)
        return train_bank(self.by_condition(TRAIN), self.cfg.max_bits, self.cfg.lbg())

    def _table(self, condition: str) -> ScoreTable:
        seqs = [s for s in self.by_condition(condition) if s.speaker in set(self.bank.speakers)]
        return ScoreTable(self.bank, seqs)

    @cached_property
    def tables(self) -> dict:
        return {c: self._table(c) for c in (MATCHED, MISMATCHED) if self.by_condition(c)}

    def table(self, condition: str) -> ScoreTable:
        if condition not in self.tables:
            raise ValueError(f"corpus has no {condition} utterances")
        return self.tables[condition]

    def _split_mask(self, table: ScoreTable) -> np.ndarray:
        """True for the first ``n_tune`` sentences of each speaker."""
        seen = defaultdict(int)
        mask = np.zeros(len(table.labels), bool)
        for i, lab in enumerate(table.labels):
            mask[i] = seen[lab] < self.cfg.n_tune
            seen[lab] += 1
        return mask

    def tuning_and_scoring(self, tune_key: str = "tuning"):
        """Score tables for choosing sizes and for reporting rates.

        With ``split = same`` both come from the full sets (sizes chosen
        with hindsight). With ``split = disjoint`` and one condition for
        both, the first ``n_tune`` sentences per speaker tune and the rest
        score.
        """
        tune_c, score_c = self.cfg.condition(tune_key), self.cfg.condition("scoring")
        tune, score = self.table(tune_c), self.table(score_c)
        if self.cfg.split == "disjoint":
            if tune_c == score_c:
                mask = self._split_mask(tune)
                if mask.all():
                    raise ValueError("n_tune leaves no sentences for scoring")
                tune, score = tune.subset(mask), score.subset(~mask)
        return tune, score
