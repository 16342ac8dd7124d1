"""Experiment configuration: one flat ``key = value`` file.

Values are typed by the dataclass fields below. Lines starting with ``#``
are comments; unknown keys are rejected. Precedence is command-line flag,
then the ``VQSIZE_OUT`` environment variable (output directory only), then
the file, then the defaults here.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields
from fractions import Fraction
from pathlib import Path

from .codebook import NORM_MODES, LBGConfig
from .corpus import SynthSpec
from .frontend import FrontendConfig, frame_hop

OUT_ENV = "VQSIZE_OUT"
CONDITION_ALIASES = {"matched": "test-matched", "mismatched": "test-mismatched",
                     "test-matched": "test-matched", "test-mismatched": "test-mismatched"}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    # front end
    alpha: float = 0.95
    frame_len: int = 240
    overlap: float = 2 / 3
    order: int = 16
    # codebooks
    max_bits: int = 7
    epsilon: float = 0.01
    threshold: float = 1e-6
    max_iter: int = 100
    # synthetic corpus (used when no manifest is given)
    n_speakers: int = 10
    train_seconds: float = 60.0
    n_test_sentences: int = 5
    sentence_seconds: float = 2.5
    seed: int = 20240101
    jitter: float = 0.08
    snr_db: float = 20.0
    # corpus on disk
    manifest: str = ""
    codebooks: str = ""
    # size selection
    init_bits: str = "3"
    base_bits: str = "3"
    theta: float = 0.5
    norm_mode: str = "per_bits"
    tuning: str = "mismatched"
    scoring: str = "mismatched"
    ratio_condition: str = "matched"
    split: str = "same"
    n_tune: int = 2
    n_bins: int = 20
    out_dir: str = "out"

    def __post_init__(self):
        self.validate()

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(0 <= self.alpha < 1, "alpha must lie in [0, 1)")
        try:
            frame_hop(self.frame_len, self.overlap)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        need(1 <= self.order < self.frame_len, "order must lie in [1, frame_len)")
        need(0 <= self.max_bits <= 16, "max_bits must lie in [0, 16]")
        need(self.epsilon > 0, "epsilon must be positive")
        need(self.threshold >= 0, "threshold must be non-negative")
        need(self.max_iter >= 1, "max_iter must be >= 1")
        need(self.theta > 0, "theta must be positive")
        need(self.norm_mode in NORM_MODES, f"norm_mode must be one of {NORM_MODES}")
        for key in ("tuning", "scoring", "ratio_condition"):
            need(getattr(self, key) in CONDITION_ALIASES,
                 f"{key} must be 'matched' or 'mismatched'")
        need(self.split in ("same", "disjoint"), "split must be 'same' or 'disjoint'")
        need(self.n_tune >= 1, "n_tune must be >= 1")
        need(self.n_bins >= 1, "n_bins must be >= 1")
        for key in ("init_bits", "base_bits"):
            try:
                vals = self.bits_list(key)
            except ValueError:
                raise ConfigError(f"{key} must be a comma-separated list of integers") from None
            need(vals and all(0 <= v <= self.max_bits for v in vals),
                 f"{key} values must lie in [0, max_bits]")
        try:
            self.synth_spec()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def bits_list(self, key: str) -> list:
        return [int(v) for v in str(getattr(self, key)).split(",") if v.strip()]

    def frontend(self) -> FrontendConfig:
        return FrontendConfig(self.alpha, self.frame_len, self.overlap, self.order)

    def lbg(self) -> LBGConfig:
        return LBGConfig(self.epsilon, self.threshold, self.max_iter)

    def synth_spec(self) -> SynthSpec:
        return SynthSpec(self.n_speakers, self.train_seconds, self.n_test_sentences,
                         self.sentence_seconds, self.seed, jitter=self.jitter, snr_db=self.snr_db)

    def condition(self, key: str) -> str:
        return CONDITION_ALIASES[getattr(self, key)]

    def updated(self, **changes) -> "ExperimentConfig":
        cfg = dataclasses.replace(self, **{k: coerce(k, v) for k, v in changes.items()})
        return cfg


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def coerce(key: str, value):
    if key not in _FIELDS:
        raise ConfigError(f"unknown configuration key {key!r}")
    kind = _FIELDS[key].type
    if not isinstance(value, str):
        return value
    value = value.strip()
    try:
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(Fraction(value)) if "/" in value else float(value)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r} as {kind}") from None
    return value.strip("\"'")


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key = key.strip()
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = coerce(key, value)
    return values


def load_config(path=None, overrides: dict | None = None, env=None) -> ExperimentConfig:
    env = os.environ if env is None else env
    values = {}
    if path:
        values.update(parse_config_text(Path(path).read_text(), str(path)))
    if env.get(OUT_ENV):
        values["out_dir"] = env[OUT_ENV]
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = coerce(k, v)
    return ExperimentConfig(**values)


def config_text(cfg: ExperimentConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name} = {v!r}" if isinstance(v, float) else f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
