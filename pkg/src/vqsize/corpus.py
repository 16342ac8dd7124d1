"""WAV ingestion and a deterministic synthetic multi-speaker corpus.

Synthetic speakers are order-16 all-pole filters driven by white Gaussian
noise. The mismatched test condition perturbs each speaker's reflection
coefficients (a fresh draw per sentence) and adds white observation noise.

Random numbers come from numpy's Philox4x32-10 counter-based generator
(Salmon et al., Random123, which publishes known-answer vectors), keyed
through ``SeedSequence`` by (master seed, speaker, condition, stream).
Gaussian draws use numpy's ``standard_normal``.
"""

from __future__ import annotations

import csv
import logging
import math
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .frontend import SAMPLE_RATE, FeatureSequence, FrontendConfig, Signal, extract_features

log = logging.getLogger(__name__)

TRAIN = "train"
MATCHED = "test-matched"
MISMATCHED = "test-mismatched"
CONDITIONS = (TRAIN, MATCHED, MISMATCHED)
_CONDITION_CODE = {TRAIN: 0, MATCHED: 1, MISMATCHED: 2}
# stream ids for draws that are not an excitation sequence
_FILTER_STREAM = 2 ** 31 - 1
_JITTER_OFFSET = 2 ** 29
_NOISE_OFFSET = 2 ** 30
_WARMUP = 512
TARGET_RMS = 0.1


class WavFormatError(ValueError):
    pass


@dataclass(frozen=True)
class SynthSpec:
    n_speakers: int = 10
    train_seconds: float = 60.0
    n_test_sentences: int = 5
    sentence_seconds: float = 2.5
    seed: int = 20240101
    k_max: float = 0.7
    jitter: float = 0.08
    snr_db: float = 20.0

    def __post_init__(self):
        if self.n_speakers < 2:
            raise ValueError("n_speakers must be >= 2")
        if self.train_seconds <= 0 or self.sentence_seconds <= 0:
            raise ValueError("durations must be positive")
        if self.n_test_sentences < 1:
            raise ValueError("n_test_sentences must be >= 1")
        if not 0 < self.k_max < 1:
            raise ValueError("k_max must lie in (0, 1)")
        if self.jitter < 0:
            raise ValueError("jitter must be non-negative")


@dataclass
class SpeakerModel:
    index: int
    reflection: np.ndarray
    lpc: np.ndarray

    @property
    def speaker(self) -> str:
        return speaker_id(self.index)


@dataclass
class Utterance:
    speaker: str
    condition: str
    utterance_id: str
    signal: Signal | None = None
    features: FeatureSequence | None = None
    source: str = ""

    def featurize(self, config: FrontendConfig | None = None) -> FeatureSequence:
        if self.features is None:
            if self.signal is None:
                raise ValueError(f"{self.utterance_id}: neither signal nor features present")
            self.features = extract_features(self.signal, config, speaker=self.speaker,
                                              condition=self.condition,
                                              utterance_id=self.utterance_id)
        return self.features


def speaker_id(index: int) -> str:
    return f"spk{index:03d}"


def rng(seed: int, speaker: int, condition: str, stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence([seed, speaker, _CONDITION_CODE[condition], stream])
    return np.random.Generator(np.random.Philox(ss))


def step_up(reflection) -> np.ndarray:
    """Direct-form a[1..p] of A(z) = 1 + sum a_k z^-k from reflection coefficients."""
    a = np.zeros(0)
    for k in np.asarray(reflection, dtype=float):
        a = np.concatenate([a + k * a[::-1], [k]])
    return a


def synth_speaker(index: int, spec: SynthSpec, order: int = 16) -> SpeakerModel:
    g = rng(spec.seed, index, TRAIN, _FILTER_STREAM)
    k = g.uniform(-spec.k_max, spec.k_max, size=order)
    return SpeakerModel(index, k, step_up(k))


def mismatched_filter(model: SpeakerModel, spec: SynthSpec, stream: int = 0) -> np.ndarray:
    """Jittered reflection coefficients for one mismatched sentence."""
    g = rng(spec.seed, model.index, MISMATCHED, _JITTER_OFFSET + stream)
    k = model.reflection + spec.jitter * g.standard_normal(len(model.reflection))
    return np.clip(k, -0.95, 0.95)


def _components(model: SpeakerModel, n: int, condition: str, spec: SynthSpec, stream: int):
    """Clean filtered excitation and additive noise, before level scaling."""
    g = rng(spec.seed, model.index, condition, stream)
    e = g.standard_normal(n + _WARMUP)
    if condition == MISMATCHED:
        a = step_up(mismatched_filter(model, spec, stream))
    else:
        a = model.lpc
    clean = lfilter([1.0], np.concatenate([[1.0], a]), e)[_WARMUP:]
    noise = np.zeros(n)
    if condition == MISMATCHED and math.isfinite(spec.snr_db):
        gn = rng(spec.seed, model.index, condition, _NOISE_OFFSET + stream)
        w = gn.standard_normal(n)
        p_clean = np.mean(clean ** 2)
        noise = w * math.sqrt(p_clean / 10 ** (spec.snr_db / 10) / np.mean(w ** 2))
    return clean, noise


def to_pcm16(x: np.ndarray) -> np.ndarray:
    return np.clip(np.round(x * 32768), -32768, 32767).astype(np.int16)


def synth_utterance(model: SpeakerModel, duration: float, condition: str, spec: SynthSpec,
                    stream: int, frame_len: int = 240) -> Utterance:
    """One utterance, level-normalised and quantised to the 16-bit grid.

    Quantising here makes the in-memory signal identical to what a WAV
    round trip would return.
    """
    if condition not in CONDITIONS:
        raise ValueError(f"unknown condition {condition!r}")
    n = int(round(duration * SAMPLE_RATE))
    if n < frame_len:
        raise ValueError(f"duration {duration}s is shorter than one analysis frame")
    clean, noise = _components(model, n, condition, spec, stream)
    x = clean + noise
    x *= TARGET_RMS / math.sqrt(np.mean(x ** 2))
    samples = to_pcm16(x) / 32768.0
    uid = f"{model.speaker}_{condition}_{stream:02d}"
    desc = f"synth:seed={spec.seed},speaker={model.index},condition={condition},stream={stream}"
    return Utterance(model.speaker, condition, uid, Signal(samples, SAMPLE_RATE), source=desc)


def build_corpus(spec: SynthSpec):
    """(train, matched test, mismatched test) utterance lists."""
    train, matched, mismatched = [], [], []
    for i in range(spec.n_speakers):
        model = synth_speaker(i, spec)
        train.append(synth_utterance(model, spec.train_seconds, TRAIN, spec, 0))
        for j in range(spec.n_test_sentences):
            matched.append(synth_utterance(model, spec.sentence_seconds, MATCHED, spec, j))
            mismatched.append(synth_utterance(model, spec.sentence_seconds, MISMATCHED, spec, j))
    return train, matched, mismatched


def load_wav(path) -> Signal:
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as w:
            channels, width, rate, n = (w.getnchannels(), w.getsampwidth(),
                                        w.getframerate(), w.getnframes())
            raw = w.readframes(n)
    except wave.Error as exc:
        msg = str(exc)
        if "unknown format" in msg:
            raise WavFormatError(f"{path}: unsupported WAV encoding ({msg}); expected 16-bit PCM") from None
        raise WavFormatError(f"{path}: malformed WAV ({msg})") from None
    except EOFError:
        raise WavFormatError(f"{path}: malformed WAV (truncated header)") from None
    if channels != 1:
        raise WavFormatError(f"{path}: {channels} channels; expected mono")
    if width != 2:
        raise WavFormatError(f"{path}: {8 * width}-bit samples; expected 16-bit PCM")
    if rate != SAMPLE_RATE:
        raise WavFormatError(f"unsupported sample rate {rate}; expected {SAMPLE_RATE}")
    samples = np.frombuffer(raw, dtype="<i2").astype(float) / 32768.0
    return Signal(samples, rate)


def save_wav(path, signal) -> None:
    """Write 16-bit mono PCM to a path or a binary file object."""
    samples = signal.samples if isinstance(signal, Signal) else np.asarray(signal, dtype=float)
    rate = signal.sample_rate if isinstance(signal, Signal) else SAMPLE_RATE
    with wave.open(path if hasattr(path, "write") else str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(rate)
        w.writeframes(to_pcm16(samples).astype("<i2").tobytes())


MANIFEST_FIELDS = ["utterance_id", "speaker", "condition", "path"]
FEATURE_MANIFEST_FIELDS = ["utterance_id", "speaker", "condition", "n_frames"]


def read_manifest(path) -> list:
    """Utterances listed in a corpus manifest or a feature-cache manifest.

    Paths are resolved relative to the manifest's directory. Corpus
    manifests yield utterances holding signals; feature manifests yield
    utterances holding cached features.
    """
    path = Path(path)
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        fields = reader.fieldnames or []
        rows = list(reader)
    if set(MANIFEST_FIELDS) <= set(fields):
        kind = "corpus"
    elif set(FEATURE_MANIFEST_FIELDS) <= set(fields):
        kind = "features"
    else:
        raise ValueError(f"{path}: not a corpus or feature manifest (columns {fields})")
    out = []
    for row in rows:
        if row["condition"] not in CONDITIONS:
            raise ValueError(f"{path}: unknown condition {row['condition']!r}")
        u = Utterance(row["speaker"], row["condition"], row["utterance_id"])
        if kind == "corpus":
            wav = path.parent / row["path"]
            u.signal = load_wav(wav)
            u.source = str(row["path"])
        else:
            csv_path = path.parent / f"{row['utterance_id']}.csv"
            u.features = read_feature_csv(csv_path, u)
            if len(u.features) != int(row["n_frames"]):
                raise ValueError(f"{csv_path}: {len(u.features)} frames, manifest says {row['n_frames']}")
            u.source = csv_path.name
        out.append(u)
    return out


def manifest_text(rows, fields) -> str:
    lines = [",".join(fields)]
    lines += [",".join(str(r[k]) for k in fields) for r in rows]
    return "\n".join(lines) + "\n"


def feature_csv_text(seq: FeatureSequence) -> str:
    lines = [",".join(f"c{i + 1}" for i in range(seq.dim))]
    lines += [",".join(repr(float(v)) for v in row) for row in seq.vectors]
    return "\n".join(lines) + "\n"


def read_feature_csv(path, utterance: Utterance | None = None) -> FeatureSequence:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if utterance is None:
        return FeatureSequence(data)
    return FeatureSequence(data, utterance.speaker, utterance.condition, utterance.utterance_id)
