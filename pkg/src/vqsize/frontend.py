"""Speech front end: pre-emphasis, framing, Hamming window, LPC cepstrum.

Everything here operates on 8 kHz mono signals held in memory. The
per-frame LPC work is vectorised over frames; the single-frame functions
are thin wrappers around the batched versions so both paths share one
recursion.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

SAMPLE_RATE = 8000


class DegenerateFrameError(ValueError):
    pass


class UnstableRecursionError(ValueError):
    pass


class NoFeaturesError(ValueError):
    pass


@dataclass(frozen=True)
class FrontendConfig:
    alpha: float = 0.95
    frame_len: int = 240
    overlap: float = 2 / 3
    order: int = 16

    @property
    def hop(self) -> int:
        return frame_hop(self.frame_len, self.overlap)


@dataclass
class Signal:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)

    def __len__(self):
        return len(self.samples)


@dataclass
class FeatureSequence:
    """Cepstral vectors of one utterance, shape ``(n_frames, p)``."""

    vectors: np.ndarray
    speaker: str | None = None
    condition: str | None = None
    utterance_id: str | None = None
    skipped: int = 0

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=float)
        if v.ndim == 1:
            v = v.reshape(1, -1)
        if v.ndim != 2:
            raise ValueError("feature vectors must form a 2-D array")
        self.vectors = v

    def __len__(self):
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def scaled(self, factor: float) -> "FeatureSequence":
        return FeatureSequence(self.vectors * factor, self.speaker, self.condition,
                               self.utterance_id, self.skipped)


def _samples(signal) -> np.ndarray:
    if isinstance(signal, Signal):
        return signal.samples
    return np.asarray(signal, dtype=float)


def preemphasize(signal, alpha: float = 0.95) -> np.ndarray:
    x = _samples(signal)
    if x.size == 0:
        raise ValueError("empty input")
    if not 0 <= alpha < 1:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    y = x.copy()
    y[1:] = x[1:] - alpha * x[:-1]
    return y


def frame_hop(frame_len: int, overlap: float) -> int:
    if frame_len < 2:
        raise ValueError("frame_len must be >= 2")
    if not 0 <= overlap < 1:
        raise ValueError("overlap must lie in [0, 1)")
    hop = int(round(frame_len * (1 - overlap)))
    if hop < 1:
        raise ValueError("overlap leaves a hop shorter than one sample")
    return hop


def frame_signal(signal, frame_len: int = 240, overlap: float = 2 / 3) -> np.ndarray:
    """Split into frames of ``frame_len`` starting every hop samples.

    Returns an array of shape ``(n_frames, frame_len)``; a short tail is
    dropped, so a signal shorter than one frame gives zero rows.
    """
    x = _samples(signal)
    hop = frame_hop(frame_len, overlap)
    if len(x) < frame_len:
        return np.empty((0, frame_len))
    n = (len(x) - frame_len) // hop + 1
    starts = np.arange(n) * hop
    return x[starts[:, None] + np.arange(frame_len)]


def hamming(frame_len: int) -> np.ndarray:
    if frame_len < 2:
        raise ValueError("frame_len must be >= 2")
    n = np.arange(frame_len)
    return 0.54 - 0.46 * np.cos(2 * np.pi * n / (frame_len - 1))


def apply_hamming(frames) -> np.ndarray:
    frames = np.asarray(frames, dtype=float)
    return frames * hamming(frames.shape[-1])


def autocorrelate(frames, max_lag: int) -> np.ndarray:
    """r[k] = sum_n x[n] x[n-k] for k = 0..max_lag (last axis = time)."""
    x = np.asarray(frames, dtype=float)
    L = x.shape[-1]
    if max_lag >= L:
        raise ValueError(f"max_lag {max_lag} must be smaller than frame length {L}")
    r = np.empty(x.shape[:-1] + (max_lag + 1,))
    for k in range(max_lag + 1):
        r[..., k] = np.sum(x[..., k:] * x[..., :L - k], axis=-1)
    return r


def levinson_batch(r: np.ndarray, order: int, tol: float = 1e-9):
    """Levinson-Durbin over rows of ``r`` with A(z) = 1 + sum a_k z^-k.

    Returns ``(a, err, k, ok)``: coefficients ``(n, order)``, the
    prediction error after each order ``(n, order + 1)``, reflection
    coefficients ``(n, order)`` and a mask of rows that were neither
    degenerate (r[0] <= 0) nor unstable (|k| > 1 + tol). Rows that fail
    are left as zeros from the failing order on.
    """
    r = np.atleast_2d(np.asarray(r, dtype=float))
    if r.shape[1] < order + 1:
        raise ValueError(f"need {order + 1} autocorrelation lags, got {r.shape[1]}")
    n = r.shape[0]
    a = np.zeros((n, order))
    err = np.zeros((n, order + 1))
    refl = np.zeros((n, order))
    ok = r[:, 0] > 0
    E = np.where(ok, r[:, 0], 1.0)
    err[:, 0] = np.where(ok, r[:, 0], 0.0)
    for m in range(1, order + 1):
        acc = r[:, m] + np.einsum("ij,ij->i", a[:, :m - 1], r[:, m - 1:0:-1])
        k = np.where(ok, -acc / E, 0.0)
        bad = np.abs(k) > 1 + tol
        if bad.any():
            ok &= ~bad
            k = np.where(ok, k, 0.0)
        prev = a[:, :m - 1].copy()
        a[:, :m - 1] = prev + k[:, None] * prev[:, ::-1]
        a[:, m - 1] = k
        refl[:, m - 1] = k
        E = E * (1 - k * k)
        err[:, m] = np.where(ok, np.maximum(E, 0.0), 0.0)
    a[~ok] = 0.0
    return a, err, refl, ok


def levinson_durbin(r, order: int, tol: float = 1e-9) -> tuple[np.ndarray, float]:
    """LPC coefficients a[1..order] and the final prediction error."""
    r = np.asarray(r, dtype=float)
    if r[0] <= 0:
        raise DegenerateFrameError("degenerate frame")
    a, err, _, ok = levinson_batch(r[None, :], order, tol)
    if not ok[0]:
        raise UnstableRecursionError("unstable recursion")
    return a[0], float(err[0, -1])


def lpc_to_cepstrum(lpc, n_ceps: int | None = None) -> np.ndarray:
    """Cepstrum c_1..c_q of the all-pole model 1/A(z).

    Accepts one coefficient vector or a batch ``(n, p)``. Orders beyond p
    treat the missing a_n as zero.
    """
    a = np.asarray(lpc, dtype=float)
    single = a.ndim == 1
    a = np.atleast_2d(a)
    p = a.shape[1]
    q = p if n_ceps is None else n_ceps
    a_ext = np.zeros((a.shape[0], q + 1))
    a_ext[:, 1:min(p, q) + 1] = a[:, :q]
    c = np.zeros((a.shape[0], q + 1))
    for n in range(1, q + 1):
        k = np.arange(1, n)
        acc = (c[:, 1:n] * k * a_ext[:, n - 1:0:-1]).sum(axis=1) if n > 1 else 0.0
        c[:, n] = -a_ext[:, n] - acc / n
    out = c[:, 1:]
    return out[0] if single else out


def extract_features(signal, config: FrontendConfig | None = None, *,
                     speaker=None, condition=None, utterance_id=None) -> FeatureSequence:
    """Full analysis chain from 8 kHz samples to LPC cepstra.

    Frames whose recursion is degenerate (silence) or unstable are dropped;
    the count is kept in ``FeatureSequence.skipped``.
    """
    config = config or FrontendConfig()
    if isinstance(signal, Signal) and signal.sample_rate != SAMPLE_RATE:
        raise ValueError(f"unsupported sample rate {signal.sample_rate}; expected {SAMPLE_RATE}")
    x = preemphasize(signal, config.alpha)
    frames = apply_hamming(frame_signal(x, config.frame_len, config.overlap))
    if len(frames) == 0:
        raise NoFeaturesError("no features extracted")
    r = autocorrelate(frames, config.order)
    a, _, _, ok = levinson_batch(r, config.order)
    skipped = int((~ok).sum())
    if skipped:
        log.debug("skipped %d of %d frames", skipped, len(frames))
    if not ok.any():
        raise NoFeaturesError("no features extracted")
    ceps = lpc_to_cepstrum(a[ok], config.order)
    return FeatureSequence(ceps, speaker=speaker, condition=condition,
                           utterance_id=utterance_id, skipped=skipped)
