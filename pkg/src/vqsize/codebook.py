"""VQ codebooks trained by LBG binary splitting.

One training run produces the whole nested family 2^0 .. 2^max_bits, which
is what the size-selection code sweeps over.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .frontend import FeatureSequence

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
NORM_MODES = ("none", "per_bits")


@dataclass(frozen=True)
class LBGConfig:
    epsilon: float = 0.01
    threshold: float = 1e-6
    max_iter: int = 100


@dataclass
class Codebook:
    bits: int
    codewords: np.ndarray
    training_distortion: float = float("nan")
    # distortion of every Lloyd partition at this size, in order
    history: list = field(default_factory=list)

    def __post_init__(self):
        self.codewords = np.atleast_2d(np.asarray(self.codewords, dtype=float))
        if self.codewords.shape[0] != 2 ** self.bits:
            raise ValueError(f"{self.codewords.shape[0]} codewords for {self.bits} bits")
        if not np.all(np.isfinite(self.codewords)):
            raise ValueError("non-finite codeword")

    @property
    def dim(self) -> int:
        return self.codewords.shape[1]

    def __len__(self):
        return self.codewords.shape[0]


@dataclass
class CodebookFamily:
    codebooks: list
    speaker: str | None = None

    @property
    def max_bits(self) -> int:
        return len(self.codebooks) - 1

    @property
    def dim(self) -> int:
        return self.codebooks[0].dim

    def __getitem__(self, bits: int) -> Codebook:
        return self.codebooks[bits]

    def __len__(self):
        return len(self.codebooks)

    def distortions(self) -> np.ndarray:
        return np.array([cb.training_distortion for cb in self.codebooks])


def _as_array(features) -> np.ndarray:
    if isinstance(features, FeatureSequence):
        return features.vectors
    return np.atleast_2d(np.asarray(features, dtype=float))


def nearest(x: np.ndarray, codewords: np.ndarray):
    """Index of, and squared distance to, the nearest codeword per row.

    np.argmin returns the first minimum, so ties go to the lowest index.
    """
    d = cdist(x, codewords, "sqeuclidean")
    idx = np.argmin(d, axis=1)
    return idx, d[np.arange(len(x)), idx]


def quantize(v, cb: Codebook) -> tuple[int, float]:
    v = np.asarray(v, dtype=float)
    if v.shape != (cb.dim,):
        raise ValueError(f"vector of shape {v.shape} does not match codebook dimension {cb.dim}")
    idx, dist = nearest(v[None, :], cb.codewords)
    return int(idx[0]), float(dist[0])


def avg_distortion(seq, cb: Codebook) -> float:
    x = _as_array(seq)
    if x.shape[0] == 0:
        raise ValueError("empty sequence")
    if x.shape[1] != cb.dim:
        raise ValueError(f"feature dimension {x.shape[1]} does not match codebook dimension {cb.dim}")
    return float(nearest(x, cb.codewords)[1].mean())


def normalize_distortion(d, bits, mode: str = "per_bits"):
    if mode == "none":
        return d
    if mode == "per_bits":
        return d / np.maximum(bits, 1)
    raise ValueError(f"unknown normalization mode {mode!r}; expected one of {NORM_MODES}")


def _split(codewords: np.ndarray, eps: float) -> np.ndarray:
    return np.vstack([codewords * (1 + eps), codewords * (1 - eps)])


def _lloyd(x: np.ndarray, codewords: np.ndarray, cfg: LBGConfig):
    """Refine ``codewords`` in place of a copy; returns (codewords, history)."""
    cw = codewords.copy()
    history = []
    prev = math.inf
    for _ in range(cfg.max_iter):
        idx, dist = nearest(x, cw)
        counts = np.bincount(idx, minlength=len(cw))
        empty = np.flatnonzero(counts == 0)
        if empty.size and len(cw) > 1:
            # re-seed each empty cell next to the most populous codeword;
            # adding a codeword can only lower nearest-neighbour distortion
            for e in empty:
                big = int(np.argmax(counts))
                cw[e] = cw[big] * (1 + cfg.epsilon)
                counts[e] = -1
            idx, dist = nearest(x, cw)
            counts = np.bincount(idx, minlength=len(cw))
        D = float(dist.mean())
        history.append(D)
        if D == 0 or (prev - D) <= cfg.threshold * D:
            break
        prev = D
        sums = np.zeros_like(cw)
        np.add.at(sums, idx, x)
        filled = counts > 0
        cw[filled] = sums[filled] / counts[filled, None]
    return cw, history


def train_family(features, max_bits: int = 7, config: LBGConfig | None = None,
                 speaker=None) -> CodebookFamily:
    """Train codebooks for every size 2^0 .. 2^max_bits by binary splitting."""
    cfg = config or LBGConfig()
    x = _as_array(features)
    if x.shape[0] == 0:
        raise ValueError("no training data")
    if speaker is None and isinstance(features, FeatureSequence):
        speaker = features.speaker
    usable = int(math.floor(math.log2(x.shape[0])))
    if usable < max_bits:
        warnings.warn(f"{x.shape[0]} training vectors support at most {usable} bits; "
                      f"clamping max_bits from {max_bits}")
        max_bits = usable

    centroid = x.mean(axis=0, keepdims=True)
    d0 = float(cdist(x, centroid, "sqeuclidean").mean())
    books = [Codebook(0, centroid, d0, [d0])]
    cw = centroid
    for bits in range(1, max_bits + 1):
        cw, hist = _lloyd(x, _split(cw, cfg.epsilon), cfg)
        books.append(Codebook(bits, cw, hist[-1], hist))
    return CodebookFamily(books, speaker)


def save_family(family: CodebookFamily, path) -> None:
    Path(path).write_text(family_to_text(family))


def family_to_text(family: CodebookFamily) -> str:
    p = family.dim
    lines = [f"# format_version={FORMAT_VERSION}",
             f"# speaker={family.speaker}",
             f"# p={p}",
             f"# max_bits={family.max_bits}"]
    for cb in family.codebooks:
        lines.append(f"# training_distortion,{cb.bits},{cb.training_distortion!r}")
    lines.append(",".join(["bits", "codeword_index"] + [f"c{i + 1}" for i in range(p)]))
    for cb in family.codebooks:
        for j, w in enumerate(cb.codewords):
            lines.append(",".join([str(cb.bits), str(j)] + [repr(float(v)) for v in w]))
    return "\n".join(lines) + "\n"


def load_family(path) -> CodebookFamily:
    meta, distortion, rows = {}, {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# training_distortion,"):
            _, b, d = line[2:].split(",")
            distortion[int(b)] = float(d)
        elif line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key] = value
        elif line and not line.startswith("bits,"):
            rows.append(line.split(","))
    if int(meta.get("format_version", -1)) != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported codebook format version {meta.get('format_version')}")
    p, max_bits = int(meta["p"]), int(meta["max_bits"])
    arr = np.array([[float(v) for v in r] for r in rows])
    books = []
    for b in range(max_bits + 1):
        sel = arr[arr[:, 0] == b]
        sel = sel[np.argsort(sel[:, 1], kind="stable")]
        if sel.shape[1] != p + 2:
            raise ValueError(f"{path}: expected {p} coefficients per codeword")
        books.append(Codebook(b, sel[:, 2:], distortion.get(b, float("nan"))))
    return CodebookFamily(books, meta.get("speaker"))
