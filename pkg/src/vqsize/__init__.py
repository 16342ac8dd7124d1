"""Speaker identification with per-speaker VQ codebook sizes."""

from .codebook import (Codebook, CodebookFamily, LBGConfig, avg_distortion, normalize_distortion,
                       quantize, train_family)
from .config import ExperimentConfig, load_config
from .corpus import SynthSpec, build_corpus, load_wav, save_wav, synth_speaker, synth_utterance
from .frontend import (FeatureSequence, FrontendConfig, Signal, apply_hamming, autocorrelate,
                       extract_features, frame_signal, levinson_durbin, lpc_to_cepstrum,
                       preemphasize)
from .identify import (DistortionStats, EvalReport, ModelBank, ScoreTable, distortion_histogram,
                       distortion_stats, evaluate, identify)
from .size_select import (GreedyTrace, SweepResult, combination_count, greedy_size_search,
                          mean_bits, per_speaker_sweep, ratio_criterion_assign)

__version__ = "0.1.0"
