"""Keyword-spotting corpora.

`synthetic_keyword_corpus` generates one-second tone-chord "utterances": every class owns a
(low tone, high tone) pair and classes sharing a low tone differ only above 4 kHz, so the
high band carries part of the label. Held-out "rest" classes use patterns no keyword or
Unknown clip uses and feed translation training, keeping it disjoint from the classifier's
data.
"""

import os
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from mictrans.dsp import AudioClip, fit_length, read_wav
from mictrans.error import DataError, InsufficientDataError
from mictrans.logging import EVAL_LOG
from mictrans.macro import SAMPLE_RATE_HZ

KEYWORDS = (
    "yes",
    "no",
    "up",
    "down",
    "left",
    "right",
    "on",
    "off",
    "stop",
    "go",
    "zero",
    "one",
)
UNKNOWN = "Unknown"
CLASSES = KEYWORDS + (UNKNOWN,)
REST = ("bed", "bird", "cat", "dog", "happy", "house")

LOW_TONES_HZ = (350.0, 600.0, 850.0, 1100.0, 1350.0, 1600.0, 1800.0)
HIGH_TONES_HZ = (4500.0, 5800.0, 7000.0)
CLIP_SECONDS = 1.0
NOISE_STD = 0.003

Labeled = Tuple[List[AudioClip], Dict[str, str]]


def _pattern(index: int) -> Tuple[float, float]:
    return LOW_TONES_HZ[index % len(LOW_TONES_HZ)], HIGH_TONES_HZ[index // len(LOW_TONES_HZ)]


PATTERNS = {name: _pattern(i) for i, name in enumerate(CLASSES + REST)}


def synth_utterance(
    label: str, rng: np.random.Generator, sample_rate_hz: int = SAMPLE_RATE_HZ
) -> np.ndarray:
    f_low, f_high = PATTERNS[label]
    n = int(CLIP_SECONDS * sample_rate_hz)
    length = int(rng.uniform(0.35, 0.6) * sample_rate_hz)
    onset = int(rng.uniform(0.1, 0.9 - length / sample_rate_hz) * sample_rate_hz)
    t = np.arange(length) / sample_rate_hz
    burst = rng.uniform(0.2, 0.35) * np.sin(
        2 * np.pi * f_low * rng.uniform(0.98, 1.02) * t + rng.uniform(0, 2 * np.pi)
    ) + rng.uniform(0.1, 0.2) * np.sin(
        2 * np.pi * f_high * rng.uniform(0.98, 1.02) * t + rng.uniform(0, 2 * np.pi)
    )
    wave = NOISE_STD * rng.standard_normal(n)
    wave[onset : onset + length] += burst * np.hanning(length)
    return np.clip(wave, -1.0, 1.0)


def synthetic_keyword_corpus(
    per_class: int,
    seed: int = 0,
    classes: Sequence[str] = CLASSES,
    sample_rate_hz: int = SAMPLE_RATE_HZ,
) -> Labeled:
    """`per_class` labeled clips for each class, ids `<label>_<seed>_<i>`."""
    clips, labels = [], {}
    for label in classes:
        for i in range(per_class):
            rng = np.random.default_rng([seed, list(PATTERNS).index(label), i])
            clip_id = f"{label}_{seed}_{i:04d}"
            wave = synth_utterance(label, rng, sample_rate_hz)
            clips.append(AudioClip(wave, sample_rate_hz, clip_id))
            labels[clip_id] = label
    return clips, labels


def synthetic_rest_corpus(
    n_clips: int, seed: int = 0, sample_rate_hz: int = SAMPLE_RATE_HZ
) -> List[AudioClip]:
    """Unlabeled clips from the held-out classes, for training translators."""
    per_class = -(-n_clips // len(REST))
    clips, _ = synthetic_keyword_corpus(per_class, seed, REST, sample_rate_hz)
    order = np.random.default_rng(seed).permutation(len(clips))[:n_clips]
    return [clips[i] for i in sorted(order)]


def load_speech_commands(
    root: os.PathLike,
    keywords: Sequence[str] = KEYWORDS,
    max_per_class: Optional[int] = None,
) -> Labeled:
    """Per-word folders of one-second WAVs; words outside `keywords` become `Unknown`."""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"Speech commands root {root} is not a directory")
    clips, labels = [], {}
    for word_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        if word_dir.name.startswith("_"):  # _background_noise_
            continue
        label = word_dir.name if word_dir.name in keywords else UNKNOWN
        files = sorted(word_dir.glob("*.wav"))[:max_per_class]
        for path in files:
            clip = read_wav(path)
            clip = fit_length(clip, int(CLIP_SECONDS * clip.sample_rate_hz))
            clip.clip_id = f"{word_dir.name}_{path.stem}"
            clips.append(clip)
            labels[clip.clip_id] = label
    if not clips:
        raise InsufficientDataError(f"No WAV files under {root}")
    EVAL_LOG.info(f"Loaded {len(clips)} clips from {root}")
    return clips, labels
