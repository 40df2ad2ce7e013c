"""Synthetic microphones with known transfer functions.

A microphone is a zero-phase filter whose magnitude response is `TransferFunction.gains`
(one value per STFT bin) followed by an additive Gaussian noise floor and ADC clipping.
Presets are registered with `@profile(name)`, the same way filters are registered in a
fuzzing loop: a name maps to a builder taking the `StftConfig` the gains must match.
"""

import json
import os
import zlib
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Set

import numpy as np
from scipy import signal

from mictrans.dsp import AudioClip, StftConfig, read_wav, write_wav
from mictrans.error import (
    ConfigCheck,
    ConfigError,
    DataError,
    FormatError,
    InsufficientDataError,
    PairingViolationError,
)
from mictrans.logging import MIC_LOG
from mictrans.macro import MANIFEST_NAME, SAMPLE_RATE_HZ
from mictrans.util import ordered_map

SWEEP_AMPLITUDE = 0.8


@dataclass
class TransferFunction:
    gains: np.ndarray
    description: str = ""

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=np.float64).reshape(-1)
        ConfigCheck.true(
            np.isfinite(self.gains).all() and (self.gains >= 0).all(),
            f"gains must be finite and non-negative ({self.description})",
        )
        ConfigCheck.true((self.gains > 0).any(), "at least one gain must be positive")

    def __len__(self) -> int:
        return self.gains.size

    def then(self, other: "TransferFunction") -> "TransferFunction":
        return TransferFunction(
            self.gains * other.gains, f"{self.description} -> {other.description}"
        )


@dataclass
class MicProfile:
    name: str
    tf: TransferFunction
    noise_floor_db: float = -np.inf
    seed: int = 0

    def __post_init__(self):
        ConfigCheck.le(self.noise_floor_db, 0.0, f"noise floor of {self.name}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.tf.description,
            "gains": self.tf.gains.tolist(),
            "noise_floor_db": None
            if np.isneginf(self.noise_floor_db)
            else float(self.noise_floor_db),
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "MicProfile":
        noise = d.get("noise_floor_db")
        return MicProfile(
            name=d["name"],
            tf=TransferFunction(np.asarray(d["gains"]), d.get("description", "")),
            noise_floor_db=-np.inf if noise is None else float(noise),
            seed=int(d.get("seed", 0)),
        )


@dataclass
class DomainDataset:
    domain_id: str
    clips: List[AudioClip]
    profile: MicProfile
    unpaired_with: Set[str] = field(default_factory=set)
    # clip id -> keyword label; empty for unlabeled translation data.
    labels: Dict[str, str] = field(default_factory=dict)

    @property
    def source_ids(self) -> List[str]:
        return [c.clip_id for c in self.clips]

    @property
    def duration_s(self) -> float:
        return sum(c.duration_s for c in self.clips)

    def labeled(self) -> List[tuple]:
        return [(c, self.labels[c.clip_id]) for c in self.clips]

    def dump(self, root: PathLike) -> Path:
        root = Path(root) / self.domain_id
        os.makedirs(root, exist_ok=True)
        entries = []
        for clip in self.clips:
            fname = f"{clip.clip_id}.wav"
            write_wav(root / fname, clip)
            entry = {"id": clip.clip_id, "file": fname}
            if clip.clip_id in self.labels:
                entry["label"] = self.labels[clip.clip_id]
            entries.append(entry)
        manifest = {
            "domain_id": self.domain_id,
            "profile": self.profile.to_dict(),
            "clips": entries,
            "unpaired_with": sorted(self.unpaired_with),
        }
        with open(root / MANIFEST_NAME, "w") as f:
            json.dump(manifest, f, indent=2)
        MIC_LOG.info(f"Wrote {len(self.clips)} clips of domain {self.domain_id} to {root}")
        return root

    @staticmethod
    def load(path: PathLike) -> "DomainDataset":
        path = Path(path)
        manifest_path = path if path.is_file() else path / MANIFEST_NAME
        if not manifest_path.is_file():
            raise DataError(f"No domain manifest at {manifest_path}")
        try:
            with open(manifest_path, "r") as f:
                manifest = json.load(f)
            clips, labels = [], {}
            for entry in manifest["clips"]:
                clip = read_wav(manifest_path.parent / entry["file"])
                clip.clip_id = entry["id"]
                clips.append(clip)
                if "label" in entry:
                    labels[entry["id"]] = entry["label"]
            return DomainDataset(
                domain_id=manifest["domain_id"],
                clips=clips,
                profile=MicProfile.from_dict(manifest["profile"]),
                unpaired_with=set(manifest.get("unpaired_with", [])),
                labels=labels,
            )
        except (KeyError, json.JSONDecodeError) as e:
            raise FormatError(f"Malformed manifest {manifest_path}: {e}") from e


def _zero_phase_kernel(gains: np.ndarray, fft_size: int) -> np.ndarray:
    """Odd-length symmetric FIR whose DFT on the `fft_size` grid equals the gains exactly."""
    # Nyquist reuses the top bin's gain.
    response = np.append(gains, gains[-1])
    circular = np.fft.irfft(response, n=fft_size)
    half = fft_size // 2
    kernel = np.concatenate([circular[half:], circular[: half + 1]])
    kernel[0] *= 0.5
    kernel[-1] *= 0.5
    return kernel


def apply_microphone(
    clip: AudioClip, profile: MicProfile, cfg: StftConfig = StftConfig()
) -> AudioClip:
    gains = profile.tf.gains
    if gains.size != cfg.freq_bins:
        raise ConfigError(
            f"Profile {profile.name} has {gains.size} gains but the STFT has {cfg.freq_bins} bins"
        )
    kernel = _zero_phase_kernel(gains, cfg.fft_size)
    out = signal.oaconvolve(clip.samples, kernel, mode="same")

    if np.isfinite(profile.noise_floor_db):
        clip_key = zlib.crc32((clip.clip_id or "").encode())
        rng = np.random.default_rng([profile.seed, clip_key])
        out = out + rng.normal(0.0, 10 ** (profile.noise_floor_db / 20), out.size)

    return AudioClip(np.clip(out, -1.0, 1.0), clip.sample_rate_hz, clip.clip_id)


PROFILES: Dict[str, Callable[[StftConfig], MicProfile]] = {}


class profile:
    def __init__(self, name):
        self.name = name

    def __call__(self, builder: Callable[[StftConfig], MicProfile]):
        assert self.name not in PROFILES, f"Profile {self.name} already exists."
        PROFILES[self.name] = builder
        return builder


def _ramp(freqs: np.ndarray, f_start: float, f_stop: float, g_start, g_stop):
    t = np.clip((freqs - f_start) / (f_stop - f_start), 0.0, 1.0)
    return g_start + (g_stop - g_start) * t


@profile("ref")
def _ref(cfg: StftConfig) -> MicProfile:
    return MicProfile("ref", TransferFunction(np.ones(cfg.freq_bins), "identity"))


@profile("arrayA")
def _array_a(cfg: StftConfig) -> MicProfile:
    # Raised-cosine shelf: flat to 2.5 kHz, down to 0.15 from 5.5 kHz on.
    freqs = cfg.bin_frequencies()
    t = np.clip((freqs - 2500.0) / 3000.0, 0.0, 1.0)
    gains = 0.15 + 0.85 * 0.5 * (1.0 + np.cos(np.pi * t))
    return MicProfile(
        "arrayA",
        TransferFunction(gains, "high-frequency shelf cut"),
        noise_floor_db=-70.0,
        seed=11,
    )


@profile("usbC")
def _usb_c(cfg: StftConfig) -> MicProfile:
    freqs = cfg.bin_frequencies()
    in_band = (freqs >= 500.0) & (freqs <= 4000.0)
    # Two full periods: no ripple at either band edge.
    ripple = 1.0 + 0.25 * np.sin(2.0 * np.pi * (freqs - 500.0) / 1750.0) * in_band
    return MicProfile(
        "usbC",
        TransferFunction(ripple, "mid-band ripple"),
        noise_floor_db=-50.0,
        seed=23,
    )


@profile("lowpass")
def _lowpass(cfg: StftConfig) -> MicProfile:
    gains = _ramp(cfg.bin_frequencies(), 2000.0, 4000.0, 1.0, 0.1)
    return MicProfile("lowpass", TransferFunction(gains, "2-4 kHz roll-off to 0.1"))


def preset_profiles(cfg: StftConfig = StftConfig()) -> List[MicProfile]:
    return [builder(cfg) for builder in PROFILES.values()]


def get_profile(name: str, cfg: StftConfig = StftConfig()) -> MicProfile:
    if name not in PROFILES:
        raise ConfigError(
            f"Profile {name} not found. Available profiles: {list(PROFILES.keys())}"
        )
    return PROFILES[name](cfg)


def render_clips(
    clips: Sequence[AudioClip], mic: MicProfile, cfg: StftConfig = StftConfig()
) -> List[AudioClip]:
    return ordered_map(lambda c: apply_microphone(c, mic, cfg), clips)


def generate_domains(
    corpus: Sequence[AudioClip],
    profiles: Sequence[MicProfile],
    unpaired: bool,
    split_seed: int,
    cfg: StftConfig = StftConfig(),
    labels: Optional[Dict[str, str]] = None,
) -> List[DomainDataset]:
    if len(corpus) == 0:
        raise InsufficientDataError("Cannot generate domains from an empty corpus")
    ids = [c.clip_id for c in corpus]
    ConfigCheck.true(
        None not in ids and len(set(ids)) == len(ids),
        "corpus clips need unique clip ids",
    )
    names = [p.name for p in profiles]
    ConfigCheck.eq(len(set(names)), len(names), "profile names must be unique")
    labels = labels or {}

    if unpaired:
        ConfigCheck.ge(len(profiles), 2, "unpaired generation needs >= 2 profiles")
        if len(corpus) < len(profiles):
            raise InsufficientDataError(
                f"{len(corpus)} clips cannot be split across {len(profiles)} domains"
            )
        order = np.random.default_rng(split_seed).permutation(len(corpus))
        parts = [[corpus[i] for i in part] for part in np.array_split(order, len(profiles))]
    else:
        parts = [list(corpus) for _ in profiles]

    domains = []
    for mic, part in zip(profiles, parts):
        domains.append(
            DomainDataset(
                domain_id=mic.name,
                clips=render_clips(part, mic, cfg),
                profile=mic,
                unpaired_with=set(names) - {mic.name} if unpaired else set(),
                labels={c.clip_id: labels[c.clip_id] for c in part if c.clip_id in labels},
            )
        )

    if unpaired:
        for i, lhs in enumerate(domains):
            for rhs in domains[i + 1 :]:
                check_unpaired(lhs, rhs)

    MIC_LOG.info(
        f"Generated {len(domains)} {'unpaired' if unpaired else 'paired'} domains: "
        + ", ".join(f"{d.domain_id}({len(d.clips)})" for d in domains)
    )
    return domains


def check_unpaired(lhs: DomainDataset, rhs: DomainDataset) -> None:
    shared = set(lhs.source_ids) & set(rhs.source_ids)
    if shared:
        raise PairingViolationError(
            f"Domains {lhs.domain_id} and {rhs.domain_id} share {len(shared)} source clips, "
            f"e.g. {sorted(shared)[:3]}"
        )


def log_sweep_frequency(t, duration_s: float, f_lo: float, f_hi: float):
    return f_lo * (f_hi / f_lo) ** (np.asarray(t) / duration_s)


def frequency_sweep(
    duration_s: float,
    f_lo: float,
    f_hi: float,
    sample_rate_hz: int = SAMPLE_RATE_HZ,
) -> AudioClip:
    ConfigCheck.gt(duration_s, 0, "sweep duration")
    ConfigCheck.true(
        0 < f_lo < f_hi <= sample_rate_hz / 2,
        f"sweep needs 0 < f_lo < f_hi <= Nyquist, got {f_lo}..{f_hi} Hz",
    )
    t = np.arange(int(round(duration_s * sample_rate_hz))) / sample_rate_hz
    wave = signal.chirp(t, f0=f_lo, t1=duration_s, f1=f_hi, method="logarithmic")
    return AudioClip(SWEEP_AMPLITUDE * wave, sample_rate_hz, clip_id="sweep")
