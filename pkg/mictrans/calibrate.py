"""Frequency-sweep calibration baseline.

A sweep is recorded by the test and the train microphone; the per-bin gain that maps the
test microphone onto the train microphone is `sqrt(R_train / R_test)`. It is applied to
linear STFT magnitudes, before log compression and normalization.
"""

import json
from dataclasses import dataclass, field
from os import PathLike
from typing import Optional, Tuple

import numpy as np
from scipy import signal

from mictrans.dsp import AudioClip, Spectrogram, StftConfig, log_normalize
from mictrans.error import ConfigCheck, FormatError, InputTooShortError, SanityCheck, ShapeCheck
from mictrans.logging import CAL_LOG
from mictrans.micsim import MicProfile, apply_microphone, frequency_sweep

MIN_PSD_FRAMES = 8
PSD_FLOOR = 1e-10
SWEEP_OVERSAMPLE = 8


@dataclass
class PsdEstimate:
    power: np.ndarray
    bin_hz: float

    def __post_init__(self):
        self.power = np.asarray(self.power, dtype=np.float64).reshape(-1)
        SanityCheck.true((self.power >= 0).all(), "PSD must be non-negative")

    def __len__(self) -> int:
        return self.power.size


@dataclass
class CalibrationOffset:
    gamma: np.ndarray
    floor_applied: bool = False
    bin_hz: float = 0.0
    floored: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=np.float64).reshape(-1)
        if self.floored is None:
            self.floored = np.zeros(self.gamma.size, dtype=bool)
        self.floored = np.asarray(self.floored, dtype=bool)
        SanityCheck.true(
            np.isfinite(self.gamma).all() and (self.gamma > 0).all(),
            "calibration gains must be finite and positive",
        )

    def __len__(self) -> int:
        return self.gamma.size

    @staticmethod
    def name_suffix() -> str:
        return ".offset.json"

    def dump(self, path: PathLike) -> None:
        with open(path, "w") as f:
            json.dump(
                {
                    "bin_hz": self.bin_hz,
                    "gamma": self.gamma.tolist(),
                    "floored": self.floored.tolist(),
                    "floor_applied": self.floor_applied,
                },
                f,
                indent=2,
            )

    @staticmethod
    def load(path: PathLike) -> "CalibrationOffset":
        try:
            with open(path, "r") as f:
                data = json.load(f)
            return CalibrationOffset(
                gamma=np.array(data["gamma"]),
                floor_applied=bool(data["floor_applied"]),
                bin_hz=float(data["bin_hz"]),
                floored=np.array(data.get("floored", [False] * len(data["gamma"]))),
            )
        except (KeyError, TypeError, json.JSONDecodeError) as e:
            raise FormatError(f"Malformed calibration offset {path}: {e}") from e


def measure_psd(
    clip: AudioClip, cfg: StftConfig = StftConfig(), oversample: int = 1
) -> PsdEstimate:
    """Welch average of Hamming-windowed periodograms on the STFT frame grid.

    With `oversample > 1` the periodograms are `oversample` times longer and the result is
    read at the STFT bin centres, so the window's main lobe averages over a fraction of a bin.
    """
    ConfigCheck.eq(clip.sample_rate_hz, cfg.sample_rate_hz, "clip and STFT sample rates differ")
    ConfigCheck.ge(oversample, 1, "PSD oversampling")
    frames = cfg.n_frames(len(clip))
    if frames < MIN_PSD_FRAMES:
        raise InputTooShortError(
            f"PSD needs >= {MIN_PSD_FRAMES} frames, clip {clip.clip_id} has {frames}"
        )
    if oversample == 1:
        nperseg, nfft = cfg.win_length, cfg.fft_size
        noverlap = cfg.win_length - cfg.hop_length
    else:
        nperseg = nfft = oversample * cfg.fft_size
        noverlap = 3 * nperseg // 4
        if nperseg > len(clip):
            raise InputTooShortError(
                f"{oversample}x PSD needs >= {nperseg} samples, clip {clip.clip_id} has {len(clip)}"
            )
    _, power = signal.welch(
        clip.samples,
        fs=cfg.sample_rate_hz,
        window=cfg.window_kind.value,
        nperseg=nperseg,
        noverlap=noverlap,
        nfft=nfft,
        detrend=False,
        return_onesided=True,
        scaling="spectrum",
        average="mean",
    )
    return PsdEstimate(power[::oversample][: cfg.freq_bins], cfg.bin_hz)


def compute_offset(r_test: PsdEstimate, r_train: PsdEstimate) -> CalibrationOffset:
    ConfigCheck.eq(len(r_test), len(r_train), "PSD bin counts differ")
    floored = (r_test.power < PSD_FLOOR) | (r_train.power < PSD_FLOOR)
    ratio = np.divide(
        r_train.power, r_test.power, out=np.ones_like(r_test.power), where=~floored
    )
    gamma = np.where(floored, 1.0, np.sqrt(ratio))
    if floored.any():
        CAL_LOG.info(f"{int(floored.sum())}/{floored.size} bins below the PSD floor, gain 1")
    return CalibrationOffset(gamma, bool(floored.any()), r_test.bin_hz, floored)


def calibrate_magnitudes(magnitude: np.ndarray, offset: CalibrationOffset) -> np.ndarray:
    ShapeCheck.eq(magnitude.shape[0], len(offset), "magnitude bins vs calibration bins")
    return magnitude * offset.gamma[:, None]


def apply_offset(
    magnitude: np.ndarray,
    offset: CalibrationOffset,
    cfg: StftConfig = StftConfig(),
    log_range: Optional[Tuple[float, float]] = None,
) -> Spectrogram:
    return log_normalize(calibrate_magnitudes(magnitude, offset), cfg, log_range)


def measure_offset(
    profile_test: MicProfile,
    profile_train: MicProfile,
    cfg: StftConfig = StftConfig(),
    duration_s: float = 4.0,
    f_lo: float = 20.0,
    f_hi: Optional[float] = None,
) -> CalibrationOffset:
    """Play one sweep through both simulated microphones and derive the test->train gain."""
    f_hi = 0.99 * cfg.sample_rate_hz / 2 if f_hi is None else f_hi
    sweep = frequency_sweep(duration_s, f_lo, f_hi, cfg.sample_rate_hz)
    r_test = measure_psd(apply_microphone(sweep, profile_test, cfg), cfg, SWEEP_OVERSAMPLE)
    r_train = measure_psd(apply_microphone(sweep, profile_train, cfg), cfg, SWEEP_OVERSAMPLE)
    CAL_LOG.info(
        f"Calibrating {profile_test.name} -> {profile_train.name} with a "
        f"{duration_s:g} s sweep over {f_lo:g}-{f_hi:g} Hz"
    )
    return compute_offset(r_test, r_train)
