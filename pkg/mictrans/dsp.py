"""Audio ingestion and feature extraction.

Everything here is a pure function of its inputs. Spectrograms are `[freq_bins, frames]`
grids of per-clip min-max normalized log10 magnitudes; the Nyquist bin is dropped so that
`freq_bins == fft_size // 2` is a power of two.
"""

import hashlib
import json
import struct
import warnings
from dataclasses import asdict, dataclass, field
from enum import Enum, unique
from os import PathLike
from pathlib import Path
from typing import Any, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import fft as sfft
from scipy import signal
from scipy.io import wavfile

from mictrans.error import (
    ConfigCheck,
    FormatError,
    InputTooShortError,
    SanityCheck,
    ShapeCheck,
    UnsupportedError,
)
from mictrans.logging import DSP_LOG
from mictrans.macro import SAMPLE_RATE_HZ, SPEC_MAGIC
from mictrans.util import parse_enum

LOG_EPS = 1e-6
SPEC_TRAILER_BYTES = 16
MEL_FLOOR = 1e-10
N_MEL_FILTERS = 26
N_MFCC = 24
SILENCE_DB = -90.0


@unique
class WindowKind(Enum):
    HAMMING = "hamming"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class StftConfig:
    window_ms: float = 32.0
    hop_ms: float = 16.0
    fft_size: int = 512
    window_kind: WindowKind = WindowKind.HAMMING
    sample_rate_hz: int = SAMPLE_RATE_HZ

    def __post_init__(self):
        if not isinstance(self.window_kind, WindowKind):
            object.__setattr__(self, "window_kind", parse_enum(WindowKind, self.window_kind))
        ConfigCheck.gt(self.sample_rate_hz, 0, "sample rate")
        ConfigCheck.gt(self.hop_ms, 0, "hop_ms")
        ConfigCheck.le(self.hop_ms, self.window_ms, "hop_ms must not exceed window_ms")
        ConfigCheck.true(
            self.fft_size > 0 and (self.fft_size & (self.fft_size - 1)) == 0,
            f"fft_size must be a power of two, got {self.fft_size}",
        )
        ConfigCheck.ge(
            self.fft_size, self.win_length, "fft_size must cover the window length"
        )

    @staticmethod
    def from_cfg(cfg: Mapping[str, Any]) -> "StftConfig":
        return StftConfig(
            window_ms=float(cfg["window_ms"]),
            hop_ms=float(cfg["hop_ms"]),
            fft_size=int(cfg["fft_size"]),
            window_kind=parse_enum(WindowKind, cfg.get("window_kind", "hamming")),
            sample_rate_hz=int(cfg.get("sample_rate_hz", SAMPLE_RATE_HZ)),
        )

    def to_dict(self) -> dict:
        ret = asdict(self)
        ret["window_kind"] = self.window_kind.value
        return ret

    @property
    def win_length(self) -> int:
        return int(round(self.window_ms * self.sample_rate_hz / 1000))

    @property
    def hop_length(self) -> int:
        return int(round(self.hop_ms * self.sample_rate_hz / 1000))

    @property
    def freq_bins(self) -> int:
        return self.fft_size // 2

    @property
    def bin_hz(self) -> float:
        return self.sample_rate_hz / self.fft_size

    def bin_frequencies(self) -> np.ndarray:
        return np.arange(self.freq_bins) * self.bin_hz

    def n_frames(self, n_samples: int) -> int:
        if n_samples < self.win_length:
            return 0
        return (n_samples - self.win_length) // self.hop_length + 1

    def contract_hash(self) -> str:
        """Fingerprint of everything that changes the features a model sees."""
        text = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class AudioClip:
    samples: np.ndarray
    sample_rate_hz: int = SAMPLE_RATE_HZ
    clip_id: Optional[str] = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if self.sample_rate_hz <= 0:
            raise FormatError(f"Sample rate must be positive, got {self.sample_rate_hz}")
        if self.samples.size == 0:
            raise FormatError("Audio clip is empty")
        if not np.isfinite(self.samples).all():
            raise FormatError(f"Non-finite samples in clip {self.clip_id}")
        if np.abs(self.samples).max() > 1.0:
            raise FormatError(f"Samples of clip {self.clip_id} exceed [-1, 1]")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass
class Spectrogram:
    bins: np.ndarray
    config: StftConfig = field(default_factory=StftConfig)
    # log10-magnitude values that -1 and +1 stand for.
    log_range: Tuple[float, float] = (float(np.log10(LOG_EPS)), 0.0)

    def __post_init__(self):
        self.bins = np.asarray(self.bins, dtype=np.float32)
        ShapeCheck.eq(self.bins.ndim, 2, "spectrogram must be [freq_bins, frames]")
        SanityCheck.true(
            np.isfinite(self.bins).all() and np.abs(self.bins).max() <= 1.0,
            "spectrogram bins must lie in [-1, 1]",
        )

    @property
    def freq_bins(self) -> int:
        return self.bins.shape[0]

    @property
    def frames(self) -> int:
        return self.bins.shape[1]

    def with_bins(self, bins: np.ndarray) -> "Spectrogram":
        return Spectrogram(bins, self.config, self.log_range)

    def on_range(self, log_range: Tuple[float, float]) -> "Spectrogram":
        """The same log magnitudes normalized against `log_range` instead of this grid's own."""
        lo, hi = self.log_range
        logmag = (self.bins.astype(np.float64) + 1.0) / 2.0 * (hi - lo) + lo
        return _normalize_log(logmag, self.config, log_range)

    @staticmethod
    def name_suffix() -> str:
        return ".m2mspec"

    def dump(self, path: PathLike) -> None:
        with open(path, "wb") as f:
            f.write(SPEC_MAGIC)
            f.write(struct.pack("<II", self.freq_bins, self.frames))
            f.write(np.ascontiguousarray(self.bins, dtype="<f4").tobytes())
            # Optional trailer: the log range, read back when present.
            f.write(struct.pack("<dd", *self.log_range))

    @staticmethod
    def load(path: PathLike, config: StftConfig = None) -> "Spectrogram":
        raw = Path(path).read_bytes()
        if raw[: len(SPEC_MAGIC)] != SPEC_MAGIC:
            raise FormatError(f"{path} is not a spectrogram file")
        offset = len(SPEC_MAGIC)
        try:
            freq_bins, frames = struct.unpack_from("<II", raw, offset)
        except struct.error as e:
            raise FormatError(f"{path}: truncated header") from e
        payload = raw[offset + 8 :]
        n_bytes = 4 * freq_bins * frames
        if len(payload) not in (n_bytes, n_bytes + SPEC_TRAILER_BYTES):
            raise FormatError(
                f"{path}: expected {freq_bins}x{frames} bins, got {len(payload) // 4} values"
            )
        bins = np.frombuffer(payload[:n_bytes], dtype="<f4").reshape(freq_bins, frames)
        spec = Spectrogram(bins.copy(), config or StftConfig())
        if len(payload) > n_bytes:
            lo, hi = struct.unpack_from("<dd", payload, n_bytes)
            if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
                raise FormatError(f"{path}: invalid log range ({lo}, {hi})")
            spec.log_range = (lo, hi)
        return spec


@dataclass
class MfccMatrix:
    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=np.float32)
        ShapeCheck.true(
            self.coefficients.ndim == 2 and self.coefficients.shape[1] == N_MFCC,
            f"MFCC matrix must be [frames, {N_MFCC}], got {self.coefficients.shape}",
        )
        SanityCheck.true(np.isfinite(self.coefficients).all(), "non-finite MFCCs")

    @property
    def frames(self) -> int:
        return self.coefficients.shape[0]


def read_wav(path: PathLike) -> AudioClip:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", wavfile.WavFileWarning)
            sample_rate, data = wavfile.read(path)
    except (ValueError, EOFError, struct.error) as e:
        msg = str(e)
        if "Unknown wave file format" in msg or "Unsupported" in msg:
            raise UnsupportedError(f"{path}: {msg}") from e
        raise FormatError(f"{path}: {msg}") from e

    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise UnsupportedError(f"{path}: {data.dtype} samples are not supported")

    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    DSP_LOG.debug(f"Read {path}: {samples.size} samples @ {sample_rate} Hz")
    return AudioClip(samples, int(sample_rate), clip_id=Path(path).stem)


def write_wav(path: PathLike, clip: AudioClip) -> None:
    pcm = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype(np.int16)
    wavfile.write(path, clip.sample_rate_hz, pcm)


def stft_magnitude(clip: AudioClip, cfg: StftConfig) -> np.ndarray:
    """Linear magnitude STFT, `[cfg.freq_bins, frames]`, no centering or padding."""
    ConfigCheck.eq(
        clip.sample_rate_hz, cfg.sample_rate_hz, "clip and STFT sample rates differ"
    )
    if len(clip) < cfg.win_length:
        raise InputTooShortError(
            f"Clip of {len(clip)} samples is shorter than one window ({cfg.win_length})"
        )
    _, _, zxx = signal.stft(
        clip.samples,
        fs=cfg.sample_rate_hz,
        window=cfg.window_kind.value,
        nperseg=cfg.win_length,
        noverlap=cfg.win_length - cfg.hop_length,
        nfft=cfg.fft_size,
        detrend=False,
        return_onesided=True,
        boundary=None,
        padded=False,
    )
    return np.abs(zxx[: cfg.freq_bins])


def _normalize_log(
    logmag: np.ndarray, cfg: StftConfig, log_range: Optional[Tuple[float, float]] = None
) -> Spectrogram:
    if log_range is None:
        lo, hi = float(logmag.min()), float(logmag.max())
    else:
        lo, hi = map(float, log_range)
        ConfigCheck.le(lo, hi, "log range")
    if hi == lo:
        # Constant input (e.g. digital silence) sits on the floor.
        bins = -np.ones_like(logmag)
    else:
        bins = np.clip(2.0 * (logmag - lo) / (hi - lo) - 1.0, -1.0, 1.0)
    return Spectrogram(bins.astype(np.float32), cfg, (lo, hi))


def log_normalize(
    magnitude: np.ndarray, cfg: StftConfig, log_range: Optional[Tuple[float, float]] = None
) -> Spectrogram:
    """log10 compression, then min-max to [-1, 1] over the grid, or over `log_range` if given."""
    return _normalize_log(np.log10(magnitude + LOG_EPS), cfg, log_range)


def spectrogram_to_magnitude(spec: Spectrogram) -> np.ndarray:
    lo, hi = spec.log_range
    logmag = (spec.bins.astype(np.float64) + 1.0) / 2.0 * (hi - lo) + lo
    return np.maximum(10.0**logmag - LOG_EPS, 0.0)


def stft_log_spectrogram(clip: AudioClip, cfg: StftConfig) -> Spectrogram:
    return log_normalize(stft_magnitude(clip, cfg), cfg)


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def mel_filterbank(cfg: StftConfig, n_filters: int = N_MEL_FILTERS) -> np.ndarray:
    """Triangular filters equally spaced on the mel scale from 0 Hz to Nyquist, `[n_filters, freq_bins]`."""
    edges = _mel_to_hz(
        np.linspace(0.0, _hz_to_mel(cfg.sample_rate_hz / 2), n_filters + 2)
    )
    freqs = cfg.bin_frequencies()
    bank = np.zeros((n_filters, cfg.freq_bins))
    for m in range(n_filters):
        left, center, right = edges[m : m + 3]
        rising = (freqs - left) / (center - left)
        falling = (right - freqs) / (right - center)
        bank[m] = np.maximum(0.0, np.minimum(rising, falling))
    return bank


def mfcc_from_magnitude(magnitude: np.ndarray, cfg: StftConfig) -> MfccMatrix:
    mel_energy = mel_filterbank(cfg) @ (magnitude**2)
    log_mel = np.log(mel_energy + MEL_FLOOR)
    cepstra = sfft.dct(log_mel, type=2, axis=0, norm="ortho")[:N_MFCC]
    return MfccMatrix(cepstra.T)


def mfcc(clip: AudioClip, cfg: StftConfig) -> MfccMatrix:
    return mfcc_from_magnitude(stft_magnitude(clip, cfg), cfg)


def vad_segments(
    clip: AudioClip, frame_ms: float = 20.0, threshold_db: float = -30.0
) -> List[Tuple[int, int]]:
    """Energy VAD: `[start, end)` sample ranges of frames louder than the 95th-percentile
    frame energy plus `threshold_db`. Runs separated by a single quiet frame are merged.
    """
    ConfigCheck.gt(frame_ms, 0, "frame_ms")
    frame_len = max(1, int(round(frame_ms * clip.sample_rate_hz / 1000)))
    n = len(clip)
    n_frames = -(-n // frame_len)
    padded = np.zeros(n_frames * frame_len)
    padded[:n] = clip.samples
    counts = np.full(n_frames, frame_len, dtype=np.float64)
    counts[-1] = n - (n_frames - 1) * frame_len
    rms = np.sqrt((padded.reshape(n_frames, frame_len) ** 2).sum(axis=1) / counts)
    level_db = 20.0 * np.log10(rms + 1e-12)

    reference = np.percentile(level_db, 95)
    voiced = (level_db > reference + threshold_db) & (level_db > SILENCE_DB)

    runs: List[List[int]] = []
    for i in np.flatnonzero(voiced):
        if runs and i - runs[-1][1] < 2:  # a gap of one frame is bridged
            runs[-1][1] = i + 1
        else:
            runs.append([i, i + 1])

    return [(s * frame_len, min(e * frame_len, n)) for s, e in runs]


def patch_starts(frames: int, patch_time: int, stride: int) -> List[int]:
    starts = [0]
    while starts[-1] + patch_time < frames:
        starts.append(starts[-1] + stride)
    return starts


def extract_patches(
    spec: Spectrogram, patch: Tuple[int, int], stride_time: int
) -> List[Spectrogram]:
    patch_freq, patch_time = patch
    ConfigCheck.true(
        patch_freq > 0 and patch_time > 0 and stride_time > 0,
        f"patch {patch} and stride {stride_time} must be positive",
    )
    ShapeCheck.le(patch_freq, spec.freq_bins, "patch taller than the spectrogram")

    grid = spec.bins[:patch_freq]
    starts = patch_starts(spec.frames, patch_time, stride_time)
    need = starts[-1] + patch_time - spec.frames
    if need > 0:
        if need >= spec.frames:
            raise InputTooShortError(
                f"{spec.frames} frames cannot be reflect-padded by {need} to fill a patch"
            )
        grid = np.pad(grid, ((0, 0), (0, need)), mode="reflect")

    return [spec.with_bins(grid[:, s : s + patch_time]) for s in starts]


def assemble_patches(
    patches: Sequence[np.ndarray], frames: int, stride_time: int
) -> np.ndarray:
    """Inverse of `extract_patches`: overlapping frames are averaged, padding is dropped."""
    patch_freq, patch_time = np.shape(patches[0])
    ConfigCheck.true(
        0 < stride_time <= patch_time,
        f"stride {stride_time} must be in (0, {patch_time}] so every frame is covered",
    )
    starts = patch_starts(frames, patch_time, stride_time)
    ShapeCheck.eq(len(starts), len(patches), "patch count does not match the layout")
    total = starts[-1] + patch_time
    acc = np.zeros((patch_freq, total))
    hits = np.zeros(total)
    for s, p in zip(starts, patches):
        acc[:, s : s + patch_time] += p
        hits[s : s + patch_time] += 1
    return (acc / hits)[:, :frames]


def fit_length(clip: AudioClip, n_samples: int, center: Optional[int] = None) -> AudioClip:
    """Crop or zero-pad to `n_samples`, keeping the window centered on `center` when given."""
    ConfigCheck.gt(n_samples, 0, "target length")
    center = len(clip) // 2 if center is None else center
    start = min(max(center - n_samples // 2, 0), max(len(clip) - n_samples, 0))
    samples = clip.samples[start : start + n_samples]
    if samples.size < n_samples:
        samples = np.pad(samples, (0, n_samples - samples.size))
    return AudioClip(samples, clip.sample_rate_hz, clip.clip_id)
