from dataclasses import dataclass
from typing import Union

import numpy as np

from mictrans.dsp import Spectrogram
from mictrans.error import ShapeCheck, UndefinedRecoveryError

PSNR_RANGE = 2.0
PSNR_CAP_DB = 100.0


def psnr(a: Union[Spectrogram, np.ndarray], b: Union[Spectrogram, np.ndarray]) -> float:
    """`10 log10(range^2 / MSE)` over normalized bins; identical inputs give the cap."""
    a = a.bins if isinstance(a, Spectrogram) else np.asarray(a)
    b = b.bins if isinstance(b, Spectrogram) else np.asarray(b)
    ShapeCheck.eq(a.shape, b.shape, "psnr operands")
    mse = float(np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return float(min(PSNR_CAP_DB, 10.0 * np.log10(PSNR_RANGE**2 / mse)))


@dataclass(frozen=True)
class Recovery:
    raw: float
    clamped: float


def recovery(upper: float, unmodified: float, treated: float) -> Recovery:
    """Share of the accuracy lost to the microphone change that a pipeline wins back."""
    if upper <= unmodified:
        raise UndefinedRecoveryError(
            f"Recovery is undefined when upper ({upper}) <= unmodified ({unmodified})"
        )
    raw = (treated - unmodified) / (upper - unmodified)
    return Recovery(raw, float(np.clip(raw, 0.0, 1.0)))
