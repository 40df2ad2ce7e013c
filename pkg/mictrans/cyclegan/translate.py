from typing import Union

import numpy as np
import torch

from mictrans.cyclegan.model import CycleGanModel, Direction, TranslatorExport
from mictrans.dsp import Spectrogram, assemble_patches, extract_patches
from mictrans.error import ContractError, ShapeCheck
from mictrans.logging import GAN_LOG

Translator = Union[CycleGanModel, TranslatorExport]


def translate(
    model: Translator, spec: Spectrogram, direction: Direction = Direction.A_TO_B
) -> Spectrogram:
    """Translate patch by patch in eval mode and stitch the patches back.

    Bins above the patch height are passed through untouched; the result keeps the input's
    log range so it can be denormalized with the same scale.
    """
    if spec.config.contract_hash() != model.stft.contract_hash():
        raise ContractError(
            f"Spectrogram features {spec.config} differ from the model's {model.stft}"
        )
    patch_freq, patch_time = model.patch
    ShapeCheck.le(patch_freq, spec.freq_bins, "patch taller than the spectrogram")

    patches = extract_patches(spec, model.patch, patch_time)
    batch = torch.from_numpy(np.stack([p.bins for p in patches])[:, None].astype(np.float32))
    generator = model.generator(direction)
    was_training = generator.training
    generator.eval()
    with torch.no_grad():
        out = generator(batch)[:, 0].numpy()
    generator.train(was_training)

    bins = spec.bins.copy()
    bins[:patch_freq] = assemble_patches(list(out), spec.frames, patch_time)
    GAN_LOG.debug(f"Translated {spec.freq_bins}x{spec.frames} via {len(patches)} patches ({direction})")
    return spec.with_bins(np.clip(bins, -1.0, 1.0))
