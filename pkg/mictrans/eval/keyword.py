from dataclasses import dataclass
from typing import Any, List, Mapping, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from mictrans.dsp import (
    AudioClip,
    N_MFCC,
    Spectrogram,
    StftConfig,
    fit_length,
    mfcc_from_magnitude,
    spectrogram_to_magnitude,
    stft_log_spectrogram,
)
from mictrans.error import ConfigCheck, ContractError, InsufficientDataError
from mictrans.eval.corpus import CLASSES, CLIP_SECONDS
from mictrans.logging import EVAL_LOG
from mictrans.micsim import DomainDataset
from mictrans.nncore.checkpoint import Checkpoint
from mictrans.nncore.layers import LayerKind, conv2d, dense, make_layer, relu
from mictrans.nncore.model import Model, load_module_tensors, module_tensors
from mictrans.nncore.optim import AdamConfig, make_adam
from mictrans.util import deterministic, ordered_map

POOLED = (4, 4)
TASK_NAME = "keyword-spotting"


class KeywordNet(nn.Module):
    """Two 3x3 convolutions over the `[frames, 24]` MFCC image and a dense head."""

    def __init__(self, n_classes: int):
        super().__init__()
        self.conv1 = make_layer(LayerKind.CONV2D, 1, 16, kernel_size=3, padding=1)
        self.conv2 = make_layer(LayerKind.CONV2D, 16, 32, kernel_size=3, stride=2, padding=1)
        self.head = make_layer(LayerKind.DENSE, 32 * POOLED[0] * POOLED[1], n_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = relu(conv2d(x, self.conv1))
        h = relu(conv2d(h, self.conv2))
        h = F.adaptive_avg_pool2d(h, POOLED).flatten(1)
        return dense(h, self.head)


@dataclass(frozen=True)
class KeywordTrainConfig:
    epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        ConfigCheck.ge(self.epochs, 0, "epochs")
        ConfigCheck.gt(self.batch_size, 0, "batch_size")
        ConfigCheck.gt(self.lr, 0, "lr")

    @staticmethod
    def from_cfg(cfg: Mapping[str, Any]) -> "KeywordTrainConfig":
        return KeywordTrainConfig(
            epochs=int(cfg["epochs"]),
            batch_size=int(cfg["batch_size"]),
            lr=float(cfg["lr"]),
            seed=int(cfg["seed"]),
        )


def spectrogram_features(spec: Spectrogram) -> np.ndarray:
    """MFCCs of the magnitudes a (possibly translated or calibrated) spectrogram stands for."""
    return mfcc_from_magnitude(spectrogram_to_magnitude(spec), spec.config).coefficients


def clip_features(clip: AudioClip, stft: StftConfig) -> np.ndarray:
    clip = fit_length(clip, int(CLIP_SECONDS * clip.sample_rate_hz))
    return spectrogram_features(stft_log_spectrogram(clip, stft))


class KeywordModel(Model):
    def __init__(
        self,
        classes: Sequence[str] = CLASSES,
        stft: StftConfig = StftConfig(),
        training_mic_ids: Sequence[str] = (),
        task_name: str = TASK_NAME,
        mean: np.ndarray = None,
        std: np.ndarray = None,
    ):
        self.classes = list(classes)
        self.stft = stft
        self.training_mic_ids = sorted(training_mic_ids)
        self.task_name = task_name
        self.mean = np.asarray(np.zeros(N_MFCC) if mean is None else mean, np.float32)
        self.std = np.asarray(np.ones(N_MFCC) if std is None else std, np.float32)
        self.net = KeywordNet(len(self.classes))

    @staticmethod
    def kind() -> str:
        return "keyword"

    @property
    def meta(self) -> dict:
        return {
            "classes": self.classes,
            "stft": self.stft.to_dict(),
            "contract": self.stft.contract_hash(),
            "training_mic_ids": self.training_mic_ids,
            "task_name": self.task_name,
        }

    def to_checkpoint(self) -> Checkpoint:
        tensors = module_tensors("net", self.net)
        tensors["norm.mean"] = self.mean
        tensors["norm.std"] = self.std
        return Checkpoint(self.kind(), self.meta, tensors)

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "KeywordModel":
        meta = ckpt.meta
        model = cls(
            meta["classes"],
            StftConfig.from_cfg(meta["stft"]),
            meta["training_mic_ids"],
            meta["task_name"],
            ckpt.tensors["norm.mean"],
            ckpt.tensors["norm.std"],
        )
        load_module_tensors("net", model.net, ckpt.tensors)
        model.net.eval()
        return model

    def _input(self, features: Sequence[np.ndarray]) -> torch.Tensor:
        x = (np.stack(features) - self.mean) / self.std
        return torch.from_numpy(x[:, None].astype(np.float32))

    def predict_proba(self, features: Sequence[np.ndarray]) -> np.ndarray:
        self.net.eval()
        with torch.no_grad():
            return torch.softmax(self.net(self._input(features)), dim=1).numpy()

    def classify(self, spec: Spectrogram) -> Tuple[str, np.ndarray]:
        if spec.config.contract_hash() != self.stft.contract_hash():
            raise ContractError(
                f"Keyword model expects features of {self.stft}, got {spec.config}"
            )
        probs = self.predict_proba([spectrogram_features(spec)])[0]
        return self.classes[int(np.argmax(probs))], probs


def _labeled_pairs(domains: Sequence[DomainDataset]) -> List[Tuple[AudioClip, str]]:
    return [pair for d in domains for pair in d.labeled()]


def train_keyword(
    domains: Sequence[DomainDataset],
    cfg: KeywordTrainConfig = KeywordTrainConfig(),
    stft: StftConfig = StftConfig(),
    classes: Sequence[str] = CLASSES,
) -> KeywordModel:
    """Cross-entropy training on the labeled clips of one or more microphone domains."""
    ConfigCheck.ge(len(classes), 2, "keyword model needs >= 2 classes")
    pairs = _labeled_pairs(domains)
    counts = {c: 0 for c in classes}
    for _, label in pairs:
        ConfigCheck.true(label in counts, f"label {label!r} not among {list(classes)}")
        counts[label] += 1
    missing = [c for c, n in counts.items() if n == 0]
    if missing:
        raise InsufficientDataError(f"No training clips for classes {missing}")

    deterministic(cfg.seed)
    features = ordered_map(lambda p: clip_features(p[0], stft), pairs)
    stacked = np.stack(features)
    mean = stacked.mean(axis=(0, 1))
    std = np.maximum(stacked.std(axis=(0, 1)), 1e-6)
    model = KeywordModel(classes, stft, [d.domain_id for d in domains], mean=mean, std=std)

    x = model._input(features)
    y = torch.tensor([model.classes.index(label) for _, label in pairs])
    opt = make_adam(model.net.parameters(), AdamConfig(lr=cfg.lr, beta1=0.9, beta2=0.999))
    rng = np.random.default_rng(cfg.seed)
    model.net.train()
    for epoch in range(1, cfg.epochs + 1):
        order = torch.from_numpy(rng.permutation(len(pairs)))
        total, correct = 0.0, 0
        for start in range(0, len(pairs), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            opt.zero_grad()
            logits = model.net(x[idx])
            loss = F.cross_entropy(logits, y[idx])
            loss.backward()
            opt.step()
            total += float(loss) * len(idx)
            correct += int((logits.argmax(dim=1) == y[idx]).sum())
        EVAL_LOG.info(
            f"keyword epoch {epoch}/{cfg.epochs} loss={total / len(pairs):.4f} "
            f"train_acc={correct / len(pairs):.3f}"
        )
    model.net.eval()
    return model
