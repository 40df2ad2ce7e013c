from dataclasses import asdict, dataclass
from enum import Enum, unique
from typing import Any, Dict, Mapping, Optional, Tuple

from torch import nn

from mictrans.dsp import StftConfig
from mictrans.error import ConfigCheck, ConfigError
from mictrans.logging import GAN_LOG
from mictrans.nncore.checkpoint import Checkpoint
from mictrans.nncore.model import Model, load_module_tensors, module_tensors
from mictrans.nncore.optim import AdamConfig
from mictrans.util import parse_enum
from mictrans.cyclegan.nets import Discriminator, Generator


@unique
class TrainMode(Enum):
    UNPAIRED = "unpaired"
    PAIRED = "paired"

    def __str__(self) -> str:
        return self.value


@unique
class Direction(Enum):
    A_TO_B = "a2b"
    B_TO_A = "b2a"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 1.0
    beta: float = 10.0
    gamma: float = 5.0
    delta: float = 10.0
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 8
    epochs: int = 30
    seed: int = 0
    mode: TrainMode = TrainMode.UNPAIRED
    patch_freq: int = 256
    patch_time: int = 64
    patch_stride: Optional[int] = None

    def __post_init__(self):
        if not isinstance(self.mode, TrainMode):
            object.__setattr__(self, "mode", parse_enum(TrainMode, self.mode))
        ConfigCheck.gt(self.alpha, 0, "alpha")
        for name in ("beta", "gamma", "delta"):
            ConfigCheck.ge(getattr(self, name), 0, name)
        ConfigCheck.ge(self.batch_size, 2, "batch_size (BatchNorm needs two samples)")
        ConfigCheck.ge(self.epochs, 0, "epochs")
        for name in ("patch_freq", "patch_time"):
            size = getattr(self, name)
            ConfigCheck.true(
                size >= 16 and size % 8 == 0, f"{name}={size} must be >= 16 and a multiple of 8"
            )
        if self.patch_stride is None:
            object.__setattr__(self, "patch_stride", self.patch_time)
        ConfigCheck.gt(self.patch_stride, 0, "patch_stride")
        if self.mode is TrainMode.PAIRED and self.beta != 0:
            GAN_LOG.info("Paired mode trains without the cycle term: beta forced to 0")
            object.__setattr__(self, "beta", 0.0)

    @property
    def patch(self) -> Tuple[int, int]:
        return (self.patch_freq, self.patch_time)

    @property
    def adam(self) -> AdamConfig:
        return AdamConfig(lr=self.lr, beta1=self.beta1, beta2=self.beta2)

    @staticmethod
    def from_cfg(train: Mapping[str, Any], patch: Mapping[str, Any]) -> "TrainConfig":
        return TrainConfig(
            alpha=float(train["alpha"]),
            beta=float(train["beta"]),
            gamma=float(train["gamma"]),
            delta=float(train.get("delta", 10.0)),
            lr=float(train["lr"]),
            beta1=float(train.get("beta1", 0.5)),
            beta2=float(train.get("beta2", 0.999)),
            batch_size=int(train["batch_size"]),
            epochs=int(train["epochs"]),
            seed=int(train["seed"]),
            mode=parse_enum(TrainMode, train["mode"]),
            patch_freq=int(patch["freq"]),
            patch_time=int(patch["time"]),
            patch_stride=None if patch.get("stride") is None else int(patch["stride"]),
        )

    def to_dict(self) -> dict:
        ret = asdict(self)
        ret["mode"] = self.mode.value
        return ret


def _freeze(net: nn.Module) -> nn.Module:
    net.eval()
    for p in net.parameters():
        p.requires_grad_(False)
    return net


class _TranslatorBase(Model):
    def __init__(self, source_domain: str, target_domain: str, stft: StftConfig, patch):
        self.source_domain = source_domain
        self.target_domain = target_domain
        self.stft = stft
        self.patch = tuple(int(p) for p in patch)

    @property
    def meta(self) -> dict:
        return {
            "source_domain": self.source_domain,
            "target_domain": self.target_domain,
            "stft": self.stft.to_dict(),
            "patch": list(self.patch),
            "contract": self.stft.contract_hash(),
        }

    @staticmethod
    def _meta_args(meta: dict):
        return (
            meta["source_domain"],
            meta["target_domain"],
            StftConfig.from_cfg(meta["stft"]),
            meta["patch"],
        )

    @property
    def networks(self) -> Dict[str, nn.Module]:
        raise NotImplementedError

    def to_checkpoint(self) -> Checkpoint:
        tensors = {}
        for prefix, net in self.networks.items():
            tensors.update(module_tensors(prefix, net))
        return Checkpoint(self.kind(), self.meta, tensors)

    def generator(self, direction: Direction) -> Generator:
        raise NotImplementedError

    def freeze(self):
        for net in self.networks.values():
            _freeze(net)
        return self


class CycleGanModel(_TranslatorBase):
    """Two generators (A->B, B->A) and two discriminators (on A, on B)."""

    def __init__(
        self,
        source_domain: str,
        target_domain: str,
        stft: StftConfig = StftConfig(),
        patch: Tuple[int, int] = (256, 64),
    ):
        super().__init__(source_domain, target_domain, stft, patch)
        ConfigCheck.le(self.patch[0], stft.freq_bins, "patch taller than the spectrogram")
        self.g_ab = Generator()
        self.g_ba = Generator()
        self.d_a = Discriminator()
        self.d_b = Discriminator()

    @staticmethod
    def kind() -> str:
        return "cyclegan"

    @property
    def networks(self) -> Dict[str, nn.Module]:
        return {"g_ab": self.g_ab, "g_ba": self.g_ba, "d_a": self.d_a, "d_b": self.d_b}

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "CycleGanModel":
        model = cls(*cls._meta_args(ckpt.meta))
        for prefix, net in model.networks.items():
            load_module_tensors(prefix, net, ckpt.tensors)
        return model.freeze()

    def generator(self, direction: Direction) -> Generator:
        return self.g_ab if direction is Direction.A_TO_B else self.g_ba

    def export(self) -> "TranslatorExport":
        """Deployment artifact: the source-to-target generator only."""
        exported = TranslatorExport(
            self.source_domain, self.target_domain, self.stft, self.patch
        )
        exported.g_ab.load_state_dict(self.g_ab.state_dict())
        return exported.freeze()


class TranslatorExport(_TranslatorBase):
    def __init__(self, source_domain, target_domain, stft=StftConfig(), patch=(256, 64)):
        super().__init__(source_domain, target_domain, stft, patch)
        self.g_ab = Generator()

    @staticmethod
    def kind() -> str:
        return "cyclegan-export"

    @property
    def networks(self) -> Dict[str, nn.Module]:
        return {"g_ab": self.g_ab}

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "TranslatorExport":
        model = cls(*cls._meta_args(ckpt.meta))
        load_module_tensors("g_ab", model.g_ab, ckpt.tensors)
        return model.freeze()

    def generator(self, direction: Direction) -> Generator:
        if direction is not Direction.A_TO_B:
            raise ConfigError("A deployment export only translates source to target")
        return self.g_ab
