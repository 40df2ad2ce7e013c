from abc import ABC, abstractmethod
from os import PathLike
from typing import Dict, Type, TypeVar

import numpy as np
import torch
from torch import nn

from mictrans.error import ConfigError, FormatError
from mictrans.nncore.checkpoint import Checkpoint, load_checkpoint, save_checkpoint

MT = TypeVar("MT", bound="Model")


def module_tensors(prefix: str, module: nn.Module) -> Dict[str, np.ndarray]:
    """Parameters and buffers of `module` as numpy arrays keyed `prefix.name`."""
    return {
        f"{prefix}.{name}": value.detach().cpu().numpy()
        for name, value in module.state_dict().items()
    }


def load_module_tensors(
    prefix: str, module: nn.Module, tensors: Dict[str, np.ndarray]
) -> None:
    expected = module.state_dict()
    state = {}
    for name, ref in expected.items():
        key = f"{prefix}.{name}"
        if key not in tensors:
            raise FormatError(f"Checkpoint misses tensor {key}")
        value = torch.from_numpy(tensors[key].copy())
        if tuple(value.shape) != tuple(ref.shape):
            raise FormatError(
                f"{key}: checkpoint shape {tuple(value.shape)} != model shape {tuple(ref.shape)}"
            )
        state[name] = value.to(ref.dtype)
    module.load_state_dict(state)


class Model(ABC):
    """A trained network set that round-trips through the checkpoint format."""

    @staticmethod
    @abstractmethod
    def kind() -> str:
        pass

    @abstractmethod
    def to_checkpoint(self) -> Checkpoint:
        pass

    @classmethod
    @abstractmethod
    def from_checkpoint(cls: Type[MT], ckpt: Checkpoint) -> MT:
        pass

    @staticmethod
    def name_suffix() -> str:
        return ".m2mckpt"

    def dump(self, path: PathLike) -> None:
        save_checkpoint(path, self.to_checkpoint())

    @classmethod
    def load(cls: Type[MT], path: PathLike) -> MT:
        ckpt = load_checkpoint(path)
        if ckpt.kind != cls.kind():
            raise ConfigError(f"{path} holds a {ckpt.kind!r} model, not {cls.kind()!r}")
        return cls.from_checkpoint(ckpt)

    @staticmethod
    def init(kind: str) -> Type["Model"]:
        if kind is None:
            raise ConfigError(
                "Model kind cannot be None. Use one of cyclegan|cyclegan-export|keyword."
            )

        if kind == "cyclegan":
            from mictrans.cyclegan.model import CycleGanModel

            return CycleGanModel
        elif kind == "cyclegan-export":
            from mictrans.cyclegan.model import TranslatorExport

            return TranslatorExport
        elif kind == "keyword":
            from mictrans.eval.keyword import KeywordModel

            return KeywordModel

        raise ConfigError(f"Unsupported model kind: {kind}")

    @staticmethod
    def load_any(path: PathLike) -> "Model":
        ckpt = load_checkpoint(path)
        return Model.init(ckpt.kind).from_checkpoint(ckpt)
