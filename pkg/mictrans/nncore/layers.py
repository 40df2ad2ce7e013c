import logging
from contextlib import contextmanager
from enum import Enum, unique
from typing import List, Optional, Sequence, Union

import torch
import torch.nn.functional as F
from multipledispatch import dispatch
from torch import nn

from mictrans.error import BatchTooSmallError, NumericError, ShapeCheck
from mictrans.logging import NN_LOG
from mictrans.macro import MICTRANS_RT_CHECK
from mictrans.util import all_finite

INIT_STD = 0.02
LEAKY_SLOPE = 0.2
BN_MOMENTUM = 0.1
BN_EPS = 1e-5

Tensor = torch.Tensor
LAYER_TYPES = (nn.Conv2d, nn.ConvTranspose2d, nn.BatchNorm2d, nn.Linear)
LayerParams = Union[LAYER_TYPES]


@unique
class LayerKind(Enum):
    CONV2D = "conv2d"
    TRANSPOSE_CONV2D = "transpose_conv2d"
    BATCH_NORM = "batch_norm"
    DENSE = "dense"


@unique
class Mode(Enum):
    TRAIN = "train"
    EVAL = "eval"

    @staticmethod
    def of(module: nn.Module) -> "Mode":
        return Mode.TRAIN if module.training else Mode.EVAL


@dispatch(nn.Conv2d)
def layer_kind(layer):
    return LayerKind.CONV2D


@dispatch(nn.ConvTranspose2d)
def layer_kind(layer):
    return LayerKind.TRANSPOSE_CONV2D


@dispatch(nn.BatchNorm2d)
def layer_kind(layer):
    return LayerKind.BATCH_NORM


@dispatch(nn.Linear)
def layer_kind(layer):
    return LayerKind.DENSE


def init_weights(module: nn.Module) -> None:
    """Truncated normal (std 0.02) weights, zero biases; BatchNorm scale 1 and shift 0."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            nn.init.trunc_normal_(m.weight, std=INIT_STD, a=-2 * INIT_STD, b=2 * INIT_STD)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.BatchNorm2d):
            nn.init.ones_(m.weight)
            nn.init.zeros_(m.bias)


def make_layer(
    kind: LayerKind,
    in_channels: int,
    out_channels: int = None,
    kernel_size: int = 3,
    stride: int = 1,
    padding: int = 0,
) -> LayerParams:
    if kind is LayerKind.CONV2D:
        layer = nn.Conv2d(in_channels, out_channels, kernel_size, stride, padding)
    elif kind is LayerKind.TRANSPOSE_CONV2D:
        layer = nn.ConvTranspose2d(in_channels, out_channels, kernel_size, stride, padding)
    elif kind is LayerKind.BATCH_NORM:
        layer = nn.BatchNorm2d(in_channels, eps=BN_EPS, momentum=BN_MOMENTUM)
    else:
        layer = nn.Linear(in_channels, out_channels)
    init_weights(layer)
    return layer


def debug_io(kind: LayerKind, inputs: Sequence[Tensor], output: Tensor) -> None:
    if NN_LOG.isEnabledFor(logging.DEBUG):
        for i, t in enumerate(inputs):
            NN_LOG.debug(
                f"[{kind.value} inp]@{i} {tuple(t.shape)} :: "
                f"{t.min().item():.5f} ~ {t.max().item():.5f}"
            )
        NN_LOG.debug(
            f"[{kind.value} out] {tuple(output.shape)} :: "
            f"{output.min().item():.5f} ~ {output.max().item():.5f}"
        )


def _checked(kind: LayerKind, inputs: Sequence[Tensor], output: Tensor) -> Tensor:
    debug_io(kind, inputs, output)
    if MICTRANS_RT_CHECK and not all_finite(output) and all_finite(*inputs):
        raise NumericError(f"{kind.value} produced NaN/Inf from finite inputs")
    return output


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def conv2d(x: Tensor, layer: nn.Conv2d) -> Tensor:
    ShapeCheck.eq(x.dim(), 4, "conv2d takes [N, C, H, W]")
    ShapeCheck.eq(x.shape[1], layer.in_channels, "conv2d input channels")
    for size, k, s, p in zip(x.shape[2:], layer.kernel_size, layer.stride, layer.padding):
        ShapeCheck.gt(conv_output_size(size, k, s, p), 0, f"conv2d on {tuple(x.shape)}")
    out = F.conv2d(x, layer.weight, layer.bias, layer.stride, layer.padding)
    return _checked(LayerKind.CONV2D, [x], out)


def transpose_conv2d(x: Tensor, layer: nn.ConvTranspose2d) -> Tensor:
    ShapeCheck.eq(x.dim(), 4, "transpose_conv2d takes [N, C, H, W]")
    ShapeCheck.eq(x.shape[1], layer.in_channels, "transpose_conv2d input channels")
    for size, k, s, p in zip(x.shape[2:], layer.kernel_size, layer.stride, layer.padding):
        ShapeCheck.gt((size - 1) * s - 2 * p + k, 0, f"transpose_conv2d on {tuple(x.shape)}")
    out = F.conv_transpose2d(x, layer.weight, layer.bias, layer.stride, layer.padding)
    return _checked(LayerKind.TRANSPOSE_CONV2D, [x], out)


def batch_norm(x: Tensor, layer: nn.BatchNorm2d, mode: Mode) -> Tensor:
    ShapeCheck.eq(x.dim(), 4, "batch_norm takes [N, C, H, W]")
    ShapeCheck.eq(x.shape[1], layer.num_features, "batch_norm channels")
    if mode is Mode.TRAIN and x.shape[0] < 2:
        raise BatchTooSmallError("batch_norm needs >= 2 samples in train mode")
    out = F.batch_norm(
        x,
        layer.running_mean,
        layer.running_var,
        layer.weight,
        layer.bias,
        training=mode is Mode.TRAIN,
        momentum=BN_MOMENTUM,
        eps=BN_EPS,
    )
    return _checked(LayerKind.BATCH_NORM, [x], out)


def dense(x: Tensor, layer: nn.Linear) -> Tensor:
    ShapeCheck.eq(x.shape[-1], layer.in_features, "dense input features")
    return _checked(LayerKind.DENSE, [x], F.linear(x, layer.weight, layer.bias))


class ActivationTape:
    """Sign patterns of the piecewise-linear activations, in call order.

    While recording, every `relu`/`leaky_relu` call stores its `x > 0` mask. While replaying,
    the calls reuse the stored masks instead of their own, which keeps the network on one
    linear piece; `flips` counts the elements whose own sign disagreed with the tape.
    """

    def __init__(self):
        self.masks: List[Tensor] = []
        self.replaying = False
        self.cursor = 0
        self.flips = 0

    def replay(self) -> "ActivationTape":
        self.replaying = True
        self.cursor = 0
        self.flips = 0
        return self

    def pattern(self, x: Tensor) -> Tensor:
        own = (x > 0).detach()
        if not self.replaying:
            self.masks.append(own)
            return own
        ShapeCheck.lt(self.cursor, len(self.masks), "activation tape exhausted")
        mask = self.masks[self.cursor]
        ShapeCheck.eq(tuple(mask.shape), tuple(x.shape), "activation tape shape")
        self.cursor += 1
        self.flips += int((own != mask).sum())
        return mask


_TAPE: Optional[ActivationTape] = None


@contextmanager
def activation_tape(tape: ActivationTape):
    global _TAPE
    prev, _TAPE = _TAPE, tape
    try:
        yield tape
    finally:
        _TAPE = prev


def relu(x: Tensor) -> Tensor:
    if _TAPE is None:
        return torch.relu(x)
    return torch.where(_TAPE.pattern(x), x, torch.zeros_like(x))


def leaky_relu(x: Tensor) -> Tensor:
    if _TAPE is None:
        return F.leaky_relu(x, LEAKY_SLOPE)
    return torch.where(_TAPE.pattern(x), x, LEAKY_SLOPE * x)


def tanh(x: Tensor) -> Tensor:
    return torch.tanh(x)


def l1_mean(a: Tensor, b: Tensor) -> Tensor:
    ShapeCheck.eq(tuple(a.shape), tuple(b.shape), "l1_mean operands")
    return (a - b).abs().mean()


def lsq_mean(a: Tensor, target: float) -> Tensor:
    return ((a - target) ** 2).mean()
