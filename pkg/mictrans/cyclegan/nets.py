import torch
from torch import nn

from mictrans.error import ShapeCheck
from mictrans.nncore.layers import (
    LayerKind,
    Mode,
    batch_norm,
    conv2d,
    leaky_relu,
    make_layer,
    relu,
    tanh,
    transpose_conv2d,
)

ENCODER_CHANNELS = (32, 64, 128)
DISCRIMINATOR_CHANNELS = (32, 64, 128, 256)
N_RESBLOCKS = 3


def _down(c_in: int, c_out: int) -> nn.Conv2d:
    return make_layer(LayerKind.CONV2D, c_in, c_out, kernel_size=4, stride=2, padding=1)


def _up(c_in: int, c_out: int) -> nn.ConvTranspose2d:
    return make_layer(
        LayerKind.TRANSPOSE_CONV2D, c_in, c_out, kernel_size=4, stride=2, padding=1
    )


class ResBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv_a = make_layer(LayerKind.CONV2D, channels, channels, 3, 1, 1)
        self.conv_b = make_layer(LayerKind.CONV2D, channels, channels, 3, 1, 1)

    def forward(self, x):
        return x + conv2d(relu(conv2d(x, self.conv_a)), self.conv_b)


class Generator(nn.Module):
    """U-Net style spectrogram-to-spectrogram map.

    Three stride-2 convolutions (32, 64, 128 channels), three residual blocks at 128
    channels with BatchNorm after the first two, and three stride-2 transpose
    convolutions. Each decoder stage consumes its mirror encoder output concatenated on
    the channel axis. Input height and width must be multiples of 8.
    """

    def __init__(self):
        super().__init__()
        c1, c2, c3 = ENCODER_CHANNELS
        self.enc1 = _down(1, c1)
        self.enc2 = _down(c1, c2)
        self.enc3 = _down(c2, c3)
        self.blocks = nn.ModuleList([ResBlock(c3) for _ in range(N_RESBLOCKS)])
        self.norms = nn.ModuleList(
            [make_layer(LayerKind.BATCH_NORM, c3) for _ in range(N_RESBLOCKS - 1)]
        )
        self.dec3 = _up(c3 * 2, c2)
        self.dec2 = _up(c2 * 2, c1)
        self.dec1 = _up(c1 * 2, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        ShapeCheck.eq(x.dim(), 4, "generator takes [N, 1, F, T]")
        ShapeCheck.true(
            x.shape[2] % 8 == 0 and x.shape[3] % 8 == 0,
            f"generator input {tuple(x.shape[2:])} must be divisible by 8",
        )
        mode = Mode.of(self)
        e1 = relu(conv2d(x, self.enc1))
        e2 = relu(conv2d(e1, self.enc2))
        e3 = relu(conv2d(e2, self.enc3))

        h = e3
        for i, block in enumerate(self.blocks):
            h = block(h)
            if i < len(self.norms):
                h = batch_norm(h, self.norms[i], mode)

        d3 = relu(transpose_conv2d(torch.cat([h, e3], dim=1), self.dec3))
        d2 = relu(transpose_conv2d(torch.cat([d3, e2], dim=1), self.dec2))
        return tanh(transpose_conv2d(torch.cat([d2, e1], dim=1), self.dec1))


class Discriminator(nn.Module):
    """Four stride-2 convolutions (32 to 256 channels) with leaky ReLU and BatchNorm between
    consecutive layers, a 1x1 projection to one channel and a spatial mean: one unbounded
    score per sample.
    """

    def __init__(self):
        super().__init__()
        chans = (1,) + DISCRIMINATOR_CHANNELS
        self.convs = nn.ModuleList(
            [_down(chans[i], chans[i + 1]) for i in range(len(DISCRIMINATOR_CHANNELS))]
        )
        self.norms = nn.ModuleList(
            [make_layer(LayerKind.BATCH_NORM, c) for c in DISCRIMINATOR_CHANNELS[1:]]
        )
        self.head = make_layer(LayerKind.CONV2D, chans[-1], 1, kernel_size=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        mode = Mode.of(self)
        h = leaky_relu(conv2d(x, self.convs[0]))
        for conv, norm in zip(self.convs[1:], self.norms):
            h = leaky_relu(batch_norm(conv2d(h, conv), norm, mode))
        return conv2d(h, self.head).mean(dim=(1, 2, 3))
